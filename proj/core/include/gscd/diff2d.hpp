#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "gscd/image.hpp"

namespace gscd {

// Row-major h x w x d feature tensor.
struct FeatureMap {
  int height = 0;
  int width = 0;
  int dim = 0;
  std::vector<float> data;

  FeatureMap() = default;
  FeatureMap(int h, int w, int d)
      : height(h), width(w), dim(d), data(static_cast<std::size_t>(h) * w * d, 0.0f) {}
  std::size_t pixel_count() const { return static_cast<std::size_t>(height) * width; }
  const float* at(std::size_t pixel) const { return data.data() + pixel * dim; }
  float* at(std::size_t pixel) { return data.data() + pixel * dim; }
  bool same_shape(const FeatureMap& o) const {
    return height == o.height && width == o.width && dim == o.dim;
  }
};

enum class FeatureKind { rgb, patch, external };

struct FeatureProvider {
  FeatureKind kind = FeatureKind::rgb;
  std::filesystem::path external_path;  // FMAP file, used when kind == external
};

// rgb: d = 3 passthrough. patch: d = 27, the 3x3 RGB neighbourhood with zero
// padding. external: FMAP file bilinearly upsampled to the image size.
FeatureMap extract_features(const ImageBuffer& img, const FeatureProvider& provider);

// FMAP: "FMAP", u32 version=1, u32 h, u32 w, u32 d, h*w*d f32 row-major.
FeatureMap load_fmap(const std::filesystem::path& path);
void save_fmap(const FeatureMap& map, const std::filesystem::path& path);

// Corner-aligned bilinear resampling; the four corner samples of the output
// equal the source corners.
FeatureMap upsample_bilinear(const FeatureMap& src, int height, int width);

struct PrincipalAxis {
  Eigen::VectorXd v;  // unit length, largest-magnitude component positive
  double explained_variance_ratio = 0.0;
};

// First principal component of the pooled per-pixel features of both maps,
// uniformly subsampled (seeded) to at most max_samples vectors.
PrincipalAxis principal_axis(const FeatureMap& fa, const FeatureMap& fb,
                             std::size_t max_samples = 65536, std::uint64_t seed = 0);

struct SignedDistanceMap {
  int height = 0;
  int width = 0;
  std::vector<float> values;
};

// values[p] = (fa[p] - fb[p]) . v / |v|
SignedDistanceMap signed_distance(const FeatureMap& fa, const FeatureMap& fb,
                                  const PrincipalAxis& axis);

enum class ThresholdMode { fixed, quantile };

struct DiffThresholds {
  double eps1 = 0.1;   // >= 0
  double eps2 = -0.1;  // <= 0
  ThresholdMode mode = ThresholdMode::quantile;
  double quantile = 0.95;
  // Quantile mode: eps1 = scale * Q_q(positive D), eps2 = scale * Q_{1-q}(negative D),
  // then pushed away from zero to at least `floor`.
  double quantile_scale = 1.0;
  double floor = 0.0;
};

// Effective (eps1, eps2) for a map under the given thresholds.
std::pair<double, double> resolve_thresholds(const SignedDistanceMap& sd, const DiffThresholds& th);

struct DirectionalMasks {
  ChangeMask m1;  // D > eps1
  ChangeMask m2;  // D < eps2
  double eps1 = 0.0;
  double eps2 = 0.0;
};

DirectionalMasks threshold_directional(const SignedDistanceMap& sd, const DiffThresholds& th);

enum class BaselineKind { pixel, ssim, feature, pixel_x_feature, ssim_x_feature };

struct BaselineParams {
  double pixel_threshold = 0.1;  // per-pixel RGB L2 distance
  double ssim_threshold = 0.3;   // on 1 - local SSIM
  FeatureProvider features;
  DiffThresholds feature_thresholds;
  std::size_t pca_samples = 65536;
  std::uint64_t seed = 0;
};

ChangeMask baseline_diff(const ImageBuffer& a, const ImageBuffer& b, BaselineKind kind,
                         const BaselineParams& params = {});

// Linear-interpolated quantile (q in [0,1]) of a non-empty sample.
double quantile(std::vector<double> values, double q);

std::string to_string(FeatureKind kind);
std::string to_string(BaselineKind kind);
FeatureKind parse_feature_kind(const std::string& s);
BaselineKind parse_baseline_kind(const std::string& s);
ThresholdMode parse_threshold_mode(const std::string& s);
std::string to_string(ThresholdMode mode);

}  // namespace gscd
