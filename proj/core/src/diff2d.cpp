#include "gscd/diff2d.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include <Eigen/Eigenvalues>

#include "binary_io.hpp"
#include "gscd/errors.hpp"
#include "gscd/metrics.hpp"

namespace gscd {

namespace {

FeatureMap rgb_features(const ImageBuffer& img) {
  FeatureMap f(img.height, img.width, 3);
  f.data = img.pixels;
  return f;
}

FeatureMap patch_features(const ImageBuffer& img) {
  FeatureMap f(img.height, img.width, 27);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      float* out = f.at(static_cast<std::size_t>(y) * img.width + x);
      int k = 0;
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          const int xx = x + dx, yy = y + dy;
          const bool inside = xx >= 0 && yy >= 0 && xx < img.width && yy < img.height;
          for (int c = 0; c < 3; ++c) out[k++] = inside ? img.at(xx, yy, c) : 0.0f;
        }
      }
    }
  }
  return f;
}

}  // namespace

FeatureMap load_fmap(const std::filesystem::path& path) {
  auto r = detail::ByteReader::from_file(path);
  r.expect_magic("FMAP");
  const std::uint32_t version = r.u32();
  if (version != 1) throw FormatError(path.string() + ": unsupported FMAP version");
  const std::uint32_t h = r.u32(), w = r.u32(), d = r.u32();
  if (h == 0 || w == 0 || d == 0) throw DataError(path.string() + ": FMAP dims must be > 0");
  if (r.remaining() != static_cast<std::size_t>(h) * w * d * sizeof(float)) {
    throw FormatError(path.string() + ": FMAP payload size mismatch");
  }
  FeatureMap f(static_cast<int>(h), static_cast<int>(w), static_cast<int>(d));
  r.f32s(f.data);
  for (float v : f.data) {
    if (!std::isfinite(v)) throw DataError(path.string() + ": non-finite feature");
  }
  return f;
}

void save_fmap(const FeatureMap& map, const std::filesystem::path& path) {
  detail::ByteWriter w;
  w.magic("FMAP");
  w.u32(1);
  w.u32(static_cast<std::uint32_t>(map.height));
  w.u32(static_cast<std::uint32_t>(map.width));
  w.u32(static_cast<std::uint32_t>(map.dim));
  w.f32s(map.data);
  w.write_file(path);
}

FeatureMap upsample_bilinear(const FeatureMap& src, int height, int width) {
  if (src.height <= 0 || src.width <= 0 || height <= 0 || width <= 0) {
    throw ContractError("upsample: dimensions must be positive");
  }
  FeatureMap out(height, width, src.dim);
  const auto coord = [](int i, int n_out, int n_in) {
    return n_out == 1 ? 0.0 : static_cast<double>(i) * (n_in - 1) / (n_out - 1);
  };
  for (int y = 0; y < height; ++y) {
    const double sy = coord(y, height, src.height);
    const int y0 = std::min(static_cast<int>(sy), src.height - 1);
    const int y1 = std::min(y0 + 1, src.height - 1);
    const double fy = sy - y0;
    for (int x = 0; x < width; ++x) {
      const double sx = coord(x, width, src.width);
      const int x0 = std::min(static_cast<int>(sx), src.width - 1);
      const int x1 = std::min(x0 + 1, src.width - 1);
      const double fx = sx - x0;
      const float* a = src.at(static_cast<std::size_t>(y0) * src.width + x0);
      const float* b = src.at(static_cast<std::size_t>(y0) * src.width + x1);
      const float* c = src.at(static_cast<std::size_t>(y1) * src.width + x0);
      const float* d = src.at(static_cast<std::size_t>(y1) * src.width + x1);
      float* o = out.at(static_cast<std::size_t>(y) * width + x);
      for (int k = 0; k < src.dim; ++k) {
        const double top = a[k] + fx * (b[k] - a[k]);
        const double bottom = c[k] + fx * (d[k] - c[k]);
        o[k] = static_cast<float>(top + fy * (bottom - top));
      }
    }
  }
  return out;
}

FeatureMap extract_features(const ImageBuffer& img, const FeatureProvider& provider) {
  switch (provider.kind) {
    case FeatureKind::rgb: return rgb_features(img);
    case FeatureKind::patch: return patch_features(img);
    case FeatureKind::external: {
      const FeatureMap raw = load_fmap(provider.external_path);
      // Raw encoder maps are coarser than the image with the same aspect ratio.
      const double aspect_raw = static_cast<double>(raw.width) / raw.height;
      const double aspect_img = static_cast<double>(img.width) / img.height;
      if (raw.height > img.height || raw.width > img.width ||
          std::abs(aspect_raw - aspect_img) > 0.02 * aspect_img) {
        throw DataError(provider.external_path.string() + ": feature map " +
                        std::to_string(raw.height) + "x" + std::to_string(raw.width) +
                        " cannot be upsampled to image " + std::to_string(img.height) + "x" +
                        std::to_string(img.width));
      }
      return upsample_bilinear(raw, img.height, img.width);
    }
  }
  throw ContractError("unknown feature provider");
}

PrincipalAxis principal_axis(const FeatureMap& fa, const FeatureMap& fb, std::size_t max_samples,
                             std::uint64_t seed) {
  if (!fa.same_shape(fb)) throw ContractError("principal_axis: feature maps differ in shape");
  if (max_samples < 2) throw ContractError("principal_axis: max_samples must be >= 2");
  const std::size_t per_map = fa.pixel_count();
  const std::size_t population = 2 * per_map;
  const int d = fa.dim;

  // Selection sampling keeps the chosen indices in ascending order.
  std::vector<std::size_t> chosen;
  if (population <= max_samples) {
    chosen.resize(population);
    for (std::size_t i = 0; i < population; ++i) chosen[i] = i;
  } else {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    chosen.reserve(max_samples);
    std::size_t needed = max_samples;
    for (std::size_t i = 0; i < population && needed > 0; ++i) {
      if (u(rng) * static_cast<double>(population - i) < static_cast<double>(needed)) {
        chosen.push_back(i);
        --needed;
      }
    }
  }
  const auto sample = [&](std::size_t i) {
    return i < per_map ? fa.at(i) : fb.at(i - per_map);
  };

  Eigen::VectorXd mean = Eigen::VectorXd::Zero(d);
  for (std::size_t i : chosen) {
    const float* f = sample(i);
    for (int k = 0; k < d; ++k) mean[k] += f[k];
  }
  mean /= static_cast<double>(chosen.size());
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(d, d);
  Eigen::VectorXd centered(d);
  for (std::size_t i : chosen) {
    const float* f = sample(i);
    for (int k = 0; k < d; ++k) centered[k] = f[k] - mean[k];
    cov.selfadjointView<Eigen::Lower>().rankUpdate(centered);
  }
  cov = cov.selfadjointView<Eigen::Lower>();
  cov /= static_cast<double>(chosen.size() - 1);

  const double trace = cov.trace();
  if (!(trace > 0.0)) throw DegenerateAxisError("features have zero variance");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  if (solver.info() != Eigen::Success) throw DegenerateAxisError("eigen decomposition failed");
  // Eigenvalues ascend; the last column is the principal direction.
  PrincipalAxis axis;
  axis.v = solver.eigenvectors().col(d - 1).normalized();
  axis.explained_variance_ratio = std::clamp(solver.eigenvalues()[d - 1] / trace, 0.0, 1.0);
  Eigen::Index largest = 0;
  axis.v.cwiseAbs().maxCoeff(&largest);
  if (axis.v[largest] < 0.0) axis.v = -axis.v;
  return axis;
}

SignedDistanceMap signed_distance(const FeatureMap& fa, const FeatureMap& fb,
                                  const PrincipalAxis& axis) {
  if (!fa.same_shape(fb)) throw ContractError("signed_distance: feature maps differ in shape");
  if (axis.v.size() != fa.dim) throw ContractError("signed_distance: axis dimension mismatch");
  const double norm = axis.v.norm();
  SignedDistanceMap sd{fa.height, fa.width, std::vector<float>(fa.pixel_count())};
  for (std::size_t p = 0; p < fa.pixel_count(); ++p) {
    const float* a = fa.at(p);
    const float* b = fb.at(p);
    double dot = 0.0;
    for (int k = 0; k < fa.dim; ++k) {
      dot += (static_cast<double>(a[k]) - static_cast<double>(b[k])) * axis.v[k];
    }
    sd.values[p] = static_cast<float>(dot / norm);
  }
  return sd;
}

double quantile(std::vector<double> values, double q) {
  if (values.empty()) throw ContractError("quantile of an empty sample");
  std::sort(values.begin(), values.end());
  const double pos = std::clamp(q, 0.0, 1.0) * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

std::pair<double, double> resolve_thresholds(const SignedDistanceMap& sd,
                                             const DiffThresholds& th) {
  if (th.mode == ThresholdMode::fixed) {
    if (th.eps1 < 0.0 || th.eps2 > 0.0) throw ContractError("thresholds need eps1 >= 0 >= eps2");
    return {th.eps1, th.eps2};
  }
  std::vector<double> pos, neg;
  for (float v : sd.values) {
    if (v > 0.0f) pos.push_back(v);
    else if (v < 0.0f) neg.push_back(v);
  }
  constexpr double inf = std::numeric_limits<double>::infinity();
  double eps1 = pos.empty() ? inf : th.quantile_scale * quantile(std::move(pos), th.quantile);
  double eps2 =
      neg.empty() ? -inf : th.quantile_scale * quantile(std::move(neg), 1.0 - th.quantile);
  eps1 = std::max(eps1, th.floor);
  eps2 = std::min(eps2, -th.floor);
  return {eps1, eps2};
}

DirectionalMasks threshold_directional(const SignedDistanceMap& sd, const DiffThresholds& th) {
  const auto [eps1, eps2] = resolve_thresholds(sd, th);
  DirectionalMasks out{ChangeMask(sd.width, sd.height), ChangeMask(sd.width, sd.height), eps1, eps2};
  for (std::size_t p = 0; p < sd.values.size(); ++p) {
    const double v = sd.values[p];
    if (v > eps1) out.m1.set(p);
    else if (v < eps2) out.m2.set(p);
  }
  return out;
}

namespace {

ChangeMask pixel_mask(const ImageBuffer& a, const ImageBuffer& b, double threshold) {
  ChangeMask m(a.width, a.height);
  for (std::size_t p = 0; p < a.pixel_count(); ++p) {
    double sq = 0.0;
    for (int c = 0; c < 3; ++c) {
      const double d = static_cast<double>(a.pixels[p * 3 + c]) - b.pixels[p * 3 + c];
      sq += d * d;
    }
    if (std::sqrt(sq) > threshold) m.set(p);
  }
  return m;
}

ChangeMask ssim_mask(const ImageBuffer& a, const ImageBuffer& b, double threshold) {
  const auto map = ssim_map(luminance(a), luminance(b), a.width, a.height);
  ChangeMask m(a.width, a.height);
  for (std::size_t p = 0; p < map.size(); ++p) {
    if (1.0 - map[p] > threshold) m.set(p);
  }
  return m;
}

ChangeMask feature_mask(const ImageBuffer& a, const ImageBuffer& b, const BaselineParams& params) {
  const FeatureMap fa = extract_features(a, params.features);
  const FeatureMap fb = extract_features(b, params.features);
  PrincipalAxis axis;
  try {
    axis = principal_axis(fa, fb, params.pca_samples, params.seed);
  } catch (const DegenerateAxisError&) {
    return ChangeMask(a.width, a.height);  // constant inputs: nothing to separate
  }
  const auto masks = threshold_directional(signed_distance(fa, fb, axis), params.feature_thresholds);
  return masks.m1 | masks.m2;
}

}  // namespace

ChangeMask baseline_diff(const ImageBuffer& a, const ImageBuffer& b, BaselineKind kind,
                         const BaselineParams& params) {
  if (!a.same_size(b)) throw ContractError("baseline_diff: image sizes differ");
  switch (kind) {
    case BaselineKind::pixel: return pixel_mask(a, b, params.pixel_threshold);
    case BaselineKind::ssim: return ssim_mask(a, b, params.ssim_threshold);
    case BaselineKind::feature: return feature_mask(a, b, params);
    case BaselineKind::pixel_x_feature:
      return pixel_mask(a, b, params.pixel_threshold) & feature_mask(a, b, params);
    case BaselineKind::ssim_x_feature:
      return ssim_mask(a, b, params.ssim_threshold) & feature_mask(a, b, params);
  }
  throw ContractError("unknown baseline kind");
}

std::string to_string(FeatureKind kind) {
  switch (kind) {
    case FeatureKind::rgb: return "rgb";
    case FeatureKind::patch: return "patch";
    case FeatureKind::external: return "external";
  }
  return "?";
}

FeatureKind parse_feature_kind(const std::string& s) {
  if (s == "rgb") return FeatureKind::rgb;
  if (s == "patch") return FeatureKind::patch;
  if (s == "external") return FeatureKind::external;
  throw ContractError("unknown feature provider '" + s + "'");
}

std::string to_string(BaselineKind kind) {
  switch (kind) {
    case BaselineKind::pixel: return "pixel";
    case BaselineKind::ssim: return "ssim";
    case BaselineKind::feature: return "feature";
    case BaselineKind::pixel_x_feature: return "pixel_x_feature";
    case BaselineKind::ssim_x_feature: return "ssim_x_feature";
  }
  return "?";
}

BaselineKind parse_baseline_kind(const std::string& s) {
  if (s == "pixel") return BaselineKind::pixel;
  if (s == "ssim") return BaselineKind::ssim;
  if (s == "feature") return BaselineKind::feature;
  if (s == "pixel_x_feature") return BaselineKind::pixel_x_feature;
  if (s == "ssim_x_feature") return BaselineKind::ssim_x_feature;
  throw ContractError("unknown baseline kind '" + s + "'");
}

ThresholdMode parse_threshold_mode(const std::string& s) {
  if (s == "fixed") return ThresholdMode::fixed;
  if (s == "quantile") return ThresholdMode::quantile;
  throw ContractError("unknown threshold mode '" + s + "'");
}

std::string to_string(ThresholdMode mode) {
  return mode == ThresholdMode::fixed ? "fixed" : "quantile";
}

}  // namespace gscd
