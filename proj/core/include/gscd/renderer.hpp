#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "gscd/camera.hpp"
#include "gscd/image.hpp"
#include "gscd/scene.hpp"

namespace gscd {

struct RenderOptions {
  double near_plane = 0.01;
  double frustum_margin = 1.3;     // cull centers beyond this multiple of the half field of view
  double alpha_min = 1.0 / 255.0;  // contributions below this are skipped
  double alpha_max = 0.999;
  double cutoff_sigma = 3.0;       // square footprint half-width in std-devs
  double cov_blur = 0.3;           // px^2 added to the 2D covariance diagonal
  int tile_size = 16;
  int threads = 1;
};

// Screen-space footprint of one Gaussian.
struct Projected2D {
  GaussianIndex gaussian_index = 0;
  Vec2 mean2d = Vec2::Zero();
  Mat2 cov2d = Mat2::Identity();
  Mat2 conic = Mat2::Identity();  // cov2d^-1
  double depth = 0.0;             // camera-space z
  PixelRect bbox;                 // pixels evaluated for this splat
  double opacity = 0.0;
  Rgb color = Rgb::Zero();
  // Kept for the backward pass.
  Vec3 cam_point = Vec3::Zero();
  Mat3 cov_cam = Mat3::Zero();
};

// EWA projection. nullopt when the center is at/behind the near plane or the
// footprint misses the image.
std::optional<Projected2D> project_gaussian(const Gaussian3D& g, const PinholeCamera& cam,
                                            const RenderOptions& opts = {},
                                            GaussianIndex index = 0);

// Projects every Gaussian and sorts front-to-back by (depth, index). This is
// the single compositing order shared by every render path.
std::vector<Projected2D> project_scene(const GaussianScene& scene, const PinholeCamera& cam,
                                       const RenderOptions& opts = {});

ImageBuffer render(const GaussianScene& scene, const PinholeCamera& cam, const Rgb& background,
                   const RenderOptions& opts = {});

struct ContributionEntry {
  std::uint32_t gaussian_index;
  std::uint32_t pixel_index;
  float alpha;                 // o_i(p) after the 2D falloff and clamp
  float transmittance_before;  // T_i(p)
};

struct ContributionRecord {
  int view_id = 0;
  int width = 0;
  int height = 0;
  // Grouped by tile, then by pixel, then in compositing order.
  std::vector<ContributionEntry> entries;
};

std::pair<ImageBuffer, ContributionRecord> render_with_contributions(
    const GaussianScene& scene, const PinholeCamera& cam, const Rgb& background,
    double mask_threshold = 1e-5, const RenderOptions& opts = {});

// Composites an arbitrary per-Gaussian scalar: out[p] = sum_i payload_i a_i T_i.
std::vector<double> render_payload(const GaussianScene& scene, const PinholeCamera& cam,
                                   std::span<const double> payload,
                                   const RenderOptions& opts = {});

struct DepthImage {
  std::vector<double> depth;  // alpha-weighted mean depth, 0 where nothing drawn
  std::vector<double> alpha;  // accumulated opacity 1 - T_final
};
DepthImage render_depth(const GaussianScene& scene, const PinholeCamera& cam,
                        const RenderOptions& opts = {});

}  // namespace gscd
