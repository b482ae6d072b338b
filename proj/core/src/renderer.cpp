#include "gscd/renderer.hpp"

#include <algorithm>
#include <cmath>

#include "raster_core.hpp"

namespace gscd {

std::optional<Projected2D> project_gaussian(const Gaussian3D& g, const PinholeCamera& cam,
                                            const RenderOptions& opts, GaussianIndex index) {
  const Mat3 w = cam.rotation_matrix();
  const Vec3 t = w * g.position + cam.translation;
  if (t.z() <= opts.near_plane) return std::nullopt;

  const double z = t.z();
  // Centers far outside the view cone would otherwise yield huge footprints
  // from the linearized projection.
  const double lim_x = opts.frustum_margin * std::max(cam.cx, cam.width - cam.cx) / cam.fx;
  const double lim_y = opts.frustum_margin * std::max(cam.cy, cam.height - cam.cy) / cam.fy;
  if (std::abs(t.x() / z) > lim_x || std::abs(t.y() / z) > lim_y) return std::nullopt;
  Eigen::Matrix<double, 2, 3> j;
  j << cam.fx / z, 0.0, -cam.fx * t.x() / (z * z),  //
      0.0, cam.fy / z, -cam.fy * t.y() / (z * z);
  const Mat3 cov_cam = w * g.covariance() * w.transpose();
  Mat2 cov2d = j * cov_cam * j.transpose();
  cov2d(0, 1) = cov2d(1, 0) = 0.5 * (cov2d(0, 1) + cov2d(1, 0));
  cov2d(0, 0) += opts.cov_blur;
  cov2d(1, 1) += opts.cov_blur;

  const double det = cov2d.determinant();
  if (!(det > 0.0)) return std::nullopt;

  Projected2D p;
  p.gaussian_index = index;
  p.mean2d = cam.project_camera(t);
  p.cov2d = cov2d;
  p.conic << cov2d(1, 1) / det, -cov2d(0, 1) / det, -cov2d(1, 0) / det, cov2d(0, 0) / det;
  p.depth = z;
  p.opacity = g.opacity;
  p.color = g.color;
  p.cam_point = t;
  p.cov_cam = cov_cam;

  const double mid = 0.5 * (cov2d(0, 0) + cov2d(1, 1));
  const double lambda_max = mid + std::sqrt(std::max(0.0, mid * mid - det));
  const double radius = opts.cutoff_sigma * std::sqrt(lambda_max);
  // Pixel x is evaluated iff |x + 0.5 - mean| <= radius (same for y).
  const double x0 = std::ceil(p.mean2d.x() - radius - 0.5);
  const double x1 = std::floor(p.mean2d.x() + radius - 0.5) + 1.0;
  const double y0 = std::ceil(p.mean2d.y() - radius - 0.5);
  const double y1 = std::floor(p.mean2d.y() + radius - 0.5) + 1.0;
  if (!std::isfinite(x0) || !std::isfinite(y0) || !std::isfinite(x1) || !std::isfinite(y1)) {
    return std::nullopt;
  }
  p.bbox.x0 = static_cast<int>(std::clamp(x0, 0.0, double(cam.width)));
  p.bbox.x1 = static_cast<int>(std::clamp(x1, 0.0, double(cam.width)));
  p.bbox.y0 = static_cast<int>(std::clamp(y0, 0.0, double(cam.height)));
  p.bbox.y1 = static_cast<int>(std::clamp(y1, 0.0, double(cam.height)));
  if (p.bbox.empty()) return std::nullopt;
  return p;
}

std::vector<Projected2D> project_scene(const GaussianScene& scene, const PinholeCamera& cam,
                                       const RenderOptions& opts) {
  std::vector<std::optional<Projected2D>> slots(scene.size());
  parallel_for(scene.size(), opts.threads, [&](std::size_t i) {
    slots[i] = project_gaussian(scene.gaussians[i], cam, opts, static_cast<GaussianIndex>(i));
  });
  std::vector<Projected2D> out;
  out.reserve(scene.size());
  for (auto& s : slots) {
    if (s) out.push_back(*s);
  }
  std::stable_sort(out.begin(), out.end(), [](const Projected2D& a, const Projected2D& b) {
    if (a.depth != b.depth) return a.depth < b.depth;
    return a.gaussian_index < b.gaussian_index;
  });
  return out;
}

namespace detail {

Frame build_frame(const GaussianScene& scene, const PinholeCamera& cam, const RenderOptions& opts) {
  Frame f;
  f.width = cam.width;
  f.height = cam.height;
  f.tile = std::max(1, opts.tile_size);
  f.tiles_x = (cam.width + f.tile - 1) / f.tile;
  f.tiles_y = (cam.height + f.tile - 1) / f.tile;
  f.splats = project_scene(scene, cam, opts);
  f.tile_lists.resize(static_cast<std::size_t>(f.tile_count()));
  for (std::uint32_t i = 0; i < f.splats.size(); ++i) {
    const PixelRect& b = f.splats[i].bbox;
    const int tx0 = b.x0 / f.tile, tx1 = (b.x1 - 1) / f.tile;
    const int ty0 = b.y0 / f.tile, ty1 = (b.y1 - 1) / f.tile;
    for (int ty = ty0; ty <= ty1; ++ty) {
      for (int tx = tx0; tx <= tx1; ++tx) {
        f.tile_lists[static_cast<std::size_t>(ty * f.tiles_x + tx)].push_back(i);
      }
    }
  }
  return f;
}

}  // namespace detail

ImageBuffer render(const GaussianScene& scene, const PinholeCamera& cam, const Rgb& background,
                   const RenderOptions& opts) {
  return render_with_contributions(scene, cam, background, -1.0, opts).first;
}

std::pair<ImageBuffer, ContributionRecord> render_with_contributions(
    const GaussianScene& scene, const PinholeCamera& cam, const Rgb& background,
    double mask_threshold, const RenderOptions& opts) {
  const auto frame = detail::build_frame(scene, cam, opts);
  ImageBuffer img(cam.width, cam.height);
  std::vector<Rgb> accum(img.pixel_count(), Rgb::Zero());
  const bool record = mask_threshold >= 0.0;
  std::vector<std::vector<ContributionEntry>> per_tile(
      record ? static_cast<std::size_t>(frame.tile_count()) : 0);

  detail::composite_tiles(
      frame, opts,
      [&](int tile, int x, int y, std::size_t, const Projected2D& s, double alpha, double t,
          double, bool) {
        const std::size_t p = static_cast<std::size_t>(y) * cam.width + x;
        accum[p] += s.color * (alpha * t);
        if (record && alpha * t >= mask_threshold) {
          per_tile[static_cast<std::size_t>(tile)].push_back(
              {s.gaussian_index, static_cast<std::uint32_t>(p), static_cast<float>(alpha),
               static_cast<float>(t)});
        }
      },
      [&](int, int x, int y, double t_final) {
        const std::size_t p = static_cast<std::size_t>(y) * cam.width + x;
        const Rgb c = accum[p] + background * t_final;
        for (int ch = 0; ch < 3; ++ch) img.pixels[p * 3 + ch] = static_cast<float>(c[ch]);
        img.final_transmittance[p] = static_cast<float>(t_final);
      });

  ContributionRecord rec;
  rec.view_id = cam.id;
  rec.width = cam.width;
  rec.height = cam.height;
  std::size_t total = 0;
  for (const auto& v : per_tile) total += v.size();
  rec.entries.reserve(total);
  for (const auto& v : per_tile) rec.entries.insert(rec.entries.end(), v.begin(), v.end());
  return {std::move(img), std::move(rec)};
}

std::vector<double> render_payload(const GaussianScene& scene, const PinholeCamera& cam,
                                   std::span<const double> payload, const RenderOptions& opts) {
  const auto frame = detail::build_frame(scene, cam, opts);
  std::vector<double> out(cam.pixel_count(), 0.0);
  detail::composite_tiles(
      frame, opts,
      [&](int, int x, int y, std::size_t, const Projected2D& s, double alpha, double t, double,
          bool) {
        const double v = payload[s.gaussian_index];
        if (v != 0.0) out[static_cast<std::size_t>(y) * cam.width + x] += v * alpha * t;
      },
      [](int, int, int, double) {});
  return out;
}

DepthImage render_depth(const GaussianScene& scene, const PinholeCamera& cam,
                        const RenderOptions& opts) {
  const auto frame = detail::build_frame(scene, cam, opts);
  DepthImage out;
  out.depth.assign(cam.pixel_count(), 0.0);
  out.alpha.assign(cam.pixel_count(), 0.0);
  detail::composite_tiles(
      frame, opts,
      [&](int, int x, int y, std::size_t, const Projected2D& s, double alpha, double t, double,
          bool) { out.depth[static_cast<std::size_t>(y) * cam.width + x] += s.depth * alpha * t; },
      [&](int, int x, int y, double t_final) {
        const std::size_t p = static_cast<std::size_t>(y) * cam.width + x;
        out.alpha[p] = 1.0 - t_final;
        if (out.alpha[p] > 0.0) out.depth[p] /= out.alpha[p];
      });
  return out;
}

}  // namespace gscd
