#include "gscd/gradients.hpp"

#include <cmath>

#include "gscd/errors.hpp"
#include "raster_core.hpp"

namespace gscd {

namespace {

void check_dims(const GaussianScene& scene, const PinholeCamera& cam, const ImageBuffer& target,
                const ChangeMask& mask, const std::vector<bool>* active) {
  if (target.width != cam.width || target.height != cam.height) {
    throw ContractError("target image does not match camera dimensions");
  }
  if (!mask.same_size(target)) throw ContractError("pixel mask does not match target");
  if (active && active->size() != scene.size()) {
    throw ContractError("active flags do not match scene size");
  }
}

double residual_grad(double residual, LossKind kind) {
  if (kind == LossKind::l2) return 2.0 * residual;
  return residual > 0.0 ? 1.0 : (residual < 0.0 ? -1.0 : 0.0);
}

double residual_loss(double residual, LossKind kind) {
  return kind == LossKind::l2 ? residual * residual : std::abs(residual);
}

// Gradient w.r.t. the screen-space parameters of one splat.
struct SplatGrad {
  Vec2 mean = Vec2::Zero();
  double conic_a = 0.0, conic_b = 0.0, conic_c = 0.0;  // b = off-diagonal (once)
  double opacity = 0.0;
  Rgb color = Rgb::Zero();

  SplatGrad& operator+=(const SplatGrad& o) {
    mean += o.mean;
    conic_a += o.conic_a;
    conic_b += o.conic_b;
    conic_c += o.conic_c;
    opacity += o.opacity;
    color += o.color;
    return *this;
  }
};

struct PixelHit {
  std::size_t list_pos;
  const Projected2D* splat;
  double alpha;
  double transmittance;
  double falloff;
  bool clamped;
};

}  // namespace

double masked_loss(const GaussianScene& scene, const PinholeCamera& cam, const Rgb& background,
                   const ImageBuffer& target, const ChangeMask& pixel_mask,
                   const RenderOptions& opts, LossKind kind) {
  check_dims(scene, cam, target, pixel_mask, nullptr);
  const auto frame = detail::build_frame(scene, cam, opts);
  std::vector<Rgb> accum(cam.pixel_count(), Rgb::Zero());
  std::vector<double> tile_loss(static_cast<std::size_t>(frame.tile_count()), 0.0);
  detail::composite_tiles(
      frame, opts,
      [&](int, int x, int y, std::size_t, const Projected2D& s, double alpha, double t, double,
          bool) { accum[static_cast<std::size_t>(y) * cam.width + x] += s.color * (alpha * t); },
      [&](int tile, int x, int y, double t_final) {
        const std::size_t p = static_cast<std::size_t>(y) * cam.width + x;
        if (!pixel_mask.get(p)) return;
        const Rgb c = accum[p] + background * t_final;
        for (int ch = 0; ch < 3; ++ch) {
          tile_loss[static_cast<std::size_t>(tile)] +=
              residual_loss(c[ch] - target.pixels[p * 3 + ch], kind);
        }
      });
  double loss = 0.0;
  for (double l : tile_loss) loss += l;
  return loss;
}

GradientResult render_gradients(const GaussianScene& scene, const PinholeCamera& cam,
                                const Rgb& background, const ImageBuffer& target,
                                const ChangeMask& pixel_mask, const std::vector<bool>& active,
                                const RenderOptions& opts, LossKind kind) {
  check_dims(scene, cam, target, pixel_mask, &active);
  const auto frame = detail::build_frame(scene, cam, opts);
  const auto tiles = static_cast<std::size_t>(frame.tile_count());

  std::vector<std::vector<SplatGrad>> tile_grads(tiles);
  std::vector<double> tile_loss(tiles, 0.0);
  for (std::size_t t = 0; t < tiles; ++t) tile_grads[t].resize(frame.tile_lists[t].size());

  // Per-tile scratch of the current pixel's hits; tiles never share a slot.
  std::vector<std::vector<PixelHit>> hits(tiles);

  detail::composite_tiles(
      frame, opts,
      [&](int tile, int x, int y, std::size_t pos, const Projected2D& s, double alpha, double t,
          double falloff, bool clamped) {
        if (!pixel_mask.get(x, y)) return;
        hits[static_cast<std::size_t>(tile)].push_back({pos, &s, alpha, t, falloff, clamped});
      },
      [&](int tile, int x, int y, double t_final) {
        auto& pixel_hits = hits[static_cast<std::size_t>(tile)];
        const std::size_t p = static_cast<std::size_t>(y) * cam.width + x;
        if (!pixel_mask.get(p)) return;

        Rgb color = background * t_final;
        for (const auto& h : pixel_hits) color += h.splat->color * (h.alpha * h.transmittance);
        Rgb d_color;
        for (int ch = 0; ch < 3; ++ch) {
          const double r = color[ch] - target.pixels[p * 3 + ch];
          tile_loss[static_cast<std::size_t>(tile)] += residual_loss(r, kind);
          d_color[ch] = residual_grad(r, kind);
        }

        auto& grads = tile_grads[static_cast<std::size_t>(tile)];
        const double px = x + 0.5;
        const double py = y + 0.5;
        Rgb behind = background * t_final;  // sum over later splats plus background
        for (auto it = pixel_hits.rbegin(); it != pixel_hits.rend(); ++it) {
          const PixelHit& h = *it;
          const Projected2D& s = *h.splat;
          SplatGrad& g = grads[h.list_pos];
          const double w = h.alpha * h.transmittance;
          g.color += d_color * w;
          const Rgb d_c_d_alpha = s.color * h.transmittance - behind / (1.0 - h.alpha);
          behind += s.color * w;
          if (h.clamped) continue;
          const double d_alpha = d_color.dot(d_c_d_alpha);
          g.opacity += d_alpha * h.falloff;
          // alpha = o * exp(power); d alpha / d power = alpha.
          const double d_power = d_alpha * h.alpha;
          const double dx = px - s.mean2d.x();
          const double dy = py - s.mean2d.y();
          const double a = s.conic(0, 0), b = s.conic(0, 1), c = s.conic(1, 1);
          g.mean.x() += d_power * (a * dx + b * dy);
          g.mean.y() += d_power * (b * dx + c * dy);
          g.conic_a += d_power * (-0.5 * dx * dx);
          g.conic_b += d_power * (-dx * dy);
          g.conic_c += d_power * (-0.5 * dy * dy);
        }
        pixel_hits.clear();
      });

  // Fixed-order reduction over tiles keeps results independent of threads.
  std::vector<SplatGrad> splat_grads(frame.splats.size());
  double loss = 0.0;
  for (std::size_t t = 0; t < tiles; ++t) {
    loss += tile_loss[t];
    const auto& list = frame.tile_lists[t];
    for (std::size_t k = 0; k < list.size(); ++k) splat_grads[list[k]] += tile_grads[t][k];
  }

  GradientResult result;
  result.loss = loss;
  result.grads.resize(scene.size());
  const Mat3 w = cam.rotation_matrix();
  for (std::size_t i = 0; i < frame.splats.size(); ++i) {
    const Projected2D& s = frame.splats[i];
    if (!active[s.gaussian_index]) continue;
    const SplatGrad& g = splat_grads[i];
    GaussianGradient& out = result.grads[s.gaussian_index];
    out.opacity = g.opacity;
    out.color = g.color;

    // conic = cov2d^-1  =>  dL/dcov = -conic * G * conic with G symmetric.
    Mat2 g_conic;
    g_conic << g.conic_a, 0.5 * g.conic_b, 0.5 * g.conic_b, g.conic_c;
    const Mat2 g_cov = -s.conic * g_conic * s.conic;

    const Vec3& t = s.cam_point;
    const double z = t.z(), z2 = z * z, z3 = z2 * z;
    Eigen::Matrix<double, 2, 3> j;
    j << cam.fx / z, 0.0, -cam.fx * t.x() / z2,  //
        0.0, cam.fy / z, -cam.fy * t.y() / z2;
    // cov2d = J M J^T  =>  dL/dJ = 2 G J M for symmetric G, M.
    const Eigen::Matrix<double, 2, 3> g_j = 2.0 * g_cov * j * s.cov_cam;

    Vec3 g_t = j.transpose() * g.mean;
    g_t.x() += g_j(0, 2) * (-cam.fx / z2);
    g_t.y() += g_j(1, 2) * (-cam.fy / z2);
    g_t.z() += g_j(0, 0) * (-cam.fx / z2) + g_j(0, 2) * (2.0 * cam.fx * t.x() / z3) +
               g_j(1, 1) * (-cam.fy / z2) + g_j(1, 2) * (2.0 * cam.fy * t.y() / z3);
    out.position = w.transpose() * g_t;
  }
  return result;
}

}  // namespace gscd
