#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "gscd/parallel.hpp"
#include "gscd/renderer.hpp"

namespace gscd::detail {

// Projected, depth-sorted splats plus per-tile candidate lists.
struct Frame {
  int width = 0;
  int height = 0;
  int tile = 16;
  int tiles_x = 0;
  int tiles_y = 0;
  std::vector<Projected2D> splats;
  std::vector<std::vector<std::uint32_t>> tile_lists;  // indices into splats, sorted

  int tile_count() const { return tiles_x * tiles_y; }
  PixelRect tile_rect(int t) const {
    const int tx = t % tiles_x;
    const int ty = t / tiles_x;
    return {tx * tile, ty * tile, std::min(width, (tx + 1) * tile),
            std::min(height, (ty + 1) * tile)};
  }
};

Frame build_frame(const GaussianScene& scene, const PinholeCamera& cam, const RenderOptions& opts);

// Falloff of a splat at pixel (x, y): returns G = exp(-0.5 d^T conic d).
inline double splat_falloff(const Projected2D& s, int x, int y) {
  const double dx = x + 0.5 - s.mean2d.x();
  const double dy = y + 0.5 - s.mean2d.y();
  const double power =
      -0.5 * (s.conic(0, 0) * dx * dx + 2.0 * s.conic(0, 1) * dx * dy + s.conic(1, 1) * dy * dy);
  return std::exp(power);
}

inline bool in_rect(const PixelRect& r, int x, int y) {
  return x >= r.x0 && x < r.x1 && y >= r.y0 && y < r.y1;
}

// Runs front-to-back compositing for every pixel of every tile.
// on_splat(tile, x, y, list_pos, splat, alpha, T_before, falloff, clamped)
// on_pixel(tile, x, y, T_final)
// Tiles run in parallel; each pixel belongs to exactly one tile, so callbacks
// for a given tile never race with another tile's.
template <class SplatFn, class PixelFn>
void composite_tiles(const Frame& frame, const RenderOptions& opts, SplatFn&& on_splat,
                     PixelFn&& on_pixel) {
  parallel_for(static_cast<std::size_t>(frame.tile_count()), opts.threads, [&](std::size_t t) {
    const int tile = static_cast<int>(t);
    const PixelRect rect = frame.tile_rect(tile);
    const auto& list = frame.tile_lists[t];
    for (int y = rect.y0; y < rect.y1; ++y) {
      for (int x = rect.x0; x < rect.x1; ++x) {
        double transmittance = 1.0;
        for (std::size_t k = 0; k < list.size(); ++k) {
          const Projected2D& s = frame.splats[list[k]];
          if (!in_rect(s.bbox, x, y)) continue;
          const double falloff = splat_falloff(s, x, y);
          const double raw = s.opacity * falloff;
          const bool clamped = raw > opts.alpha_max;
          const double alpha = clamped ? opts.alpha_max : raw;
          if (alpha < opts.alpha_min) continue;
          on_splat(tile, x, y, k, s, alpha, transmittance, falloff, clamped);
          transmittance *= 1.0 - alpha;
        }
        on_pixel(tile, x, y, transmittance);
      }
    }
  });
}

}  // namespace gscd::detail
