#include "gscd/image.hpp"

#include <algorithm>
#include <numeric>

#include "gscd/errors.hpp"

namespace gscd {

ImageBuffer::ImageBuffer(int w, int h, const Rgb& fill)
    : width(w), height(h),
      pixels(static_cast<std::size_t>(w) * h * 3),
      final_transmittance(static_cast<std::size_t>(w) * h, 1.0f) {
  for (std::size_t i = 0; i < pixel_count(); ++i) {
    for (int c = 0; c < 3; ++c) pixels[i * 3 + c] = static_cast<float>(fill[c]);
  }
}

std::size_t ChangeMask::count() const {
  return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
}

ChangeMask ChangeMask::operator&(const ChangeMask& o) const {
  if (!same_size(o)) throw ContractError("mask size mismatch");
  ChangeMask r(width_, height_);
  for (std::size_t i = 0; i < bits_.size(); ++i) r.bits_[i] = bits_[i] & o.bits_[i];
  return r;
}

ChangeMask ChangeMask::operator|(const ChangeMask& o) const {
  if (!same_size(o)) throw ContractError("mask size mismatch");
  ChangeMask r(width_, height_);
  for (std::size_t i = 0; i < bits_.size(); ++i) r.bits_[i] = bits_[i] | o.bits_[i];
  return r;
}

ChangeMask ChangeMask::operator~() const {
  ChangeMask r(width_, height_);
  for (std::size_t i = 0; i < bits_.size(); ++i) r.bits_[i] = bits_[i] ? 0 : 1;
  return r;
}

ChangeMask ChangeMask::dilated(int radius) const {
  if (radius <= 0) return *this;
  // Separable max filter: rows then columns.
  ChangeMask rows(width_, height_);
  for (int y = 0; y < height_; ++y) {
    for (int x = 0; x < width_; ++x) {
      if (!get(x, y)) continue;
      const int a = std::max(0, x - radius);
      const int b = std::min(width_ - 1, x + radius);
      for (int k = a; k <= b; ++k) rows.set(k, y);
    }
  }
  ChangeMask out(width_, height_);
  for (int y = 0; y < height_; ++y) {
    for (int x = 0; x < width_; ++x) {
      if (!rows.get(x, y)) continue;
      const int a = std::max(0, y - radius);
      const int b = std::min(height_ - 1, y + radius);
      for (int k = a; k <= b; ++k) out.set(x, k);
    }
  }
  return out;
}

std::optional<PixelRect> ChangeMask::bbox() const {
  PixelRect r{width_, height_, 0, 0};
  bool found = false;
  for (int y = 0; y < height_; ++y) {
    for (int x = 0; x < width_; ++x) {
      if (!get(x, y)) continue;
      found = true;
      r.x0 = std::min(r.x0, x);
      r.y0 = std::min(r.y0, y);
      r.x1 = std::max(r.x1, x + 1);
      r.y1 = std::max(r.y1, y + 1);
    }
  }
  if (!found) return std::nullopt;
  return r;
}

std::vector<double> luminance(const ImageBuffer& img) {
  std::vector<double> out(img.pixel_count());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = 0.299 * img.pixels[i * 3] + 0.587 * img.pixels[i * 3 + 1] +
             0.114 * img.pixels[i * 3 + 2];
  }
  return out;
}

}  // namespace gscd
