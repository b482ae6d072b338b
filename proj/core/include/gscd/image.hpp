#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "gscd/scene.hpp"

namespace gscd {

// Row-major RGB float image plus the per-pixel transmittance left after
// compositing (1 where nothing was drawn).
struct ImageBuffer {
  int width = 0;
  int height = 0;
  std::vector<float> pixels;               // width * height * 3
  std::vector<float> final_transmittance;  // width * height

  ImageBuffer() = default;
  ImageBuffer(int w, int h, const Rgb& fill = Rgb::Zero());

  std::size_t pixel_count() const { return static_cast<std::size_t>(width) * height; }
  float& at(int x, int y, int c) { return pixels[(static_cast<std::size_t>(y) * width + x) * 3 + c]; }
  float at(int x, int y, int c) const {
    return pixels[(static_cast<std::size_t>(y) * width + x) * 3 + c];
  }
  Rgb rgb(std::size_t pixel) const {
    return {pixels[pixel * 3], pixels[pixel * 3 + 1], pixels[pixel * 3 + 2]};
  }
  bool same_size(const ImageBuffer& o) const { return width == o.width && height == o.height; }
};

struct PixelRect {
  int x0 = 0, y0 = 0, x1 = 0, y1 = 0;  // half-open [x0, x1) x [y0, y1)
  bool empty() const { return x1 <= x0 || y1 <= y0; }
  std::size_t area() const { return empty() ? 0 : static_cast<std::size_t>(x1 - x0) * (y1 - y0); }
};

// Binary per-pixel mask; 1 = changed.
class ChangeMask {
 public:
  ChangeMask() = default;
  ChangeMask(int width, int height, bool fill = false)
      : width_(width), height_(height),
        bits_(static_cast<std::size_t>(width) * height, fill ? 1 : 0) {}

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t size() const { return bits_.size(); }
  bool get(std::size_t i) const { return bits_[i] != 0; }
  bool get(int x, int y) const { return bits_[static_cast<std::size_t>(y) * width_ + x] != 0; }
  void set(std::size_t i, bool v = true) { bits_[i] = v ? 1 : 0; }
  void set(int x, int y, bool v = true) { bits_[static_cast<std::size_t>(y) * width_ + x] = v ? 1 : 0; }
  const std::vector<std::uint8_t>& bits() const { return bits_; }

  std::size_t count() const;
  bool any() const { return count() > 0; }
  bool same_size(const ChangeMask& o) const { return width_ == o.width_ && height_ == o.height_; }
  bool same_size(const ImageBuffer& o) const { return width_ == o.width && height_ == o.height; }

  ChangeMask operator&(const ChangeMask& o) const;
  ChangeMask operator|(const ChangeMask& o) const;
  ChangeMask operator~() const;
  bool operator==(const ChangeMask& o) const = default;

  // Chebyshev (square) dilation by radius pixels.
  ChangeMask dilated(int radius) const;
  // Tight bounding box of set pixels; nullopt when empty.
  std::optional<PixelRect> bbox() const;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> bits_;
};

// Rec. 601 luminance of an RGB image, row-major.
std::vector<double> luminance(const ImageBuffer& img);

}  // namespace gscd
