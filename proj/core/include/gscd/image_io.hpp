#pragma once

#include <filesystem>

#include "gscd/image.hpp"

namespace gscd {

// 8-bit RGB PNG. Values are clamped to [0,1] and rounded on write.
void write_png(const ImageBuffer& img, const std::filesystem::path& path);
ImageBuffer read_png(const std::filesystem::path& path);

// Raw float image: "FIMG", u32 height, u32 width, u32 channels (=3), f32 data.
void write_fimg(const ImageBuffer& img, const std::filesystem::path& path);
ImageBuffer read_fimg(const std::filesystem::path& path);

// Dispatches on extension (.png or .fimg).
ImageBuffer read_image(const std::filesystem::path& path);

// Binary PGM (P5, maxval 255): 0 = unchanged, 255 = changed. On read any
// non-zero value counts as changed.
void write_pgm(const ChangeMask& mask, const std::filesystem::path& path);
ChangeMask read_pgm(const std::filesystem::path& path);

}  // namespace gscd
