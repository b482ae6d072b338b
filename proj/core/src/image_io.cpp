#include "gscd/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>

#include "binary_io.hpp"
#include "gscd/errors.hpp"

namespace gscd {

namespace {

std::uint8_t to_byte(float v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f));
}

}  // namespace

void write_png(const ImageBuffer& img, const std::filesystem::path& path) {
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(img.width);
  image.height = static_cast<png_uint_32>(img.height);
  image.format = PNG_FORMAT_RGB;
  std::vector<std::uint8_t> bytes(img.pixels.size());
  std::transform(img.pixels.begin(), img.pixels.end(), bytes.begin(), to_byte);
  if (png_image_write_to_file(&image, path.c_str(), 0, bytes.data(), 0, nullptr) == 0) {
    throw IoError("png write failed for " + path.string() + ": " + image.message);
  }
}

ImageBuffer read_png(const std::filesystem::path& path) {
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  if (png_image_begin_read_from_file(&image, path.c_str()) == 0) {
    throw FormatError("cannot read png " + path.string() + ": " + image.message);
  }
  image.format = PNG_FORMAT_RGB;
  std::vector<std::uint8_t> bytes(PNG_IMAGE_SIZE(image));
  if (png_image_finish_read(&image, nullptr, bytes.data(), 0, nullptr) == 0) {
    throw FormatError("cannot decode png " + path.string() + ": " + image.message);
  }
  ImageBuffer img(static_cast<int>(image.width), static_cast<int>(image.height));
  for (std::size_t i = 0; i < bytes.size(); ++i) img.pixels[i] = bytes[i] / 255.0f;
  std::fill(img.final_transmittance.begin(), img.final_transmittance.end(), 0.0f);
  return img;
}

void write_fimg(const ImageBuffer& img, const std::filesystem::path& path) {
  detail::ByteWriter w;
  w.magic("FIMG");
  w.u32(static_cast<std::uint32_t>(img.height));
  w.u32(static_cast<std::uint32_t>(img.width));
  w.u32(3);
  w.f32s(img.pixels);
  w.write_file(path);
}

ImageBuffer read_fimg(const std::filesystem::path& path) {
  auto r = detail::ByteReader::from_file(path);
  r.expect_magic("FIMG");
  const std::uint32_t h = r.u32();
  const std::uint32_t w = r.u32();
  const std::uint32_t c = r.u32();
  if (c != 3) throw FormatError(path.string() + ": FIMG must have 3 channels");
  if (r.remaining() != static_cast<std::size_t>(h) * w * 3 * sizeof(float)) {
    throw FormatError(path.string() + ": FIMG payload size mismatch");
  }
  ImageBuffer img(static_cast<int>(w), static_cast<int>(h));
  r.f32s(img.pixels);
  for (float v : img.pixels) {
    if (!std::isfinite(v)) throw DataError(path.string() + ": non-finite pixel");
  }
  std::fill(img.final_transmittance.begin(), img.final_transmittance.end(), 0.0f);
  return img;
}

ImageBuffer read_image(const std::filesystem::path& path) {
  const auto ext = path.extension().string();
  if (ext == ".fimg") return read_fimg(path);
  if (ext == ".png") return read_png(path);
  throw FormatError("unsupported image extension: " + path.string());
}

void write_pgm(const ChangeMask& mask, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out << "P5\n" << mask.width() << ' ' << mask.height() << "\n255\n";
  std::vector<char> bytes(mask.size());
  for (std::size_t i = 0; i < bytes.size(); ++i) {
    bytes[i] = mask.get(i) ? static_cast<char>(255) : 0;
  }
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed: " + path.string());
}

namespace {

// Reads the next header token, skipping whitespace and '#' comments.
std::string pgm_token(std::istream& in) {
  std::string tok;
  while (true) {
    const int ch = in.get();
    if (ch == EOF) break;
    if (ch == '#') {
      std::string skip;
      std::getline(in, skip);
      continue;
    }
    if (std::isspace(ch)) {
      if (!tok.empty()) break;
      continue;
    }
    tok.push_back(static_cast<char>(ch));
  }
  return tok;
}

}  // namespace

ChangeMask read_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open: " + path.string());
  if (pgm_token(in) != "P5") throw FormatError(path.string() + ": not a binary PGM (P5)");
  int w = 0, h = 0, maxval = 0;
  try {
    w = std::stoi(pgm_token(in));
    h = std::stoi(pgm_token(in));
    maxval = std::stoi(pgm_token(in));
  } catch (const std::exception&) {
    throw FormatError(path.string() + ": malformed PGM header");
  }
  if (w <= 0 || h <= 0 || maxval <= 0 || maxval > 255) {
    throw FormatError(path.string() + ": unsupported PGM dimensions or maxval");
  }
  std::vector<unsigned char> bytes(static_cast<std::size_t>(w) * h);
  in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (in.gcount() != static_cast<std::streamsize>(bytes.size())) {
    throw FormatError(path.string() + ": truncated PGM");
  }
  ChangeMask mask(w, h);
  for (std::size_t i = 0; i < bytes.size(); ++i) mask.set(i, bytes[i] != 0);
  return mask;
}

}  // namespace gscd
