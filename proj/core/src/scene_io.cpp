#include "gscd/scene_io.hpp"

#include <cmath>
#include <string>

#include "binary_io.hpp"
#include "gscd/errors.hpp"

namespace gscd {

namespace {

constexpr std::uint32_t kFlagDiffChannel = 1u;
// Quaternions within this drift are renormalized on load; larger is an error.
constexpr double kMaxQuaternionDrift = 1e-3;
constexpr double kQuaternionTolerance = 1e-6;

}  // namespace

std::vector<char> encode_scene(const GaussianScene& scene) {
  validate_scene(scene);
  detail::ByteWriter w;
  w.magic("GSCN");
  w.u32(kSceneVersion);
  w.u32(static_cast<std::uint32_t>(scene.gaussians.size()));
  w.u32(scene.diff_channel ? kFlagDiffChannel : 0u);
  for (const auto& g : scene.gaussians) {
    for (int k = 0; k < 3; ++k) w.f32(static_cast<float>(g.position[k]));
    for (int k = 0; k < 3; ++k) w.f32(static_cast<float>(g.scale[k]));
    w.f32(static_cast<float>(g.rotation.w()));
    w.f32(static_cast<float>(g.rotation.x()));
    w.f32(static_cast<float>(g.rotation.y()));
    w.f32(static_cast<float>(g.rotation.z()));
    w.f32(static_cast<float>(g.opacity));
    for (int k = 0; k < 3; ++k) w.f32(static_cast<float>(g.color[k]));
  }
  if (scene.diff_channel) w.f32s(*scene.diff_channel);
  return w.bytes();
}

GaussianScene decode_scene(std::vector<char> bytes, const std::string& name) {
  detail::ByteReader r(std::move(bytes), name);
  r.expect_magic("GSCN");
  const std::uint32_t version = r.u32();
  if (version != kSceneVersion) {
    throw FormatError(name + ": unsupported version " + std::to_string(version));
  }
  const std::uint32_t count = r.u32();
  const std::uint32_t flags = r.u32();
  if ((flags & ~kFlagDiffChannel) != 0u) {
    throw FormatError(name + ": unknown flag bits");
  }
  const bool has_diff = (flags & kFlagDiffChannel) != 0u;
  const std::size_t expected =
      static_cast<std::size_t>(count) * (kGaussianRecordBytes + (has_diff ? 4u : 0u));
  if (r.remaining() != expected) {
    throw FormatError(name + ": payload size does not match count");
  }

  GaussianScene scene;
  scene.gaussians.resize(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    float rec[14];
    r.f32s(rec);
    for (float v : rec) {
      if (!std::isfinite(v)) {
        throw DataError(name + ": gaussian " + std::to_string(i) + " has a non-finite field");
      }
    }
    Gaussian3D& g = scene.gaussians[i];
    g.position = Vec3(rec[0], rec[1], rec[2]);
    g.scale = Vec3(rec[3], rec[4], rec[5]);
    g.rotation = Quat(rec[6], rec[7], rec[8], rec[9]);
    g.opacity = rec[10];
    g.color = Rgb(rec[11], rec[12], rec[13]);
    const double drift = std::abs(g.rotation.norm() - 1.0);
    if (drift >= kMaxQuaternionDrift) {
      throw DataError(name + ": gaussian " + std::to_string(i) +
                      " quaternion norm drift " + std::to_string(drift));
    }
    if (drift > kQuaternionTolerance) g.rotation.normalize();
  }
  if (has_diff) {
    std::vector<float> diff(count);
    r.f32s(diff);
    scene.diff_channel = std::move(diff);
  }
  r.expect_end();
  validate_scene(scene);
  return scene;
}

GaussianScene load_scene(const std::filesystem::path& path) {
  return decode_scene(detail::read_file_bytes(path), path.string());
}

void save_scene(const GaussianScene& scene, const std::filesystem::path& path) {
  detail::write_file_bytes(path, encode_scene(scene));
}

}  // namespace gscd
