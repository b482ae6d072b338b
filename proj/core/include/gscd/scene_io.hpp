#pragma once

#include <filesystem>
#include <vector>

#include "gscd/scene.hpp"

namespace gscd {

// GSCN v1: "GSCN", u32 version, u32 count, u32 flags (bit 0 = diff channel),
// count x [pos 3f, scale 3f, quat wxyz 4f, opacity f, color 3f],
// then count x f32 diff weights when flagged. Little-endian.
inline constexpr std::uint32_t kSceneVersion = 1;

GaussianScene load_scene(const std::filesystem::path& path);
void save_scene(const GaussianScene& scene, const std::filesystem::path& path);

// In-memory variants used by the file functions and by tests.
std::vector<char> encode_scene(const GaussianScene& scene);
GaussianScene decode_scene(std::vector<char> bytes, const std::string& name = "<memory>");

}  // namespace gscd
