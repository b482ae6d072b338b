#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "gscd/synth.hpp"

namespace fixture {

// Fresh empty directory under the system temp dir.
std::filesystem::path temp_dir(const std::string& tag);

// Standard single-room bundle: orbit, 64 pre / 8 post / 8 test views.
gscd::BundleSpec bundle_spec(gscd::ChangeCategory category, std::uint64_t seed, int n_changes = 1,
                             int n_objects = 3);

// Smaller variant for unit tests.
gscd::BundleSpec small_bundle_spec(gscd::ChangeCategory category, std::uint64_t seed);

}  // namespace fixture
