#include "fixtures.hpp"

#include <atomic>
#include <unistd.h>

namespace fixture {

std::filesystem::path temp_dir(const std::string& tag) {
  static std::atomic<int> counter{0};
  const auto dir = std::filesystem::temp_directory_path() /
                   ("gscd_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

gscd::BundleSpec bundle_spec(gscd::ChangeCategory category, std::uint64_t seed, int n_changes,
                             int n_objects) {
  gscd::BundleSpec s;
  s.category = category;
  s.n_changes = n_changes;
  s.scene.n_objects = n_objects;
  s.trajectory.style = gscd::TrajectoryStyle::orbit;
  s.trajectory.n_pre = 64;
  s.trajectory.n_post = 8;
  s.trajectory.n_test = 8;
  s.seed = seed;
  return s;
}

gscd::BundleSpec small_bundle_spec(gscd::ChangeCategory category, std::uint64_t seed) {
  gscd::BundleSpec s = bundle_spec(category, seed);
  s.trajectory.n_pre = 24;
  s.trajectory.n_post = 6;
  s.trajectory.n_test = 2;
  return s;
}

}  // namespace fixture
