#include "gscd/scene.hpp"

#include <cmath>
#include <string>

#include "gscd/errors.hpp"

namespace gscd {

Mat3 Gaussian3D::covariance() const {
  const Mat3 r = rotation.normalized().toRotationMatrix();
  const Mat3 s = scale.asDiagonal();
  return r * s * s.transpose() * r.transpose();
}

namespace {

bool all_finite(const Gaussian3D& g) {
  return g.position.allFinite() && g.scale.allFinite() &&
         g.rotation.coeffs().allFinite() && std::isfinite(g.opacity) &&
         g.color.allFinite();
}

[[noreturn]] void fail(std::size_t index, const std::string& what) {
  throw DataError("gaussian " + std::to_string(index) + ": " + what);
}

}  // namespace

void validate_gaussian(const Gaussian3D& g, std::size_t index) {
  if (!all_finite(g)) fail(index, "non-finite field");
  if ((g.scale.array() <= 0.0).any()) fail(index, "scale must be > 0");
  if (g.opacity < 0.0 || g.opacity > 1.0) fail(index, "opacity outside [0,1]");
  if ((g.color.array() < 0.0).any() || (g.color.array() > 1.0).any()) {
    fail(index, "color outside [0,1]");
  }
  if (std::abs(g.rotation.norm() - 1.0) > 1e-6) {
    fail(index, "rotation is not a unit quaternion");
  }
}

void validate_scene(const GaussianScene& scene) {
  for (std::size_t i = 0; i < scene.gaussians.size(); ++i) {
    validate_gaussian(scene.gaussians[i], i);
  }
  if (scene.diff_channel) {
    const auto& diff = *scene.diff_channel;
    if (diff.size() != scene.gaussians.size()) {
      throw DataError("diff channel length " + std::to_string(diff.size()) +
                      " does not match gaussian count " +
                      std::to_string(scene.gaussians.size()));
    }
    for (std::size_t i = 0; i < diff.size(); ++i) {
      if (!std::isfinite(diff[i]) || diff[i] < 0.0f || diff[i] > 1.0f) {
        fail(i, "diff weight outside [0,1]");
      }
    }
  }
}

}  // namespace gscd
