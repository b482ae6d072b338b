#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace gscd {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat2 = Eigen::Matrix2d;
using Mat3 = Eigen::Matrix3d;
using Quat = Eigen::Quaterniond;
using Rgb = Eigen::Vector3d;

// One anisotropic Gaussian primitive. Parameters are kept in double precision
// in memory; the on-disk format is f32, so a load/save cycle is exact.
//
// scale holds linear standard deviations along the rotated principal axes,
// opacity is post-activation and color is flat RGB (no view dependence).
struct Gaussian3D {
  Vec3 position = Vec3::Zero();
  Vec3 scale = Vec3::Constant(0.01);
  Quat rotation = Quat::Identity();
  double opacity = 1.0;
  Rgb color = Rgb::Zero();

  // World-space covariance R S S^T R^T.
  Mat3 covariance() const;
};

using GaussianIndex = std::uint32_t;

struct GaussianScene {
  std::vector<Gaussian3D> gaussians;
  // Per-Gaussian change weight in [0,1]; same length as gaussians when set.
  std::optional<std::vector<float>> diff_channel;

  std::size_t size() const { return gaussians.size(); }
  bool empty() const { return gaussians.empty(); }
};

// Throws DataError when any invariant of the Gaussian is violated.
void validate_gaussian(const Gaussian3D& g, std::size_t index);

// Checks every Gaussian plus diff_channel length/range.
void validate_scene(const GaussianScene& scene);

// Number of bytes of one serialized Gaussian record.
inline constexpr std::size_t kGaussianRecordBytes = 14 * sizeof(float);

}  // namespace gscd
