#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "gscd/scene.hpp"

namespace gscd {

// Pinhole camera with world-to-camera extrinsics. The camera looks down +z
// with x to the right and y down. Pixel (u, v) covers [u, u+1) x [v, v+1);
// its center sits at (u + 0.5, v + 0.5).
struct PinholeCamera {
  int id = 0;
  int width = 0;
  int height = 0;
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;
  Quat rotation = Quat::Identity();  // world -> camera
  Vec3 translation = Vec3::Zero();   // world -> camera

  Mat3 rotation_matrix() const { return rotation.toRotationMatrix(); }
  Vec3 to_camera(const Vec3& world) const { return rotation * world + translation; }
  Vec3 center() const { return -(rotation.conjugate() * translation); }
  // Image-plane projection of a camera-space point (z must be > 0).
  Vec2 project_camera(const Vec3& cam) const {
    return {fx * cam.x() / cam.z() + cx, fy * cam.y() / cam.z() + cy};
  }
  // nullopt when the point is at or behind the near plane.
  std::optional<Vec2> project(const Vec3& world, double near = 0.01) const;
  // World point on the ray through image position (x, y) at camera depth z.
  Vec3 unproject(const Vec2& pixel, double depth) const;
  bool contains(const Vec2& pixel) const {
    return pixel.x() >= 0.0 && pixel.y() >= 0.0 && pixel.x() < width && pixel.y() < height;
  }
  std::size_t pixel_count() const { return static_cast<std::size_t>(width) * height; }

  static PinholeCamera look_at(int id, int width, int height, double fx, double fy,
                               const Vec3& eye, const Vec3& target, const Vec3& up);
};

enum class CameraRole { pre, post, test };

struct CameraSet {
  std::vector<PinholeCamera> cameras;
  CameraRole role = CameraRole::post;

  std::size_t size() const { return cameras.size(); }
  const PinholeCamera& by_id(int id) const;
};

void validate_camera(const PinholeCamera& cam);

// Text format, one camera per line, '#' comments:
//   id width height fx fy cx cy qw qx qy qz tx ty tz
CameraSet load_cameras(const std::filesystem::path& path, CameraRole role = CameraRole::post);
CameraSet parse_cameras(const std::string& text, CameraRole role = CameraRole::post);
void save_cameras(const CameraSet& set, const std::filesystem::path& path);
std::string format_cameras(const CameraSet& set);

std::string to_string(CameraRole role);

}  // namespace gscd
