#include "gscd/camera.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "gscd/errors.hpp"

namespace gscd {

std::optional<Vec2> PinholeCamera::project(const Vec3& world, double near) const {
  const Vec3 c = to_camera(world);
  if (c.z() <= near) return std::nullopt;
  return project_camera(c);
}

Vec3 PinholeCamera::unproject(const Vec2& pixel, double depth) const {
  const Vec3 cam((pixel.x() - cx) / fx * depth, (pixel.y() - cy) / fy * depth, depth);
  return rotation.conjugate() * (cam - translation);
}

PinholeCamera PinholeCamera::look_at(int id, int width, int height, double fx, double fy,
                                     const Vec3& eye, const Vec3& target, const Vec3& up) {
  const Vec3 forward = (target - eye).normalized();
  Vec3 right = forward.cross(up);
  if (right.norm() < 1e-9) right = forward.unitOrthogonal();
  right.normalize();
  const Vec3 down = forward.cross(right);
  // Rows of the world->camera rotation are the camera axes in world frame.
  Mat3 r;
  r.row(0) = right.transpose();
  r.row(1) = down.transpose();
  r.row(2) = forward.transpose();
  PinholeCamera cam;
  cam.id = id;
  cam.width = width;
  cam.height = height;
  cam.fx = fx;
  cam.fy = fy;
  cam.cx = 0.5 * width;
  cam.cy = 0.5 * height;
  cam.rotation = Quat(r).normalized();
  cam.translation = -(cam.rotation * eye);
  return cam;
}

const PinholeCamera& CameraSet::by_id(int id) const {
  for (const auto& c : cameras) {
    if (c.id == id) return c;
  }
  throw ContractError("no camera with id " + std::to_string(id));
}

void validate_camera(const PinholeCamera& c) {
  const auto bad = [&](const std::string& what) {
    throw DataError("camera " + std::to_string(c.id) + ": " + what);
  };
  if (c.width <= 0 || c.height <= 0) bad("non-positive image size");
  if (!std::isfinite(c.fx) || !std::isfinite(c.fy) || !std::isfinite(c.cx) ||
      !std::isfinite(c.cy) || !c.rotation.coeffs().allFinite() || !c.translation.allFinite()) {
    bad("non-finite field");
  }
  if (c.fx <= 0.0 || c.fy <= 0.0) bad("focal length must be > 0");
  if (c.cx < 0.0 || c.cx >= c.width || c.cy < 0.0 || c.cy >= c.height) {
    bad("principal point outside image");
  }
  if (std::abs(c.rotation.norm() - 1.0) > 1e-6) bad("rotation is not a unit quaternion");
}

std::string to_string(CameraRole role) {
  switch (role) {
    case CameraRole::pre: return "pre";
    case CameraRole::post: return "post";
    case CameraRole::test: return "test";
  }
  return "?";
}

CameraSet parse_cameras(const std::string& text, CameraRole role) {
  CameraSet set;
  set.role = role;
  std::set<int> ids;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream fields(line);
    PinholeCamera c;
    double qw, qx, qy, qz, tx, ty, tz;
    if (!(fields >> c.id >> c.width >> c.height >> c.fx >> c.fy >> c.cx >> c.cy >> qw >> qx >>
          qy >> qz >> tx >> ty >> tz)) {
      throw ParseError("expected 14 fields: id width height fx fy cx cy qw qx qy qz tx ty tz",
                       line_no);
    }
    std::string extra;
    if (fields >> extra) throw ParseError("unexpected trailing field '" + extra + "'", line_no);
    c.rotation = Quat(qw, qx, qy, qz);
    c.translation = Vec3(tx, ty, tz);
    const double drift = std::abs(c.rotation.norm() - 1.0);
    if (drift >= 1e-3) {
      throw DataError("line " + std::to_string(line_no) + ": quaternion is not normalized");
    }
    if (drift > 1e-6) c.rotation.normalize();
    try {
      validate_camera(c);
    } catch (const DataError& e) {
      throw DataError("line " + std::to_string(line_no) + ": " + e.what());
    }
    if (!ids.insert(c.id).second) {
      throw DataError("line " + std::to_string(line_no) + ": duplicate camera id " +
                      std::to_string(c.id));
    }
    set.cameras.push_back(c);
  }
  return set;
}

CameraSet load_cameras(const std::filesystem::path& path, CameraRole role) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open: " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_cameras(buffer.str(), role);
}

namespace {

// Shortest representation that parses back to the same double.
void append_number(std::string& out, double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  out.append(buf, res.ptr);
}

}  // namespace

std::string format_cameras(const CameraSet& set) {
  std::string out = "# " + to_string(set.role) +
                    " cameras: id width height fx fy cx cy qw qx qy qz tx ty tz\n";
  for (const auto& c : set.cameras) {
    out += std::to_string(c.id) + ' ' + std::to_string(c.width) + ' ' +
           std::to_string(c.height);
    for (double v : {c.fx, c.fy, c.cx, c.cy, c.rotation.w(), c.rotation.x(), c.rotation.y(),
                     c.rotation.z(), c.translation.x(), c.translation.y(), c.translation.z()}) {
      out += ' ';
      append_number(out, v);
    }
    out += '\n';
  }
  return out;
}

void save_cameras(const CameraSet& set, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out << format_cameras(set);
  if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace gscd
