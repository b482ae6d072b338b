#include "gscd/synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <random>
#include <set>
#include <sstream>

#include "gscd/diff3d.hpp"
#include "gscd/errors.hpp"
#include "gscd/image_io.hpp"
#include "gscd/scene_io.hpp"

namespace gscd {

namespace {

constexpr double kPlacementRadius = 1.3;
constexpr double kPlacementMargin = 0.05;
constexpr double kFloorGap = 0.05;
constexpr double kObjectOpacity = 0.98;
constexpr double kRoomOpacity = 0.99;

// Colors sit on 1/8 bin centers so the quantizing segmenter sees flat
// regions. Objects are bright and the room is dark, so object/background
// differences have a strong luminance component.
constexpr std::array<std::array<double, 3>, 8> kPalette{{
    {0.9375, 0.5625, 0.5625},
    {0.5625, 0.9375, 0.5625},
    {0.5625, 0.6875, 0.9375},
    {0.9375, 0.9375, 0.5625},
    {0.9375, 0.5625, 0.9375},
    {0.5625, 0.9375, 0.9375},
    {0.9375, 0.8125, 0.5625},
    {0.8125, 0.6875, 0.9375},
}};

std::uint64_t mix(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (salt + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

Rgb palette(std::size_t i) { return {kPalette[i][0], kPalette[i][1], kPalette[i][2]}; }

double room_height(const SceneSpec& spec) { return 1.2 * spec.room_extent; }

void add_slab_grid(std::vector<Gaussian3D>& out, int axis, double offset, double extent_u,
                   double u0, double extent_v, double v0, double spacing, const Rgb& color) {
  const int nu = std::max(1, static_cast<int>(std::round(extent_u / spacing)));
  const int nv = std::max(1, static_cast<int>(std::round(extent_v / spacing)));
  const double du = extent_u / nu, dv = extent_v / nv;
  const int ua = (axis + 1) % 3, va = (axis + 2) % 3;
  for (int i = 0; i < nu; ++i)
    for (int j = 0; j < nv; ++j) {
      Gaussian3D g;
      g.position[axis] = offset;
      g.position[ua] = u0 + (i + 0.5) * du;
      g.position[va] = v0 + (j + 0.5) * dv;
      g.scale[axis] = 0.01;
      g.scale[ua] = 0.6 * du;
      g.scale[va] = 0.6 * dv;
      g.opacity = kRoomOpacity;
      g.color = color;
      out.push_back(g);
    }
}

std::vector<Gaussian3D> build_room(const SceneSpec& spec) {
  const double e = spec.room_extent, h = room_height(spec), a = spec.room_spacing;
  std::vector<Gaussian3D> out;
  add_slab_grid(out, 2, 0.0, 2 * e, -e, 2 * e, -e, a, {0.1875, 0.1875, 0.1875});
  add_slab_grid(out, 2, h, 2 * e, -e, 2 * e, -e, a, {0.3125, 0.3125, 0.3125});
  // Axis 0 walls span (y, z); axis 1 walls span (z, x).
  add_slab_grid(out, 0, e, 2 * e, -e, h, 0.0, a, {0.1875, 0.1875, 0.3125});
  add_slab_grid(out, 0, -e, 2 * e, -e, h, 0.0, a, {0.3125, 0.1875, 0.1875});
  add_slab_grid(out, 1, e, h, 0.0, 2 * e, -e, a, {0.1875, 0.3125, 0.1875});
  add_slab_grid(out, 1, -e, h, 0.0, 2 * e, -e, a, {0.3125, 0.3125, 0.1875});
  return out;
}

constexpr double kShadeLow = 0.65;

// Surface splats of one object, flattened along the local normal.
std::vector<Gaussian3D> build_object(const ObjectRange& obj, int n) {
  std::vector<Gaussian3D> out;
  const Vec3& r = obj.radii;
  const auto emit = [&](const Vec3& local, const Vec3& normal, double sigma) {
    Gaussian3D g;
    g.position = obj.center + obj.orientation * local;
    g.rotation = (obj.orientation * Quat::FromTwoVectors(Vec3::UnitZ(), normal)).normalized();
    g.scale = Vec3(sigma, sigma, 0.2 * sigma);
    g.opacity = kObjectOpacity;
    // Albedo ramp along the long axis so rotations change in-silhouette appearance.
    const double t = 0.5 * (local.x() / r.x() + 1.0);
    g.color = obj.color * (kShadeLow + (1.0 - kShadeLow) * std::clamp(t, 0.0, 1.0));
    out.push_back(g);
  };
  if (obj.shape == ShapeKind::ellipsoid) {
    // Knud Thomsen's surface-area approximation.
    constexpr double p = 1.6075;
    const double area =
        4.0 * std::numbers::pi *
        std::pow((std::pow(r.x() * r.y(), p) + std::pow(r.x() * r.z(), p) + std::pow(r.y() * r.z(), p)) / 3.0,
                 1.0 / p);
    const double sigma = 0.75 * std::sqrt(area / n);
    const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
    for (int j = 0; j < n; ++j) {
      const double z = 1.0 - 2.0 * (j + 0.5) / n;
      const double rad = std::sqrt(std::max(0.0, 1.0 - z * z));
      const Vec3 u(rad * std::cos(golden * j), rad * std::sin(golden * j), z);
      emit(r.cwiseProduct(u), u.cwiseQuotient(r).normalized(), sigma);
    }
  } else {
    const std::array<double, 3> face_area{4 * r.y() * r.z(), 4 * r.x() * r.z(), 4 * r.x() * r.y()};
    const double total = 2 * (face_area[0] + face_area[1] + face_area[2]);
    const double spacing = std::sqrt(total / n);
    for (int axis = 0; axis < 3; ++axis) {
      const int ua = (axis + 1) % 3, va = (axis + 2) % 3;
      const int nu = std::max(1, static_cast<int>(std::round(2 * r[ua] / spacing)));
      const int nv = std::max(1, static_cast<int>(std::round(2 * r[va] / spacing)));
      for (int side : {-1, 1}) {
        for (int i = 0; i < nu; ++i)
          for (int j = 0; j < nv; ++j) {
            Vec3 local;
            local[axis] = side * r[axis];
            local[ua] = -r[ua] + (i + 0.5) * 2 * r[ua] / nu;
            local[va] = -r[va] + (j + 0.5) * 2 * r[va] / nv;
            Vec3 normal = Vec3::Zero();
            normal[axis] = side;
            emit(local, normal, 0.75 * spacing);
          }
      }
    }
  }
  return out;
}

ObjectRange random_shape(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  ObjectRange o;
  o.shape = u(rng) < 0.5 ? ShapeKind::ellipsoid : ShapeKind::box;
  // Elongated in x so rotations about the vertical axis change the silhouette.
  o.radii = Vec3(0.25 + 0.10 * u(rng), 0.10 + 0.05 * u(rng), 0.12 + 0.13 * u(rng));
  o.orientation = Quat(Eigen::AngleAxisd(2.0 * std::numbers::pi * u(rng), Vec3::UnitZ()));
  return o;
}

bool placement_ok(const ObjectRange& o, const std::vector<ObjectRange>& others) {
  if (o.center.head<2>().norm() > kPlacementRadius) return false;
  for (const auto& p : others) {
    if (p.object_id == o.object_id) continue;
    if ((p.center - o.center).norm() <= p.bounding_radius() + o.bounding_radius() + kPlacementMargin) {
      return false;
    }
  }
  return true;
}

ObjectRange inserted_shape(std::uint64_t script_seed, int object_id, const std::vector<ObjectRange>& existing) {
  std::mt19937_64 rng(mix(script_seed, 1000 + static_cast<std::uint64_t>(object_id)));
  ObjectRange o = random_shape(rng);
  o.object_id = object_id;
  std::array<std::size_t, 8> order{0, 1, 2, 3, 4, 5, 6, 7};
  std::shuffle(order.begin(), order.end(), rng);
  o.color = palette(order[0]);
  for (std::size_t c : order) {
    const bool used = std::any_of(existing.begin(), existing.end(),
                                  [&](const ObjectRange& e) { return e.color == palette(c); });
    if (!used) {
      o.color = palette(c);
      break;
    }
  }
  return o;
}

std::vector<MaskPair> empty_pairs(const CameraSet& cams) {
  std::vector<MaskPair> out;
  for (const auto& c : cams.cameras) out.push_back({ChangeMask(c.width, c.height), ChangeMask(c.width, c.height)});
  return out;
}

DiffSelection as_selection(const std::vector<GaussianIndex>& idx) {
  DiffSelection s;
  s.indices = idx;
  s.weights.assign(idx.size(), 1.0f);
  return s;
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

const ObjectRange* ObjectTable::find(int object_id) const {
  for (const auto& o : objects) {
    if (o.object_id == object_id) return &o;
  }
  return nullptr;
}

GeneratedScene generate_scene(const SceneSpec& spec) {
  if (spec.n_objects < 1) throw ContractError("generate_scene: n_objects must be >= 1");
  if (spec.n_objects > static_cast<int>(kPalette.size())) {
    throw ContractError("generate_scene: at most 8 objects are supported");
  }
  if (spec.gaussians_per_object < 6 || spec.room_extent <= kPlacementRadius + 0.5) {
    throw ContractError("generate_scene: scene spec out of range");
  }
  std::mt19937_64 rng(mix(spec.seed, 1));
  std::uniform_real_distribution<double> u(0.0, 1.0);
  GeneratedScene out;
  out.scene.gaussians = build_room(spec);
  out.table.room_begin = 0;
  out.table.room_end = static_cast<GaussianIndex>(out.scene.size());

  std::array<std::size_t, 8> colors{0, 1, 2, 3, 4, 5, 6, 7};
  std::shuffle(colors.begin(), colors.end(), rng);
  for (int id = 0; id < spec.n_objects; ++id) {
    ObjectRange o = random_shape(rng);
    o.object_id = id;
    o.color = palette(colors[id]);
    bool placed = false;
    for (int attempt = 0; attempt < 1000 && !placed; ++attempt) {
      const double rad = kPlacementRadius * std::sqrt(u(rng));
      const double ang = 2.0 * std::numbers::pi * u(rng);
      o.center = Vec3(rad * std::cos(ang), rad * std::sin(ang), o.radii.z() + kFloorGap);
      placed = placement_ok(o, out.table.objects);
    }
    if (!placed) throw PlacementError("generate_scene: could not place object " + std::to_string(id));
    const auto gs = build_object(o, spec.gaussians_per_object);
    o.begin = static_cast<GaussianIndex>(out.scene.size());
    out.scene.gaussians.insert(out.scene.gaussians.end(), gs.begin(), gs.end());
    o.end = static_cast<GaussianIndex>(out.scene.size());
    out.table.objects.push_back(o);
  }
  return out;
}

GeneratedScene apply_changes(const GaussianScene& scene, const ObjectTable& table,
                             const ChangeScript& script, const SceneSpec& spec) {
  std::set<int> touched;
  for (const auto& op : script.ops) {
    if (!touched.insert(op.object_id).second) {
      throw ContractError("apply_changes: object " + std::to_string(op.object_id) + " has more than one op");
    }
    const bool exists = table.find(op.object_id) != nullptr;
    if (op.kind == ChangeKind::insert ? exists : !exists) {
      throw ContractError("apply_changes: op on object " + std::to_string(op.object_id) +
                          (exists ? " which already exists" : " which does not exist"));
    }
    if (op.kind == ChangeKind::rotate && op.vec.norm() < 1e-12) {
      throw ContractError("apply_changes: rotation axis is zero");
    }
  }
  const auto op_for = [&](int id) -> const ChangeOp* {
    for (const auto& op : script.ops) {
      if (op.object_id == id) return &op;
    }
    return nullptr;
  };

  GeneratedScene out;
  out.scene.gaussians.assign(scene.gaussians.begin() + table.room_begin,
                             scene.gaussians.begin() + table.room_end);
  out.table.room_begin = 0;
  out.table.room_end = static_cast<GaussianIndex>(out.scene.size());
  std::vector<int> moved;
  for (const auto& obj : table.objects) {
    const ChangeOp* op = op_for(obj.object_id);
    if (op && op->kind == ChangeKind::remove) continue;
    ObjectRange o = obj;
    std::vector<Gaussian3D> gs(scene.gaussians.begin() + obj.begin, scene.gaussians.begin() + obj.end);
    if (op && op->kind == ChangeKind::translate) {
      for (auto& g : gs) g.position += op->vec;
      o.center += op->vec;
      moved.push_back(o.object_id);
    } else if (op && op->kind == ChangeKind::rotate) {
      const Quat q(Eigen::AngleAxisd(op->angle, op->vec.normalized()));
      Vec3 centroid = Vec3::Zero();
      for (const auto& g : gs) centroid += g.position;
      centroid /= static_cast<double>(gs.size());
      for (auto& g : gs) {
        g.position = centroid + q * (g.position - centroid);
        g.rotation = (q * g.rotation).normalized();
      }
      o.center = centroid + q * (o.center - centroid);
      o.orientation = (q * o.orientation).normalized();
      moved.push_back(o.object_id);
    }
    o.begin = static_cast<GaussianIndex>(out.scene.size());
    out.scene.gaussians.insert(out.scene.gaussians.end(), gs.begin(), gs.end());
    o.end = static_cast<GaussianIndex>(out.scene.size());
    out.table.objects.push_back(o);
  }
  for (const auto& op : script.ops) {
    if (op.kind != ChangeKind::insert) continue;
    ObjectRange o = inserted_shape(script.seed, op.object_id, out.table.objects);
    o.center = op.vec;
    const auto gs = build_object(o, spec.gaussians_per_object);
    o.begin = static_cast<GaussianIndex>(out.scene.size());
    out.scene.gaussians.insert(out.scene.gaussians.end(), gs.begin(), gs.end());
    o.end = static_cast<GaussianIndex>(out.scene.size());
    out.table.objects.push_back(o);
    moved.push_back(o.object_id);
  }
  for (int id : moved) {
    if (!placement_ok(*out.table.find(id), out.table.objects)) {
      throw PlacementError("apply_changes: object " + std::to_string(id) + " overlaps or leaves the placement area");
    }
  }
  return out;
}

ChangeScript make_change_script(const GeneratedScene& base, const SceneSpec& spec,
                                ChangeCategory category, int count, std::uint64_t seed) {
  if (category == ChangeCategory::none || count <= 0) return ChangeScript{{}, seed};
  int next_id = 0;
  for (const auto& o : base.table.objects) next_id = std::max(next_id, o.object_id + 1);
  for (int attempt = 0; attempt < 10; ++attempt) {
    ChangeScript script;
    script.seed = mix(seed, 100 + static_cast<std::uint64_t>(attempt));
    std::mt19937_64 rng(script.seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<ChangeKind> kinds;
    for (int i = 0; i < count; ++i) {
      switch (category) {
        case ChangeCategory::in_out: kinds.push_back(u(rng) < 0.5 ? ChangeKind::remove : ChangeKind::insert); break;
        case ChangeCategory::insert: kinds.push_back(ChangeKind::insert); break;
        case ChangeCategory::remove: kinds.push_back(ChangeKind::remove); break;
        case ChangeCategory::translation: kinds.push_back(ChangeKind::translate); break;
        case ChangeCategory::rotation: kinds.push_back(ChangeKind::rotate); break;
        default: kinds.push_back(static_cast<ChangeKind>(std::uniform_int_distribution<int>(0, 3)(rng)));
      }
    }
    const auto existing_ops = std::count_if(kinds.begin(), kinds.end(),
                                            [](ChangeKind k) { return k != ChangeKind::insert; });
    if (existing_ops > static_cast<long>(base.table.objects.size())) {
      throw ContractError("make_change_script: more ops than objects in the scene");
    }
    std::vector<int> ids;
    for (const auto& o : base.table.objects) ids.push_back(o.object_id);
    std::shuffle(ids.begin(), ids.end(), rng);
    std::size_t next_existing = 0;
    int inserted = 0;
    for (ChangeKind k : kinds) {
      ChangeOp op;
      op.kind = k;
      if (k == ChangeKind::insert) {
        op.object_id = next_id + inserted++;
        const ObjectRange shape = inserted_shape(script.seed, op.object_id, base.table.objects);
        const double rad = kPlacementRadius * std::sqrt(u(rng));
        const double ang = 2.0 * std::numbers::pi * u(rng);
        op.vec = Vec3(rad * std::cos(ang), rad * std::sin(ang), shape.radii.z() + kFloorGap);
      } else {
        op.object_id = ids[next_existing++];
        if (k == ChangeKind::translate) {
          const double ang = 2.0 * std::numbers::pi * u(rng);
          const double mag = 0.45 + 0.25 * u(rng);
          op.vec = Vec3(mag * std::cos(ang), mag * std::sin(ang), 0.0);
        } else if (k == ChangeKind::rotate) {
          op.vec = Vec3::UnitZ();
          const double mag = (40.0 + 40.0 * u(rng)) * std::numbers::pi / 180.0;
          op.angle = u(rng) < 0.5 ? -mag : mag;
        }
      }
      script.ops.push_back(op);
    }
    try {
      apply_changes(base.scene, base.table, script, spec);
      return script;
    } catch (const PlacementError&) {
    }
  }
  throw PlacementError("make_change_script: no valid placement after 10 seeds");
}

Trajectories make_trajectories(const TrajectorySpec& spec) {
  if (spec.n_pre < 4 * spec.n_post) throw ContractError("make_trajectories: need n_pre >= 4 n_post");
  if (spec.n_post < 1 || spec.n_test < 0 || spec.width < 1 || spec.height < 1) {
    throw ContractError("make_trajectories: invalid camera counts or size");
  }
  std::mt19937_64 rng(mix(spec.seed, 2));
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double two_pi = 2.0 * std::numbers::pi;
  const Vec3 up = Vec3::UnitZ();
  Trajectories t;
  t.pre.role = CameraRole::pre;
  t.post.role = CameraRole::post;
  t.test.role = CameraRole::test;
  const auto look = [&](int id, const Vec3& eye, const Vec3& target) {
    return PinholeCamera::look_at(id, spec.width, spec.height, spec.fx, spec.fx, eye, target, up);
  };

  if (spec.style == TrajectoryStyle::orbit) {
    const auto ring = [&](CameraSet& set, int n, int id0, double phase, double radius,
                          const std::array<double, 2>& heights) {
      for (int i = 0; i < n; ++i) {
        const double a = phase + two_pi * i / n;
        const Vec3 eye(radius * std::cos(a), radius * std::sin(a), heights[i % 2]);
        set.cameras.push_back(look(id0 + i, eye, spec.centroid));
      }
    };
    ring(t.pre, spec.n_pre, 0, two_pi * u(rng), spec.orbit_radius,
         {spec.orbit_height, spec.orbit_height - 0.3});
    ring(t.post, spec.n_post, 1000, two_pi * u(rng), spec.orbit_radius,
         {spec.orbit_height, spec.orbit_height});
    ring(t.test, spec.n_test, 2000, two_pi * u(rng), 0.9 * spec.orbit_radius,
         {spec.orbit_height - 0.2, spec.orbit_height - 0.2});
    return t;
  }

  // Walkthrough: a random loop of waypoints on an annulus around the
  // centroid, smoothed by Chaikin corner cutting and resampled by arc length.
  const double r_lo = 1.6, r_hi = std::max(r_lo + 0.1, 0.85 * spec.room_extent);
  const int n_way = 7;
  std::vector<Vec3> path;
  for (int i = 0; i < n_way; ++i) {
    const double a = two_pi * (i + 0.6 * u(rng)) / n_way;
    const double r = r_lo + (r_hi - r_lo) * u(rng);
    path.emplace_back(r * std::cos(a), r * std::sin(a), spec.orbit_height - 0.3 + 0.4 * u(rng));
  }
  for (int it = 0; it < 3; ++it) {
    std::vector<Vec3> next;
    for (std::size_t i = 0; i < path.size(); ++i) {
      const Vec3& p = path[i];
      const Vec3& q = path[(i + 1) % path.size()];
      next.push_back(0.75 * p + 0.25 * q);
      next.push_back(0.25 * p + 0.75 * q);
    }
    path.swap(next);
  }
  std::vector<double> cum{0.0};
  for (std::size_t i = 0; i < path.size(); ++i) {
    cum.push_back(cum.back() + (path[(i + 1) % path.size()] - path[i]).norm());
  }
  const auto at = [&](double s) {
    s = std::fmod(s, cum.back());
    const auto it = std::upper_bound(cum.begin(), cum.end(), s);
    const std::size_t i = static_cast<std::size_t>(it - cum.begin()) - 1;
    const double f = (s - cum[i]) / std::max(1e-12, cum[i + 1] - cum[i]);
    return Vec3((1 - f) * path[i] + f * path[(i + 1) % path.size()]);
  };
  const auto walk = [&](CameraSet& set, int n, int id0, double offset) {
    for (int i = 0; i < n; ++i) {
      const double s = cum.back() * (offset + static_cast<double>(i) / n);
      const Vec3 eye = at(s);
      const Vec3 ahead = (at(s + 0.05 * cum.back()) - eye).normalized();
      const Vec3 to_center = (spec.centroid - eye).normalized();
      // Look-ahead blended toward the centroid until the centroid is framed.
      PinholeCamera cam = look(id0 + i, eye, spec.centroid);
      for (double w = 0.5; w > 0.0; w -= 0.1) {
        const Vec3 dir = ((1 - w) * to_center + w * ahead).normalized();
        PinholeCamera c = look(id0 + i, eye, eye + dir);
        const auto px = c.project(spec.centroid);
        if (px && px->x() >= 0.15 * spec.width && px->x() <= 0.85 * spec.width &&
            px->y() >= 0.15 * spec.height && px->y() <= 0.85 * spec.height) {
          cam = c;
          break;
        }
      }
      set.cameras.push_back(cam);
    }
  };
  walk(t.pre, spec.n_pre, 0, 0.0);
  walk(t.post, spec.n_post, 1000, u(rng));
  walk(t.test, spec.n_test, 2000, u(rng));
  return t;
}

std::vector<GaussianIndex> object_indices(const ObjectTable& table, const std::vector<int>& ids) {
  std::vector<GaussianIndex> out;
  for (const auto& o : table.objects) {
    if (std::find(ids.begin(), ids.end(), o.object_id) == ids.end()) continue;
    for (GaussianIndex i = o.begin; i < o.end; ++i) out.push_back(i);
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<MaskPair> render_gt_masks(const GeneratedScene& pre, const GeneratedScene& post,
                                      const ChangeScript& script, const CameraSet& cams,
                                      const RenderOptions& opts) {
  std::vector<int> ids;
  for (const auto& op : script.ops) ids.push_back(op.object_id);
  const auto pre_sel = as_selection(object_indices(pre.table, ids));
  const auto post_sel = as_selection(object_indices(post.table, ids));
  auto out = empty_pairs(cams);
  for (std::size_t k = 0; k < cams.size(); ++k) {
    out[k].pre = project_selection(pre.scene, pre_sel, cams.cameras[k], 0.5, opts);
    out[k].post = project_selection(post.scene, post_sel, cams.cameras[k], 0.5, opts);
  }
  return out;
}

SynthBundle make_bundle(const BundleSpec& spec, const RenderOptions& opts) {
  SceneSpec scene_spec = spec.scene;
  scene_spec.seed = mix(spec.seed, 11);
  const GeneratedScene base = generate_scene(scene_spec);
  TrajectorySpec traj_spec = spec.trajectory;
  traj_spec.seed = mix(spec.seed, 13);
  traj_spec.room_extent = scene_spec.room_extent;
  const Trajectories traj = make_trajectories(traj_spec);

  SynthBundle b;
  bool visible = false;
  for (int attempt = 0; attempt < 10 && !visible; ++attempt) {
    b.script = make_change_script(base, scene_spec, spec.category, spec.n_changes,
                                  mix(spec.seed, 20 + static_cast<std::uint64_t>(attempt)));
    b.post = apply_changes(base.scene, base.table, b.script, scene_spec);
    visible = true;
    for (const auto& op : b.script.ops) {
      const bool in_pre = op.kind != ChangeKind::insert;
      const GeneratedScene& src = in_pre ? base : b.post;
      const auto sel = as_selection(object_indices(src.table, {op.object_id}));
      bool seen = false;
      for (const auto& cam : traj.post.cameras) {
        if (project_selection(src.scene, sel, cam, 0.5, opts).any()) {
          seen = true;
          break;
        }
      }
      visible = visible && seen;
    }
  }
  if (!visible) throw PlacementError("make_bundle: changes not visible from any post view after 10 seeds");

  // Everything downstream sees the f32 values a saved bundle would hold.
  const auto to_storage = [](GaussianScene& scene) { scene = decode_scene(encode_scene(scene)); };
  b.pre = base;
  to_storage(b.pre.scene);
  to_storage(b.post.scene);
  b.pre_cams = traj.pre;
  b.post_cams = traj.post;
  b.test_cams = traj.test;
  for (const auto& cam : b.post_cams.cameras) b.post_images.push_back(render(b.post.scene, cam, b.background, opts));
  for (const auto& cam : b.test_cams.cameras) b.test_images.push_back(render(b.post.scene, cam, b.background, opts));
  b.gt_post = render_gt_masks(b.pre, b.post, b.script, b.post_cams, opts);
  b.gt_test = render_gt_masks(b.pre, b.post, b.script, b.test_cams, opts);

  if (spec.jitter_position > 0.0 || spec.jitter_opacity > 0.0) {
    std::mt19937_64 rng(mix(spec.seed, 14));
    std::normal_distribution<double> n01(0.0, 1.0);
    for (auto& g : b.pre.scene.gaussians) {
      for (int c = 0; c < 3; ++c) g.position[c] += spec.jitter_position * n01(rng);
      g.opacity = std::clamp(g.opacity + spec.jitter_opacity * n01(rng), 0.05, 1.0);
    }
    to_storage(b.pre.scene);
  }
  return b;
}

std::string format_script(const ChangeScript& script) {
  std::ostringstream os;
  os << "seed " << script.seed << "\n";
  for (const auto& op : script.ops) {
    os << to_string(op.kind) << " " << op.object_id;
    if (op.kind != ChangeKind::remove) {
      os << " " << fmt(op.vec.x()) << " " << fmt(op.vec.y()) << " " << fmt(op.vec.z());
    }
    if (op.kind == ChangeKind::rotate) os << " " << fmt(op.angle);
    os << "\n";
  }
  return os.str();
}

ChangeScript parse_script(const std::string& text) {
  ChangeScript s;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  bool have_seed = false;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    std::istringstream ls(line);
    std::string word;
    if (!(ls >> word)) continue;
    if (word == "seed") {
      if (!(ls >> s.seed)) throw ParseError("bad seed", line_no);
      have_seed = true;
      continue;
    }
    ChangeOp op;
    if (word == "remove") op.kind = ChangeKind::remove;
    else if (word == "insert") op.kind = ChangeKind::insert;
    else if (word == "translate") op.kind = ChangeKind::translate;
    else if (word == "rotate") op.kind = ChangeKind::rotate;
    else throw ParseError("unknown op '" + word + "'", line_no);
    if (!(ls >> op.object_id)) throw ParseError("missing object id", line_no);
    if (op.kind != ChangeKind::remove && !(ls >> op.vec.x() >> op.vec.y() >> op.vec.z())) {
      throw ParseError("expected three numbers", line_no);
    }
    if (op.kind == ChangeKind::rotate && !(ls >> op.angle)) throw ParseError("missing angle", line_no);
    std::string extra;
    if (ls >> extra) throw ParseError("trailing token '" + extra + "'", line_no);
    s.ops.push_back(op);
  }
  if (!have_seed) throw ParseError("missing seed line", 1);
  return s;
}

namespace {

std::string format_table(const std::string& tag, const ObjectTable& t) {
  std::ostringstream os;
  os << tag << " room " << t.room_begin << " " << t.room_end << "\n";
  for (const auto& o : t.objects) {
    os << tag << " object " << o.object_id << " " << o.begin << " " << o.end << " "
       << (o.shape == ShapeKind::ellipsoid ? "ellipsoid" : "box");
    for (double v : {o.center.x(), o.center.y(), o.center.z(), o.radii.x(), o.radii.y(), o.radii.z(),
                     o.orientation.w(), o.orientation.x(), o.orientation.y(), o.orientation.z(),
                     o.color.x(), o.color.y(), o.color.z()}) {
      os << " " << fmt(v);
    }
    os << "\n";
  }
  return os.str();
}

void parse_tables(const std::string& text, ObjectTable& pre, ObjectTable& post) {
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ls(line);
    std::string tag, kind;
    if (!(ls >> tag)) continue;
    if (tag != "pre" && tag != "post") throw ParseError("unknown table '" + tag + "'", line_no);
    ObjectTable& t = tag == "pre" ? pre : post;
    ls >> kind;
    if (kind == "room") {
      if (!(ls >> t.room_begin >> t.room_end)) throw ParseError("bad room range", line_no);
    } else if (kind == "object") {
      ObjectRange o;
      std::string shape;
      double qw, qx, qy, qz;
      if (!(ls >> o.object_id >> o.begin >> o.end >> shape >> o.center.x() >> o.center.y() >>
            o.center.z() >> o.radii.x() >> o.radii.y() >> o.radii.z() >> qw >> qx >> qy >> qz >>
            o.color.x() >> o.color.y() >> o.color.z())) {
        throw ParseError("bad object row", line_no);
      }
      o.shape = shape == "box" ? ShapeKind::box : ShapeKind::ellipsoid;
      o.orientation = Quat(qw, qx, qy, qz);
      t.objects.push_back(o);
    } else {
      throw ParseError("unknown row kind '" + kind + "'", line_no);
    }
  }
}

std::string read_text(const std::filesystem::path& p) {
  std::ifstream in(p);
  if (!in) throw IoError("cannot open: " + p.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_text(const std::filesystem::path& p, const std::string& s) {
  std::ofstream out(p);
  if (!out) throw IoError("cannot open for writing: " + p.string());
  out << s;
}

std::string view_name(const std::string& prefix, int id) { return prefix + "_" + std::to_string(id); }

}  // namespace

void write_bundle(const SynthBundle& b, const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir / "images");
  fs::create_directories(dir / "gt");
  save_scene(b.pre.scene, dir / "pre.gscn");
  save_scene(b.post.scene, dir / "post.gscn");
  save_cameras(b.pre_cams, dir / "cams_pre.txt");
  save_cameras(b.post_cams, dir / "cams_post.txt");
  save_cameras(b.test_cams, dir / "cams_test.txt");
  write_text(dir / "script.txt", format_script(b.script));
  write_text(dir / "tables.txt", format_table("pre", b.pre.table) + format_table("post", b.post.table));
  const auto emit = [&](const std::string& prefix, const CameraSet& cams,
                        const std::vector<ImageBuffer>& imgs, const std::vector<MaskPair>& gt) {
    for (std::size_t k = 0; k < cams.size(); ++k) {
      const std::string name = view_name(prefix, cams.cameras[k].id);
      write_fimg(imgs[k], dir / "images" / (name + ".fimg"));
      write_png(imgs[k], dir / "images" / (name + ".png"));
      write_pgm(gt[k].pre, dir / "gt" / (name + "_pre.pgm"));
      write_pgm(gt[k].post, dir / "gt" / (name + "_post.pgm"));
    }
  };
  emit("post", b.post_cams, b.post_images, b.gt_post);
  emit("test", b.test_cams, b.test_images, b.gt_test);
}

SynthBundle load_bundle(const std::filesystem::path& dir) {
  SynthBundle b;
  b.pre.scene = load_scene(dir / "pre.gscn");
  b.post.scene = load_scene(dir / "post.gscn");
  b.pre_cams = load_cameras(dir / "cams_pre.txt", CameraRole::pre);
  b.post_cams = load_cameras(dir / "cams_post.txt", CameraRole::post);
  b.test_cams = load_cameras(dir / "cams_test.txt", CameraRole::test);
  b.script = parse_script(read_text(dir / "script.txt"));
  if (std::filesystem::exists(dir / "tables.txt")) {
    parse_tables(read_text(dir / "tables.txt"), b.pre.table, b.post.table);
  }
  const auto ingest = [&](const std::string& prefix, const CameraSet& cams,
                          std::vector<ImageBuffer>& imgs, std::vector<MaskPair>& gt) {
    for (const auto& cam : cams.cameras) {
      const std::string name = view_name(prefix, cam.id);
      const auto fimg = dir / "images" / (name + ".fimg");
      imgs.push_back(read_image(std::filesystem::exists(fimg) ? fimg : dir / "images" / (name + ".png")));
      MaskPair m{ChangeMask(cam.width, cam.height), ChangeMask(cam.width, cam.height)};
      const auto pre_path = dir / "gt" / (name + "_pre.pgm");
      const auto post_path = dir / "gt" / (name + "_post.pgm");
      if (std::filesystem::exists(pre_path)) m.pre = read_pgm(pre_path);
      if (std::filesystem::exists(post_path)) m.post = read_pgm(post_path);
      if (!m.pre.same_size(imgs.back()) || !m.post.same_size(imgs.back())) {
        throw ContractError("load_bundle: " + name + " masks do not match the image");
      }
      gt.push_back(std::move(m));
    }
  };
  ingest("post", b.post_cams, b.post_images, b.gt_post);
  ingest("test", b.test_cams, b.test_images, b.gt_test);
  return b;
}

std::string to_string(ChangeCategory c) {
  switch (c) {
    case ChangeCategory::none: return "none";
    case ChangeCategory::in_out: return "in_out";
    case ChangeCategory::insert: return "insert";
    case ChangeCategory::remove: return "remove";
    case ChangeCategory::translation: return "translation";
    case ChangeCategory::rotation: return "rotation";
    case ChangeCategory::mixed: return "mixed";
  }
  return "?";
}

ChangeCategory parse_change_category(const std::string& s) {
  for (auto c : {ChangeCategory::none, ChangeCategory::in_out, ChangeCategory::insert,
                 ChangeCategory::remove, ChangeCategory::translation, ChangeCategory::rotation,
                 ChangeCategory::mixed}) {
    if (to_string(c) == s) return c;
  }
  throw ContractError("unknown change category '" + s + "'");
}

std::string to_string(ChangeKind k) {
  switch (k) {
    case ChangeKind::insert: return "insert";
    case ChangeKind::remove: return "remove";
    case ChangeKind::translate: return "translate";
    case ChangeKind::rotate: return "rotate";
  }
  return "?";
}

std::string to_string(TrajectoryStyle s) { return s == TrajectoryStyle::orbit ? "orbit" : "walkthrough"; }

TrajectoryStyle parse_trajectory_style(const std::string& s) {
  if (s == "orbit") return TrajectoryStyle::orbit;
  if (s == "walkthrough") return TrajectoryStyle::walkthrough;
  throw ContractError("unknown trajectory style '" + s + "'");
}

}  // namespace gscd
