#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "gscd/camera.hpp"
#include "gscd/image.hpp"
#include "gscd/renderer.hpp"
#include "gscd/scene.hpp"

namespace gscd {

// The synthetic world is z-up: a room box on [-E,E]^2 x [0,H] with objects
// resting slightly above the floor near the center.
struct SceneSpec {
  int n_objects = 3;
  double room_extent = 2.5;  // E; the ceiling sits at 1.2 E
  int gaussians_per_object = 300;
  double room_spacing = 0.25;  // grid step of the wall slabs
  std::uint64_t seed = 0;
};

enum class ShapeKind { ellipsoid, box };

struct ObjectRange {
  int object_id = 0;
  GaussianIndex begin = 0;  // [begin, end) in the owning scene
  GaussianIndex end = 0;
  ShapeKind shape = ShapeKind::ellipsoid;
  Vec3 center = Vec3::Zero();
  Vec3 radii = Vec3::Ones();
  Quat orientation = Quat::Identity();
  Rgb color = Rgb::Zero();

  double bounding_radius() const { return radii.maxCoeff(); }
  std::size_t count() const { return end - begin; }
};

struct ObjectTable {
  GaussianIndex room_begin = 0;
  GaussianIndex room_end = 0;
  std::vector<ObjectRange> objects;

  const ObjectRange* find(int object_id) const;
};

struct GeneratedScene {
  GaussianScene scene;
  ObjectTable table;
};

GeneratedScene generate_scene(const SceneSpec& spec);

enum class ChangeKind { insert, remove, translate, rotate };

struct ChangeOp {
  int object_id = 0;
  ChangeKind kind = ChangeKind::remove;
  Vec3 vec = Vec3::Zero();  // translate: delta; insert: center; rotate: axis
  double angle = 0.0;       // rotate only, radians
};

struct ChangeScript {
  std::vector<ChangeOp> ops;
  std::uint64_t seed = 0;
};

// Text: "seed <u64>" then one op per line:
//   remove <id> | insert <id> <x> <y> <z> | translate <id> <dx> <dy> <dz>
//   rotate <id> <ax> <ay> <az> <angle_rad>
std::string format_script(const ChangeScript& script);
ChangeScript parse_script(const std::string& text);

// Throws PlacementError when moved or inserted objects overlap others or
// leave the placement disk, ContractError when the script is invalid.
GeneratedScene apply_changes(const GaussianScene& scene, const ObjectTable& table,
                             const ChangeScript& script, const SceneSpec& spec);

enum class ChangeCategory { none, in_out, insert, remove, translation, rotation, mixed };

// Random script of `count` ops of the category; retries placement with up to
// 10 derived seeds before giving up with PlacementError.
ChangeScript make_change_script(const GeneratedScene& base, const SceneSpec& spec,
                                ChangeCategory category, int count, std::uint64_t seed);

enum class TrajectoryStyle { orbit, walkthrough };

struct TrajectorySpec {
  int n_pre = 64;
  int n_post = 8;
  int n_test = 8;
  TrajectoryStyle style = TrajectoryStyle::orbit;
  std::uint64_t seed = 0;
  int width = 128;
  int height = 96;
  double fx = 111.0;
  double orbit_radius = 2.2;
  double orbit_height = 1.4;
  Vec3 centroid = Vec3(0.0, 0.0, 0.35);
  double room_extent = 2.5;
};

struct Trajectories {
  CameraSet pre, post, test;
};

Trajectories make_trajectories(const TrajectorySpec& spec);

struct MaskPair {
  ChangeMask pre;   // changed objects seen in the pre scene
  ChangeMask post;  // changed objects seen in the post scene

  ChangeMask joint() const { return pre | post; }
};

// Object-membership silhouettes (visibility >= 0.5) of every object named by
// the script.
std::vector<MaskPair> render_gt_masks(const GeneratedScene& pre, const GeneratedScene& post,
                                      const ChangeScript& script, const CameraSet& cams,
                                      const RenderOptions& opts = {});

// Gaussians of the listed objects, as an ascending index list.
std::vector<GaussianIndex> object_indices(const ObjectTable& table, const std::vector<int>& ids);

struct BundleSpec {
  SceneSpec scene;
  TrajectorySpec trajectory;
  ChangeCategory category = ChangeCategory::translation;
  int n_changes = 1;
  double jitter_position = 0.0;  // std-dev added to pre-scene positions
  double jitter_opacity = 0.0;   // std-dev added to pre-scene opacities
  std::uint64_t seed = 0;
};

struct SynthBundle {
  GeneratedScene pre;   // the model handed to the detector (jittered if requested)
  GeneratedScene post;  // ground-truth post-change world
  ChangeScript script;
  CameraSet pre_cams, post_cams, test_cams;
  std::vector<ImageBuffer> post_images;  // rendered from the true post world
  std::vector<ImageBuffer> test_images;
  std::vector<MaskPair> gt_post;
  std::vector<MaskPair> gt_test;
  Rgb background = Rgb::Zero();
};

// Deterministic for a fixed spec. Derives scene, script and trajectory seeds
// from spec.seed and retries until every op is visible in a post view.
SynthBundle make_bundle(const BundleSpec& spec, const RenderOptions& opts = {});

// Layout: pre.gscn post.gscn cams_{pre,post,test}.txt script.txt tables.txt
// images/{post,test}_<id>.{fimg,png} gt/{post,test}_<id>_{pre,post}.pgm
void write_bundle(const SynthBundle& bundle, const std::filesystem::path& dir);
SynthBundle load_bundle(const std::filesystem::path& dir);

std::string to_string(ChangeCategory c);
ChangeCategory parse_change_category(const std::string& s);
std::string to_string(ChangeKind k);
std::string to_string(TrajectoryStyle s);
TrajectoryStyle parse_trajectory_style(const std::string& s);

}  // namespace gscd
