#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gscd/camera.hpp"
#include "gscd/diff3d.hpp"
#include "gscd/gradients.hpp"
#include "gscd/image.hpp"
#include "gscd/renderer.hpp"
#include "gscd/scene.hpp"

namespace gscd {

enum class OptimizerMethod { gd, adam };

struct OptimizerConfig {
  OptimizerMethod method = OptimizerMethod::gd;
  double step_size = 0.02;           // color and opacity
  double position_step_scale = 1.0;  // position step = step_size * scale (scene units)
  int iterations = 300;
  int batch = 2;                     // views per step
  double clip_norm = 1.0;            // per-Gaussian, per parameter group
  LossKind loss = LossKind::l2;
};

struct UpdatePlan {
  std::vector<ChangeMask> pre_masks;
  std::vector<ChangeMask> post_masks;
  DiffSelection remove_selection;
  OptimizerConfig optimizer;
};

struct RemovalResult {
  GaussianScene scene;
  std::vector<std::int64_t> old_to_new;  // -1 for removed Gaussians
  std::size_t n_removed = 0;
};

RemovalResult remove_selection(const GaussianScene& scene, const DiffSelection& selection);

struct SeedConfig {
  int count_per_view = 150;
  double scale_px = 1.5;         // isotropic std-dev in pixels at the sampled depth
  double opacity = 0.5;
  double near_depth = 0.1;       // closest sampled depth
  double far_depth = 20.0;       // used where no background was rendered
  int depth_candidates = 64;     // stratified disparity samples per seed
  double hull_fraction = 0.75;   // share of other views that must see the sample in-mask
  std::uint64_t seed = 0;
};

// Back-projects masked pixels at depths drawn uniformly in disparity between
// the camera and the rendered background. Candidates that other views see
// outside their masks are rejected in favor of consistent ones.
std::vector<Gaussian3D> seed_new_gaussians(const std::vector<ImageBuffer>& post_imgs,
                                           const std::vector<ChangeMask>& post_masks,
                                           const CameraSet& cameras,
                                           const std::vector<std::vector<double>>& background_depth,
                                           const SeedConfig& cfg);

struct OptimizeResult {
  GaussianScene scene;
  double initial_loss = 0.0;  // summed masked loss over all views
  double final_loss = 0.0;
  int steps = 0;
};

// Gradient descent on the masked photometric loss; Gaussians flagged in
// `frozen` are never written.
OptimizeResult masked_optimize(const GaussianScene& scene, const std::vector<bool>& frozen,
                               const std::vector<ImageBuffer>& post_imgs,
                               const std::vector<ChangeMask>& post_masks, const CameraSet& cameras,
                               const Rgb& background, const OptimizerConfig& cfg,
                               const RenderOptions& opts = {});

struct ViewPsnr {
  int view_id = 0;
  double in_before = 0.0;   // NaN when the mask is empty
  double in_after = 0.0;
  double out_before = 0.0;  // NaN when the mask covers everything
  double out_after = 0.0;
};

struct SpliceReport {
  std::size_t n_removed = 0;
  std::size_t n_added = 0;
  std::size_t n_frozen_touched = 0;
  bool empty_selection = false;
  std::vector<ViewPsnr> views;
};

std::string format_splice_report(const SpliceReport& report);

struct SpliceResult {
  GaussianScene g_post;
  SpliceReport report;
  std::vector<GaussianIndex> added;  // indices in g_post
};

// `intermediate` must start with the Gaussians of `removal.scene` in order;
// anything after them is a candidate for the changed region.
SpliceResult splice(const GaussianScene& pre_scene, const RemovalResult& removal,
                    const GaussianScene& intermediate, const CameraSet& cameras,
                    const std::vector<ChangeMask>& post_masks,
                    const std::vector<ImageBuffer>& post_imgs, const Rgb& background,
                    const PruneConfig& cfg, const RenderOptions& opts = {});

struct ReconConfig {
  SeedConfig seeds;
  PruneConfig splice_prune;
};

struct ReconstructionResult {
  SpliceResult splice;
  RemovalResult removal;
  std::vector<GaussianIndex> removed;  // indices into the pre scene
  OptimizeResult optimization;
  std::size_t n_seeds = 0;
};

ReconstructionResult reconstruct(const GaussianScene& pre_scene, const UpdatePlan& plan,
                                 const std::vector<ImageBuffer>& post_imgs,
                                 const CameraSet& cameras, const Rgb& background,
                                 const ReconConfig& cfg, const RenderOptions& opts = {});

// True when every parameter of a and b has the same bit pattern.
bool bitwise_equal(const Gaussian3D& a, const Gaussian3D& b);

std::string to_string(OptimizerMethod m);
OptimizerMethod parse_optimizer_method(const std::string& s);

}  // namespace gscd
