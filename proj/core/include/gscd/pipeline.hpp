#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "gscd/camera.hpp"
#include "gscd/config.hpp"
#include "gscd/diff2d.hpp"
#include "gscd/diff3d.hpp"
#include "gscd/metrics.hpp"
#include "gscd/recon.hpp"
#include "gscd/scene.hpp"
#include "gscd/segmentation.hpp"
#include "gscd/synth.hpp"

namespace gscd {

inline constexpr int kExitOk = 0;
inline constexpr int kExitAmbiguous = 2;
inline constexpr int kExitNoChange = 3;

struct FamilyResult {
  DiffSelection selected;  // weight >= weight_floor
  DiffSelection kept;      // after pruning
  RetentionStats stats;
  bool empty_vote = false;
};

struct DetectResult {
  std::vector<ImageBuffer> renders;  // pre scene at the post cameras
  std::vector<DirectionalMasks> directional;
  FamilyResult m1, m2;
  DirectionAssignment direction;
  std::vector<ChangeMask> pre_projected;  // pre-family selection before validation
  std::vector<ChangeMask> pre_masks;      // final, per post view
  std::vector<ChangeMask> post_masks;
  std::size_t validated_components = 0;
  std::size_t passthrough_components = 0;
  DiffSelection removal;  // pre-scene Gaussians under the final pre masks
  std::vector<std::string> warnings;

  int exit_code() const;
  std::vector<ChangeMask> joint_masks() const;
  const FamilyResult& family(MaskFamily f) const { return f == MaskFamily::m1 ? m1 : m2; }
};

// Features of one image under the configured provider; `which` is "ren" or
// "post" and picks the external file features_dir/view_<id>_<which>.fmap.
FeatureMap features_for(const PipelineConfig& cfg, const ImageBuffer& img, int view_id,
                        const std::string& which);

// Built-in proposals, or proposals_dir/view_<id>/ when configured.
SegmentationProposals proposals_for(const PipelineConfig& cfg, const ImageBuffer& img, int view_id);

// Directional masks of one view pair. Throws DegenerateAxisError when the
// features carry no variance.
DirectionalMasks view_difference(const PipelineConfig& cfg, const ImageBuffer& rendered,
                                 const ImageBuffer& post, int view_id);

// render -> 2D difference -> vote -> prune -> direction -> project -> validate.
DetectResult run_detect(const PipelineConfig& cfg, const GaussianScene& pre_scene,
                        const CameraSet& cams, const std::vector<ImageBuffer>& post_images);

// Replaces each 4-connected component of `mask` by its best proposal when
// one reaches min_iou; other components pass through unchanged.
ChangeMask validate_components(const ChangeMask& mask, const SegmentationProposals& proposals,
                               double min_iou, std::size_t* validated = nullptr,
                               std::size_t* passthrough = nullptr);

// masks/view_<id>_{pre,post}.pgm, diff2d/view_<id>_{m1,m2}.pgm,
// renders/view_<id>.fimg, selection_{m1,m2}.gdif, removal.gdif,
// retention_{m1,m2}.txt, detect_report.txt
void write_detect_outputs(const DetectResult& r, const CameraSet& cams,
                          const std::filesystem::path& out);
std::string format_detect_report(const DetectResult& r, const CameraSet& cams);

// Builds the reconstruction inputs from a detection.
UpdatePlan make_update_plan(const PipelineConfig& cfg, const DetectResult& d);
ReconConfig make_recon_config(const PipelineConfig& cfg);

// 2D-only change mask for every view (I_ren vs I_post).
std::vector<ChangeMask> baseline_masks(const PipelineConfig& cfg, const GaussianScene& pre_scene,
                                       const CameraSet& cams,
                                       const std::vector<ImageBuffer>& post_images,
                                       BaselineKind kind);

struct TestViewRecon {
  int view_id = 0;
  double psnr_full = 0.0;        // g_post vs ground truth
  double ssim_full = 0.0;
  double psnr_crop = 0.0;        // NaN without a change region
  double psnr_in_before = 0.0;   // g_pre vs ground truth inside the GT change region
  double psnr_in_after = 0.0;
  double psnr_out_locality = 0.0;  // g_pre vs g_post outside the change influence
};

struct E2EResult {
  DetectResult detect;
  ReconstructionResult recon;
  std::vector<DetectionMetrics> post_metrics;
  DetectionMetrics post_mean, post_pooled;
  std::vector<TestViewRecon> test_views;
  bool frozen_intact = false;
  double min_out_psnr = 0.0;   // +inf when every out-of-mask region is identical
  double mean_in_before = 0.0;  // over test views with a change region
  double mean_in_after = 0.0;
};

E2EResult run_pipeline_e2e(const PipelineConfig& cfg, const SynthBundle& bundle,
                           bool reconstruct_scene = true);
std::string format_e2e_report(const E2EResult& r);

// Pixels a Gaussian of `selection` can touch: the union of their 3-sigma
// footprints plus the projected membership mask.
ChangeMask influence_mask(const GaussianScene& scene, const std::vector<GaussianIndex>& selection,
                          const PinholeCamera& cam, const RenderOptions& opts);

struct SweepSpec {
  std::vector<ChangeCategory> categories{ChangeCategory::in_out, ChangeCategory::translation,
                                         ChangeCategory::rotation, ChangeCategory::mixed};
  std::vector<int> counts{1, 2, 4};
  int seeds = 3;
  std::uint64_t seed = 0;
  BundleSpec base;
};

struct SweepRow {
  ChangeCategory category = ChangeCategory::none;
  int count = 0;
  std::uint64_t seed = 0;
  int exit_code = 0;
  DetectionMetrics mean;
};

std::vector<SweepRow> run_sweep(const PipelineConfig& cfg, const SweepSpec& spec);
// Columns: category,count,seed,exit_code,precision,recall,f1,iou
std::string format_sweep_csv(const std::vector<SweepRow>& rows);
std::string format_sweep_matrix(const std::vector<SweepRow>& rows);

}  // namespace gscd
