#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "gscd/diff2d.hpp"
#include "gscd/diff3d.hpp"
#include "gscd/recon.hpp"
#include "gscd/renderer.hpp"
#include "gscd/segmentation.hpp"

namespace gscd {

struct PipelineConfig {
  // 2D differences
  FeatureKind feature_provider = FeatureKind::rgb;
  std::filesystem::path features_dir;  // external: view_<id>_ren.fmap, view_<id>_post.fmap
  ThresholdMode eps_mode = ThresholdMode::quantile;
  double eps_quantile = 0.25;
  double eps_scale = 1.0;
  double eps_floor = 0.05;
  double eps1 = 0.1;
  double eps2 = -0.1;
  std::size_t pca_samples = 65536;

  // Voting and pruning
  VoteMode vote_mode = VoteMode::visibility_aware;
  double tau = 0.5;
  double seen_epsilon = 1e-4;
  double weight_floor = 0.1;
  double recon_weight_floor = 0.02;  // removal and splice selections
  double contribution_threshold = 1e-5;
  double render_threshold = 0.5;

  // Segmentation validation
  bool validate = true;
  double min_iou = 0.3;
  std::filesystem::path proposals_dir;  // empty: built-in proposals
  double seg_blur = 1.0;
  double seg_edge = 0.08;
  int seg_min_area = 20;
  double seg_merge = 0.03;

  // Reconstruction
  OptimizerMethod optimizer = OptimizerMethod::gd;
  double step_size = 0.02;
  double position_step_scale = 1.0;
  int iterations = 300;
  int batch = 2;
  int seeds_per_view = 400;
  double seed_scale_px = 3.0;
  double seed_opacity = 0.5;
  double hull_fraction = 0.75;

  // Shared
  double bg_r = 0.0, bg_g = 0.0, bg_b = 0.0;
  int threads = 1;
  std::uint64_t seed = 0;

  Rgb background() const { return {bg_r, bg_g, bg_b}; }
  RenderOptions render_options() const;
  DiffThresholds thresholds() const;
  PruneConfig prune() const;
  SegmentParams segmentation() const;
  OptimizerConfig optimizer_config() const;
  SeedConfig seed_config() const;
};

struct ConfigKey {
  std::string name;
  std::string help;
  std::function<void(PipelineConfig&, const std::string&)> set;
  std::function<std::string(const PipelineConfig&)> get;
};

// Every PipelineConfig field, in documentation order.
const std::vector<ConfigKey>& config_keys();

// Throws ContractError for unknown keys or unparsable values.
void set_config_value(PipelineConfig& cfg, const std::string& key, const std::string& value);

// key = value lines; '#' starts a comment. Errors carry the line number.
PipelineConfig parse_config(const std::string& text, PipelineConfig base = {});
PipelineConfig load_config(const std::filesystem::path& path, PipelineConfig base = {});
std::string format_config(const PipelineConfig& cfg);

// Throws ContractError describing the first invalid field.
void validate_config(const PipelineConfig& cfg);

}  // namespace gscd
