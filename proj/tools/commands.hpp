#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "gscd/config.hpp"
#include "gscd/synth.hpp"

namespace gscd::cli {

inline constexpr int kExitStageError = 1;

struct Common {
  PipelineConfig cfg;
  std::filesystem::path out;
};

struct SynthArgs {
  std::string category = "translation";
  int changes = 1;
  int objects = 3;
  std::string style = "orbit";
  int n_pre = 64, n_post = 8, n_test = 8;
  double jitter_position = 0.0, jitter_opacity = 0.0;
};

struct SceneArgs {
  std::filesystem::path scene, cams, images;
};

struct MaskArgs {
  std::filesystem::path masks;
  std::string family = "m1";
  std::filesystem::path selection;
};

struct ValidateArgs {
  std::filesystem::path masks, cams, images;
  std::string suffix = "pre";
  bool save_proposals = false;
};

struct ReconstructArgs {
  SceneArgs in;
  std::filesystem::path detect;
};

struct EvalArgs {
  std::filesystem::path bundle, pred, scene;
  std::string views = "post";
};

struct PipelineArgs {
  std::filesystem::path bundle;
  bool no_recon = false;
  bool sweep = false;
  int sweep_seeds = 3;
};

int cmd_synth(const Common& c, const SynthArgs& a);
int cmd_render(const Common& c, const SceneArgs& a);
int cmd_features(const Common& c, const SceneArgs& a);
int cmd_diff2d(const Common& c, const SceneArgs& a);
int cmd_vote(const Common& c, const SceneArgs& s, const MaskArgs& m);
int cmd_prune(const Common& c, const SceneArgs& s, const MaskArgs& m);
int cmd_detect(const Common& c, const SceneArgs& a);
int cmd_validate(const Common& c, const ValidateArgs& a);
int cmd_reconstruct(const Common& c, const ReconstructArgs& a);
int cmd_eval(const Common& c, const EvalArgs& a);
int cmd_pipeline(const Common& c, const PipelineArgs& a);

}  // namespace gscd::cli
