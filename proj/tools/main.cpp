#include <functional>
#include <iostream>
#include <map>
#include <string>

#include "CLI11.hpp"
#include "commands.hpp"
#include "gscd/config.hpp"

namespace {

using namespace gscd;
using namespace gscd::cli;

// Options shared by every subcommand: --config, --out and one flag per
// configuration key.
struct CommonOptions {
  std::string config_path;
  std::string out;
  std::map<std::string, std::string> values;
  std::map<std::string, CLI::Option*> flags;

  void attach(CLI::App* sub) {
    sub->add_option("--config", config_path, "key = value configuration file");
    sub->add_option("--out", out, "output directory");
    for (const auto& key : config_keys()) {
      std::string names = "--" + key.name;
      if (key.name == "proposals_dir") names += ",--proposals";
      flags[key.name] = sub->add_option(names, values[key.name], key.help);
    }
  }

  Common resolve() const {
    Common c;
    if (!config_path.empty()) c.cfg = load_config(config_path);
    for (const auto& key : config_keys()) {
      if (flags.at(key.name)->count() > 0) set_config_value(c.cfg, key.name, values.at(key.name));
    }
    validate_config(c.cfg);
    c.out = out;
    return c;
  }
};

void scene_inputs(CLI::App* sub, SceneArgs& a, bool images) {
  sub->add_option("--scene", a.scene, "pre-change scene (.gscn)")->required();
  sub->add_option("--cams", a.cams, "camera file")->required();
  if (images) sub->add_option("--images", a.images, "directory of post-change view images")->required();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Gaussian-splat scene change detection and update"};
  app.require_subcommand(1);

  // One CommonOptions per subcommand; CLI11 keeps pointers into them.
  std::map<std::string, CommonOptions> common;
  std::map<std::string, std::function<int(const Common&)>> actions;
  const auto add = [&](const std::string& name, const std::string& help) {
    CLI::App* sub = app.add_subcommand(name, help);
    common[name].attach(sub);
    return sub;
  };

  SynthArgs synth;
  {
    auto* s = add("synth", "generate a synthetic change bundle");
    s->add_option("--category", synth.category, "none|in_out|insert|remove|translation|rotation|mixed");
    s->add_option("--changes", synth.changes, "number of changed objects");
    s->add_option("--objects", synth.objects, "objects in the base scene");
    s->add_option("--style", synth.style, "orbit|walkthrough");
    s->add_option("--n_pre", synth.n_pre);
    s->add_option("--n_post", synth.n_post);
    s->add_option("--n_test", synth.n_test);
    s->add_option("--jitter_position", synth.jitter_position, "std-dev added to pre positions");
    s->add_option("--jitter_opacity", synth.jitter_opacity, "std-dev added to pre opacities");
    actions["synth"] = [&](const Common& c) { return cmd_synth(c, synth); };
  }

  SceneArgs render_args, features_args, diff_args, detect_args;
  scene_inputs(add("render", "render a scene at every camera"), render_args, false);
  actions["render"] = [&](const Common& c) { return cmd_render(c, render_args); };
  scene_inputs(add("features", "write per-view feature maps (FMAP)"), features_args, true);
  actions["features"] = [&](const Common& c) { return cmd_features(c, features_args); };
  scene_inputs(add("diff2d", "directional 2D difference masks"), diff_args, true);
  actions["diff2d"] = [&](const Common& c) { return cmd_diff2d(c, diff_args); };

  SceneArgs vote_scene, prune_scene;
  MaskArgs vote_masks, prune_masks;
  {
    auto* s = add("vote", "multi-view weight voting for one mask family");
    scene_inputs(s, vote_scene, false);
    s->add_option("--masks", vote_masks.masks, "directory with view_<id>_<family>.pgm")->required();
    s->add_option("--family", vote_masks.family, "m1|m2");
    actions["vote"] = [&](const Common& c) { return cmd_vote(c, vote_scene, vote_masks); };
  }
  {
    auto* s = add("prune", "multi-view pruning of a selection");
    scene_inputs(s, prune_scene, false);
    s->add_option("--masks", prune_masks.masks, "directory with view_<id>_<family>.pgm")->required();
    s->add_option("--family", prune_masks.family, "m1|m2");
    s->add_option("--selection", prune_masks.selection, "GDIF selection from vote")->required();
    actions["prune"] = [&](const Common& c) { return cmd_prune(c, prune_scene, prune_masks); };
  }

  scene_inputs(add("detect", "full change detection"), detect_args, true);
  actions["detect"] = [&](const Common& c) { return cmd_detect(c, detect_args); };

  ValidateArgs validate_args;
  {
    auto* s = add("validate", "replace mask components by matching segment proposals");
    s->add_option("--masks", validate_args.masks, "directory with view_<id>_<suffix>.pgm")->required();
    s->add_option("--suffix", validate_args.suffix, "mask file suffix");
    s->add_option("--cams", validate_args.cams, "camera file")->required();
    s->add_option("--images", validate_args.images, "images the proposals are computed on")->required();
    s->add_flag("--save_proposals", validate_args.save_proposals, "also write proposals/view_<id>/mask_<k>.pgm");
    actions["validate"] = [&](const Common& c) { return cmd_validate(c, validate_args); };
  }

  ReconstructArgs recon_args;
  {
    auto* s = add("reconstruct", "update the scene inside the detected change masks");
    scene_inputs(s, recon_args.in, true);
    s->add_option("--detect", recon_args.detect, "output directory of detect")->required();
    actions["reconstruct"] = [&](const Common& c) { return cmd_reconstruct(c, recon_args); };
  }

  EvalArgs eval_args;
  {
    auto* s = add("eval", "detection and reconstruction metrics against a bundle");
    s->add_option("--bundle", eval_args.bundle, "synthetic bundle directory")->required();
    s->add_option("--pred", eval_args.pred, "detect output directory");
    s->add_option("--scene", eval_args.scene, "reconstructed scene to score on test views");
    s->add_option("--views", eval_args.views, "camera set the predicted masks belong to")
        ->check(CLI::IsMember({"post", "test"}));
    actions["eval"] = [&](const Common& c) { return cmd_eval(c, eval_args); };
  }

  PipelineArgs pipe_args;
  {
    auto* s = add("pipeline", "detect, reconstruct and evaluate a bundle, or run the sweep");
    s->add_option("--bundle", pipe_args.bundle, "synthetic bundle directory");
    s->add_flag("--no_recon", pipe_args.no_recon, "stop after detection");
    s->add_flag("--sweep", pipe_args.sweep, "change type x object count sweep");
    s->add_option("--sweep_seeds", pipe_args.sweep_seeds, "bundles per sweep cell");
    actions["pipeline"] = [&](const Common& c) { return cmd_pipeline(c, pipe_args); };
  }

  CLI11_PARSE(app, argc, argv);

  for (const auto& [name, action] : actions) {
    if (!app.got_subcommand(name)) continue;
    try {
      return action(common.at(name).resolve());
    } catch (const std::exception& e) {
      std::cerr << "gscd " << name << ": " << e.what() << "\n";
      return kExitStageError;
    }
  }
  return kExitStageError;
}
