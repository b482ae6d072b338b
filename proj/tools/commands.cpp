#include "commands.hpp"

#include <cstdio>
#include <fstream>
#include <iostream>
#include <limits>
#include <sstream>

#include "gscd/diff2d.hpp"
#include "gscd/diff3d.hpp"
#include "gscd/errors.hpp"
#include "gscd/image_io.hpp"
#include "gscd/metrics.hpp"
#include "gscd/parallel.hpp"
#include "gscd/pipeline.hpp"
#include "gscd/recon.hpp"
#include "gscd/renderer.hpp"
#include "gscd/scene_io.hpp"
#include "gscd/segmentation.hpp"

namespace gscd::cli {

namespace fs = std::filesystem;

namespace {

std::string view_name(int id, const std::string& suffix) {
  return "view_" + std::to_string(id) + suffix;
}

void write_text(const fs::path& p, const std::string& s) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + p.string());
  out << s;
}

fs::path require_out(const Common& c) {
  if (c.out.empty()) throw ContractError("--out is required");
  fs::create_directories(c.out);
  return c.out;
}

// First existing file among the usual names for a view image.
ImageBuffer load_view_image(const fs::path& dir, int id) {
  const std::string n = std::to_string(id);
  for (const char* stem : {"view_", "post_", "test_", ""}) {
    for (const char* ext : {".fimg", ".png"}) {
      const fs::path p = dir / (stem + n + ext);
      if (fs::exists(p)) return read_image(p);
    }
  }
  throw IoError("no image for view " + n + " in " + dir.string());
}

std::vector<ImageBuffer> load_view_images(const fs::path& dir, const CameraSet& cams) {
  std::vector<ImageBuffer> out;
  for (const auto& cam : cams.cameras) {
    out.push_back(load_view_image(dir, cam.id));
    if (out.back().width != cam.width || out.back().height != cam.height) {
      throw ContractError("image of view " + std::to_string(cam.id) + " does not match its camera");
    }
  }
  return out;
}

std::vector<ChangeMask> load_view_masks(const fs::path& dir, const CameraSet& cams,
                                        const std::string& suffix) {
  std::vector<ChangeMask> out;
  for (const auto& cam : cams.cameras) {
    out.push_back(read_pgm(dir / view_name(cam.id, "_" + suffix + ".pgm")));
    if (out.back().width() != cam.width || out.back().height() != cam.height) {
      throw ContractError("mask of view " + std::to_string(cam.id) + " does not match its camera");
    }
  }
  return out;
}

std::vector<ContributionRecord> contribution_records(const PipelineConfig& cfg,
                                                     const GaussianScene& scene,
                                                     const CameraSet& cams) {
  std::vector<ContributionRecord> records(cams.size());
  RenderOptions inner = cfg.render_options();
  inner.threads = 1;
  parallel_for(cams.size(), cfg.threads, [&](std::size_t k) {
    auto rec = render_with_contributions(scene, cams.cameras[k], cfg.background(),
                                         cfg.contribution_threshold, inner)
                   .second;
    rec.view_id = cams.cameras[k].id;
    records[k] = std::move(rec);
  });
  return records;
}

MaskFamily parse_family(const std::string& s) {
  if (s == "m1") return MaskFamily::m1;
  if (s == "m2") return MaskFamily::m2;
  throw ContractError("family must be m1 or m2, got '" + s + "'");
}

std::string metrics_line(const DetectionMetrics& m) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "precision %.4f recall %.4f f1 %.4f iou %.4f", m.precision,
                m.recall, m.f1, m.iou);
  return buf;
}

}  // namespace

int cmd_synth(const Common& c, const SynthArgs& a) {
  BundleSpec spec;
  spec.category = parse_change_category(a.category);
  spec.n_changes = a.changes;
  spec.scene.n_objects = a.objects;
  spec.trajectory.style = parse_trajectory_style(a.style);
  spec.trajectory.n_pre = a.n_pre;
  spec.trajectory.n_post = a.n_post;
  spec.trajectory.n_test = a.n_test;
  spec.jitter_position = a.jitter_position;
  spec.jitter_opacity = a.jitter_opacity;
  spec.seed = c.cfg.seed;
  const auto bundle = make_bundle(spec, c.cfg.render_options());
  write_bundle(bundle, require_out(c));
  std::cout << "bundle " << c.out.string() << " script:\n" << format_script(bundle.script);
  return kExitOk;
}

int cmd_render(const Common& c, const SceneArgs& a) {
  const auto scene = load_scene(a.scene);
  const auto cams = load_cameras(a.cams);
  const fs::path out = require_out(c);
  std::vector<ImageBuffer> imgs(cams.size());
  RenderOptions inner = c.cfg.render_options();
  inner.threads = 1;
  parallel_for(cams.size(), c.cfg.threads, [&](std::size_t k) {
    imgs[k] = render(scene, cams.cameras[k], c.cfg.background(), inner);
  });
  for (std::size_t k = 0; k < cams.size(); ++k) {
    write_fimg(imgs[k], out / view_name(cams.cameras[k].id, ".fimg"));
    write_png(imgs[k], out / view_name(cams.cameras[k].id, ".png"));
  }
  std::cout << "rendered " << cams.size() << " views\n";
  return kExitOk;
}

int cmd_features(const Common& c, const SceneArgs& a) {
  const auto scene = load_scene(a.scene);
  const auto cams = load_cameras(a.cams);
  const auto post = load_view_images(a.images, cams);
  const fs::path out = require_out(c);
  for (std::size_t k = 0; k < cams.size(); ++k) {
    const auto& cam = cams.cameras[k];
    const auto ren = render(scene, cam, c.cfg.background(), c.cfg.render_options());
    save_fmap(features_for(c.cfg, ren, cam.id, "ren"), out / view_name(cam.id, "_ren.fmap"));
    save_fmap(features_for(c.cfg, post[k], cam.id, "post"), out / view_name(cam.id, "_post.fmap"));
  }
  std::cout << "features " << to_string(c.cfg.feature_provider) << " for " << cams.size()
            << " views\n";
  return kExitOk;
}

int cmd_diff2d(const Common& c, const SceneArgs& a) {
  const auto scene = load_scene(a.scene);
  const auto cams = load_cameras(a.cams);
  const auto post = load_view_images(a.images, cams);
  const fs::path out = require_out(c);
  std::ostringstream report;
  report << "# view eps1 eps2 |m1| |m2|\n";
  for (std::size_t k = 0; k < cams.size(); ++k) {
    const auto& cam = cams.cameras[k];
    const auto ren = render(scene, cam, c.cfg.background(), c.cfg.render_options());
    DirectionalMasks d;
    try {
      d = view_difference(c.cfg, ren, post[k], cam.id);
    } catch (const DegenerateAxisError&) {
      d.m1 = d.m2 = ChangeMask(cam.width, cam.height);
      std::cerr << "warning: view " << cam.id << ": features have no variance\n";
    }
    write_pgm(d.m1, out / view_name(cam.id, "_m1.pgm"));
    write_pgm(d.m2, out / view_name(cam.id, "_m2.pgm"));
    report << cam.id << " " << d.eps1 << " " << d.eps2 << " " << d.m1.count() << " "
           << d.m2.count() << "\n";
  }
  write_text(out / "thresholds.txt", report.str());
  std::cout << report.str();
  return kExitOk;
}

int cmd_vote(const Common& c, const SceneArgs& s, const MaskArgs& m) {
  const auto scene = load_scene(s.scene);
  const auto cams = load_cameras(s.cams);
  const auto masks = load_view_masks(m.masks, cams, m.family);
  parse_family(m.family);
  const fs::path out = require_out(c);
  const auto records = contribution_records(c.cfg, scene, cams);
  const auto acc = vote_multi_view(records, masks, scene.size(), c.cfg.vote_mode, c.cfg.prune(),
                                   c.cfg.threads);
  const auto sel = select_by_weight(acc, c.cfg.weight_floor);
  save_selection(sel, out / ("selection_" + m.family + ".gdif"));
  std::cout << "views_used " << acc.n_views_used << " selected " << sel.size() << "\n";
  return kExitOk;
}

int cmd_prune(const Common& c, const SceneArgs& s, const MaskArgs& m) {
  const auto scene = load_scene(s.scene);
  const auto cams = load_cameras(s.cams);
  const auto masks = load_view_masks(m.masks, cams, m.family);
  parse_family(m.family);
  if (m.selection.empty()) throw ContractError("--selection is required");
  const auto sel = load_selection(m.selection);
  const fs::path out = require_out(c);
  const auto r = prune_multi_view(scene, sel, cams, masks, c.cfg.prune(), c.cfg.render_options());
  save_selection(r.kept, out / ("kept_" + m.family + ".gdif"));
  write_text(out / ("retention_" + m.family + ".txt"), format_retention(r.stats) + "\n");
  std::cout << format_retention(r.stats) << "\n";
  return kExitOk;
}

int cmd_detect(const Common& c, const SceneArgs& a) {
  const auto scene = load_scene(a.scene);
  const auto cams = load_cameras(a.cams);
  const auto post = load_view_images(a.images, cams);
  const auto r = run_detect(c.cfg, scene, cams, post);
  write_detect_outputs(r, cams, require_out(c));
  for (const auto& w : r.warnings) std::cerr << "warning: " << w << "\n";
  std::cout << format_detect_report(r, cams);
  return r.exit_code();
}

int cmd_validate(const Common& c, const ValidateArgs& a) {
  const auto cams = load_cameras(a.cams);
  const auto imgs = load_view_images(a.images, cams);
  const auto masks = load_view_masks(a.masks, cams, a.suffix);
  const fs::path out = require_out(c);
  std::size_t validated = 0, passthrough = 0;
  for (std::size_t k = 0; k < cams.size(); ++k) {
    const int id = cams.cameras[k].id;
    const auto props = proposals_for(c.cfg, imgs[k], id);
    if (a.save_proposals) save_proposals(props, out / "proposals");
    write_pgm(validate_components(masks[k], props, c.cfg.min_iou, &validated, &passthrough),
              out / view_name(id, "_" + a.suffix + ".pgm"));
  }
  std::cout << "validated_components " << validated << "\npassthrough_components " << passthrough
            << "\n";
  return kExitOk;
}

int cmd_reconstruct(const Common& c, const ReconstructArgs& a) {
  const auto scene = load_scene(a.in.scene);
  const auto cams = load_cameras(a.in.cams);
  const auto post = load_view_images(a.in.images, cams);
  if (a.detect.empty()) throw ContractError("--detect is required");
  UpdatePlan plan;
  plan.pre_masks = load_view_masks(a.detect / "masks", cams, "pre");
  plan.post_masks = load_view_masks(a.detect / "masks", cams, "post");
  plan.remove_selection = load_selection(a.detect / "removal.gdif");
  plan.optimizer = c.cfg.optimizer_config();
  const auto r = reconstruct(scene, plan, post, cams, c.cfg.background(), make_recon_config(c.cfg),
                             c.cfg.render_options());
  const fs::path out = require_out(c);
  save_scene(r.splice.g_post, out / "g_post.gscn");
  std::ostringstream os;
  os << "seeded " << r.n_seeds << "\n";
  os << "optimization loss " << r.optimization.initial_loss << " -> " << r.optimization.final_loss
     << " in " << r.optimization.steps << " steps\n";
  os << format_splice_report(r.splice.report);
  write_text(out / "splice_report.txt", os.str());
  std::cout << os.str();
  return kExitOk;
}

int cmd_eval(const Common& c, const EvalArgs& a) {
  if (a.bundle.empty()) throw ContractError("--bundle is required");
  if (a.pred.empty() && a.scene.empty()) throw ContractError("eval needs --pred and/or --scene");
  const auto bundle = load_bundle(a.bundle);
  std::ostringstream os, csv;
  if (!a.pred.empty()) {
    csv << "view,tp,fp,fn,precision,recall,f1,iou\n";
    const bool test = a.views == "test";
    const auto& cams = test ? bundle.test_cams : bundle.post_cams;
    const auto& gt = test ? bundle.gt_test : bundle.gt_post;
    const auto pre = load_view_masks(a.pred / "masks", cams, "pre");
    const auto post = load_view_masks(a.pred / "masks", cams, "post");
    std::vector<DetectionMetrics> per_view;
    os << "# view precision recall f1 iou\n";
    for (std::size_t k = 0; k < pre.size(); ++k) {
      per_view.push_back(detection_metrics(pre[k] | post[k], gt[k].joint()));
      const auto& m = per_view.back();
      os << cams.cameras[k].id << " " << metrics_line(m) << "\n";
      csv << cams.cameras[k].id << "," << m.tp << "," << m.fp << "," << m.fn << "," << m.precision
          << "," << m.recall << "," << m.f1 << "," << m.iou << "\n";
    }
    os << "mean_of_views " << metrics_line(aggregate(per_view, AggregateMode::mean_of_views)) << "\n";
    os << "pooled_pixels " << metrics_line(aggregate(per_view, AggregateMode::pooled_pixels)) << "\n";
  }
  if (!a.scene.empty()) {
    const auto scene = load_scene(a.scene);
    os << "# test_view psnr ssim psnr_crop\n";
    for (std::size_t k = 0; k < bundle.test_cams.size(); ++k) {
      const auto& cam = bundle.test_cams.cameras[k];
      const auto img = render(scene, cam, c.cfg.background(), c.cfg.render_options());
      const auto& gt = bundle.test_images[k];
      const auto box = bundle.gt_test[k].joint().bbox();
      const double crop_psnr = box ? psnr(img, gt, *box) : std::numeric_limits<double>::quiet_NaN();
      os << cam.id << " " << psnr(img, gt) << " " << ssim(img, gt) << " " << crop_psnr << "\n";
    }
  }
  if (!c.out.empty()) {
    write_text(require_out(c) / "eval.txt", os.str());
    if (!a.pred.empty()) write_text(require_out(c) / "eval.csv", csv.str());
  }
  std::cout << os.str();
  return kExitOk;
}

int cmd_pipeline(const Common& c, const PipelineArgs& a) {
  const fs::path out = require_out(c);
  if (a.sweep) {
    SweepSpec spec;
    spec.seeds = a.sweep_seeds;
    spec.seed = c.cfg.seed;
    const auto rows = run_sweep(c.cfg, spec);
    write_text(out / "sweep.csv", format_sweep_csv(rows));
    write_text(out / "sweep_matrix.txt", format_sweep_matrix(rows));
    std::cout << format_sweep_matrix(rows);
    return kExitOk;
  }
  if (a.bundle.empty()) throw ContractError("--bundle is required unless --sweep is given");
  const auto bundle = load_bundle(a.bundle);
  const auto r = run_pipeline_e2e(c.cfg, bundle, !a.no_recon);
  write_detect_outputs(r.detect, bundle.post_cams, out / "detect");
  if (!a.no_recon) save_scene(r.recon.splice.g_post, out / "g_post.gscn");
  const std::string report = format_e2e_report(r);
  write_text(out / "report.txt", report);
  std::cout << report;
  return r.detect.exit_code();
}

}  // namespace gscd::cli
