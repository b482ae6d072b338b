#include "gscd/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include "gscd/errors.hpp"
#include "gscd/image_io.hpp"
#include "gscd/parallel.hpp"
#include "gscd/renderer.hpp"
#include "gscd/segmentation.hpp"

namespace gscd {

namespace {

std::string view_file(int id, const std::string& suffix) {
  return "view_" + std::to_string(id) + suffix;
}

FamilyResult run_family(const PipelineConfig& cfg, const GaussianScene& scene, const CameraSet& cams,
                        const std::vector<ContributionRecord>& records,
                        const std::vector<ChangeMask>& masks, double weight_floor) {
  FamilyResult f;
  try {
    const auto acc = vote_multi_view(records, masks, scene.size(), cfg.vote_mode, cfg.prune(),
                                     cfg.threads);
    f.selected = select_by_weight(acc, weight_floor);
  } catch (const EmptyVoteError&) {
    f.empty_vote = true;
  }
  const auto pruned = prune_multi_view(scene, f.selected, cams, masks, cfg.prune(), cfg.render_options());
  f.kept = pruned.kept;
  f.stats = pruned.stats;
  return f;
}

double nan() { return std::numeric_limits<double>::quiet_NaN(); }

std::string fmt(double v, int prec = 4) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", prec, v);
  return buf;
}

void write_text(const std::filesystem::path& p, const std::string& s) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + p.string());
  out << s;
}

}  // namespace

FeatureMap features_for(const PipelineConfig& cfg, const ImageBuffer& img, int view_id,
                        const std::string& which) {
  FeatureProvider p;
  p.kind = cfg.feature_provider;
  if (p.kind == FeatureKind::external) {
    p.external_path = cfg.features_dir / view_file(view_id, "_" + which + ".fmap");
  }
  return extract_features(img, p);
}

SegmentationProposals proposals_for(const PipelineConfig& cfg, const ImageBuffer& img, int view_id) {
  if (!cfg.proposals_dir.empty()) {
    return load_proposals(cfg.proposals_dir, view_id, img.width, img.height);
  }
  return propose_segments(img, cfg.segmentation(), view_id);
}

DirectionalMasks view_difference(const PipelineConfig& cfg, const ImageBuffer& rendered,
                                 const ImageBuffer& post, int view_id) {
  const auto fa = features_for(cfg, rendered, view_id, "ren");
  const auto fb = features_for(cfg, post, view_id, "post");
  const auto axis = principal_axis(fa, fb, cfg.pca_samples,
                                   cfg.seed * 1000003ull + static_cast<std::uint64_t>(view_id));
  return threshold_directional(signed_distance(fa, fb, axis), cfg.thresholds());
}

int DetectResult::exit_code() const {
  if (direction.no_change) return kExitNoChange;
  if (direction.ambiguous) return kExitAmbiguous;
  return kExitOk;
}

std::vector<ChangeMask> DetectResult::joint_masks() const {
  std::vector<ChangeMask> out;
  for (std::size_t k = 0; k < pre_masks.size(); ++k) out.push_back(pre_masks[k] | post_masks[k]);
  return out;
}

ChangeMask validate_components(const ChangeMask& mask, const SegmentationProposals& proposals,
                               double min_iou, std::size_t* validated, std::size_t* passthrough) {
  // Components are grouped under the proposal they overlap most, so a
  // fragmented projection of one object is validated as a whole while
  // separate objects stay separate.
  const auto comps = connected_components(mask);
  std::vector<int> owner(comps.size(), -1);
  for (std::size_t c = 0; c < comps.size(); ++c) {
    std::size_t best = 0;
    for (std::size_t k = 0; k < proposals.masks.size(); ++k) {
      const std::size_t inter = (comps[c] & proposals.masks[k]).count();
      if (inter > best) {
        best = inter;
        owner[c] = static_cast<int>(k);
      }
    }
  }
  ChangeMask out(mask.width(), mask.height());
  std::vector<std::uint8_t> done(comps.size(), 0);
  for (std::size_t c = 0; c < comps.size(); ++c) {
    if (done[c]) continue;
    ChangeMask group = comps[c];
    for (std::size_t d = c + 1; d < comps.size(); ++d) {
      if (owner[c] >= 0 && owner[d] == owner[c]) {
        group = group | comps[d];
        done[d] = 1;
      }
    }
    const auto v = validate(group, proposals, min_iou);
    if (v.mask) {
      out = out | *v.mask;
      if (validated) ++*validated;
    } else {
      out = out | group;
      if (passthrough) ++*passthrough;
    }
  }
  return out;
}

DetectResult run_detect(const PipelineConfig& cfg, const GaussianScene& pre_scene,
                        const CameraSet& cams, const std::vector<ImageBuffer>& post_images) {
  validate_config(cfg);
  if (post_images.size() != cams.size()) {
    throw ContractError("detect: " + std::to_string(post_images.size()) + " post images for " +
                        std::to_string(cams.size()) + " cameras");
  }
  for (std::size_t k = 0; k < cams.size(); ++k) {
    if (post_images[k].width != cams.cameras[k].width || post_images[k].height != cams.cameras[k].height) {
      throw ContractError("detect: image of view " + std::to_string(cams.cameras[k].id) +
                          " does not match its camera");
    }
  }
  const std::size_t n = cams.size();
  const Rgb bg = cfg.background();
  RenderOptions inner = cfg.render_options();
  inner.threads = 1;

  DetectResult r;
  r.renders.resize(n);
  r.directional.resize(n);
  std::vector<ContributionRecord> records(n);
  std::vector<std::string> degenerate(n);
  parallel_for(n, cfg.threads, [&](std::size_t k) {
    const auto& cam = cams.cameras[k];
    auto [img, rec] = render_with_contributions(pre_scene, cam, bg, cfg.contribution_threshold, inner);
    rec.view_id = cam.id;
    try {
      r.directional[k] = view_difference(cfg, img, post_images[k], cam.id);
    } catch (const DegenerateAxisError&) {
      r.directional[k].m1 = ChangeMask(cam.width, cam.height);
      r.directional[k].m2 = ChangeMask(cam.width, cam.height);
      degenerate[k] = "view " + std::to_string(cam.id) + ": features have no variance";
    }
    r.renders[k] = std::move(img);
    records[k] = std::move(rec);
  });
  for (auto& w : degenerate) {
    if (!w.empty()) r.warnings.push_back(std::move(w));
  }

  std::vector<ChangeMask> m1, m2;
  for (const auto& d : r.directional) {
    m1.push_back(d.m1);
    m2.push_back(d.m2);
  }
  r.m1 = run_family(cfg, pre_scene, cams, records, m1, cfg.weight_floor);
  r.m2 = run_family(cfg, pre_scene, cams, records, m2, cfg.weight_floor);
  r.direction = resolve_direction(r.m1.stats, r.m2.stats);
  if (!r.direction.note.empty() && (r.direction.ambiguous || r.direction.no_change)) {
    r.warnings.push_back(r.direction.note);
  }

  r.pre_projected.assign(n, ChangeMask());
  r.pre_masks.assign(n, ChangeMask());
  r.post_masks.assign(n, ChangeMask());
  if (r.direction.no_change) {
    for (std::size_t k = 0; k < n; ++k) {
      const auto& cam = cams.cameras[k];
      r.pre_projected[k] = r.pre_masks[k] = r.post_masks[k] = ChangeMask(cam.width, cam.height);
    }
    return r;
  }
  const FamilyResult& pre_fam = r.family(r.direction.pre_family);
  const auto& post_raw = r.direction.post_family == MaskFamily::m1 ? m1 : m2;
  std::vector<std::size_t> validated(n, 0), passthrough(n, 0);
  parallel_for(n, cfg.threads, [&](std::size_t k) {
    const auto& cam = cams.cameras[k];
    r.pre_projected[k] = project_selection(pre_scene, pre_fam.kept, cam, cfg.render_threshold, inner);
    if (!cfg.validate) {
      r.pre_masks[k] = r.pre_projected[k];
      r.post_masks[k] = post_raw[k];
      return;
    }
    const auto ren_props = proposals_for(cfg, r.renders[k], cam.id);
    r.pre_masks[k] = validate_components(r.pre_projected[k], ren_props, cfg.min_iou, &validated[k],
                                         &passthrough[k]);
    const auto post_props = cfg.proposals_dir.empty() ? proposals_for(cfg, post_images[k], cam.id)
                                                      : ren_props;
    r.post_masks[k] = validate_components(post_raw[k], post_props, cfg.min_iou, &validated[k],
                                          &passthrough[k]);
  });
  for (std::size_t k = 0; k < n; ++k) {
    r.validated_components += validated[k];
    r.passthrough_components += passthrough[k];
  }

  // Gaussians of G_pre to delete before reconstruction.
  const FamilyResult removal = run_family(cfg, pre_scene, cams, records, r.pre_masks, cfg.recon_weight_floor);
  r.removal = removal.kept;
  return r;
}

std::string format_detect_report(const DetectResult& r, const CameraSet& cams) {
  std::ostringstream os;
  os << "exit_code " << r.exit_code() << "\n";
  os << "direction pre=" << to_string(r.direction.pre_family)
     << " post=" << to_string(r.direction.post_family)
     << " ambiguous=" << (r.direction.ambiguous ? 1 : 0)
     << " no_change=" << (r.direction.no_change ? 1 : 0) << "\n";
  if (!r.direction.note.empty()) os << "note " << r.direction.note << "\n";
  os << "m1 " << format_retention(r.m1.stats) << "\n";
  os << "m2 " << format_retention(r.m2.stats) << "\n";
  os << "removal " << r.removal.size() << "\n";
  os << "validated_components " << r.validated_components << "\n";
  os << "passthrough_components " << r.passthrough_components << "\n";
  os << "# view eps1 eps2 |m1| |m2| |pre_projected| |pre| |post|\n";
  for (std::size_t k = 0; k < cams.size(); ++k) {
    const auto& d = r.directional[k];
    os << cams.cameras[k].id << " " << fmt(d.eps1, 6) << " " << fmt(d.eps2, 6) << " " << d.m1.count()
       << " " << d.m2.count() << " " << r.pre_projected[k].count() << " " << r.pre_masks[k].count()
       << " " << r.post_masks[k].count() << "\n";
  }
  for (const auto& w : r.warnings) os << "warning " << w << "\n";
  return os.str();
}

void write_detect_outputs(const DetectResult& r, const CameraSet& cams,
                          const std::filesystem::path& out) {
  namespace fs = std::filesystem;
  fs::create_directories(out / "masks");
  fs::create_directories(out / "diff2d");
  fs::create_directories(out / "renders");
  for (std::size_t k = 0; k < cams.size(); ++k) {
    const int id = cams.cameras[k].id;
    write_pgm(r.pre_masks[k], out / "masks" / view_file(id, "_pre.pgm"));
    write_pgm(r.post_masks[k], out / "masks" / view_file(id, "_post.pgm"));
    write_pgm(r.directional[k].m1, out / "diff2d" / view_file(id, "_m1.pgm"));
    write_pgm(r.directional[k].m2, out / "diff2d" / view_file(id, "_m2.pgm"));
    write_fimg(r.renders[k], out / "renders" / view_file(id, ".fimg"));
  }
  save_selection(r.m1.kept, out / "selection_m1.gdif");
  save_selection(r.m2.kept, out / "selection_m2.gdif");
  save_selection(r.removal, out / "removal.gdif");
  write_text(out / "retention_m1.txt", format_retention(r.m1.stats) + "\n");
  write_text(out / "retention_m2.txt", format_retention(r.m2.stats) + "\n");
  write_text(out / "detect_report.txt", format_detect_report(r, cams));
}

UpdatePlan make_update_plan(const PipelineConfig& cfg, const DetectResult& d) {
  UpdatePlan plan;
  plan.pre_masks = d.pre_masks;
  plan.post_masks = d.post_masks;
  plan.remove_selection = d.removal;
  plan.optimizer = cfg.optimizer_config();
  return plan;
}

ReconConfig make_recon_config(const PipelineConfig& cfg) {
  ReconConfig rc;
  rc.seeds = cfg.seed_config();
  rc.splice_prune = cfg.prune();
  rc.splice_prune.weight_floor = cfg.recon_weight_floor;
  return rc;
}

std::vector<ChangeMask> baseline_masks(const PipelineConfig& cfg, const GaussianScene& pre_scene,
                                       const CameraSet& cams,
                                       const std::vector<ImageBuffer>& post_images,
                                       BaselineKind kind) {
  validate_config(cfg);
  if (post_images.size() != cams.size()) throw ContractError("baseline: images and cameras differ");
  std::vector<ChangeMask> out(cams.size());
  RenderOptions inner = cfg.render_options();
  inner.threads = 1;
  parallel_for(cams.size(), cfg.threads, [&](std::size_t k) {
    const auto& cam = cams.cameras[k];
    const ImageBuffer ren = render(pre_scene, cam, cfg.background(), inner);
    BaselineParams params;
    params.features.kind = cfg.feature_provider == FeatureKind::external ? FeatureKind::rgb
                                                                         : cfg.feature_provider;
    params.feature_thresholds = cfg.thresholds();
    params.pca_samples = cfg.pca_samples;
    params.seed = cfg.seed * 1000003ull + static_cast<std::uint64_t>(cam.id);
    out[k] = baseline_diff(ren, post_images[k], kind, params);
  });
  return out;
}

ChangeMask influence_mask(const GaussianScene& scene, const std::vector<GaussianIndex>& selection,
                          const PinholeCamera& cam, const RenderOptions& opts) {
  ChangeMask m(cam.width, cam.height);
  for (GaussianIndex i : selection) {
    const auto p = project_gaussian(scene.gaussians.at(i), cam, opts, i);
    if (!p) continue;
    for (int y = std::max(0, p->bbox.y0); y < std::min(cam.height, p->bbox.y1); ++y)
      for (int x = std::max(0, p->bbox.x0); x < std::min(cam.width, p->bbox.x1); ++x) m.set(x, y);
  }
  DiffSelection sel;
  sel.indices = selection;
  sel.weights.assign(selection.size(), 1.0f);
  std::sort(sel.indices.begin(), sel.indices.end());
  return m | project_selection(scene, sel, cam, 0.5, opts);
}

E2EResult run_pipeline_e2e(const PipelineConfig& cfg, const SynthBundle& bundle,
                           bool reconstruct_scene) {
  E2EResult r;
  const auto& pre = bundle.pre.scene;
  r.detect = run_detect(cfg, pre, bundle.post_cams, bundle.post_images);
  const auto joint = r.detect.joint_masks();
  for (std::size_t k = 0; k < joint.size(); ++k) {
    r.post_metrics.push_back(detection_metrics(joint[k], bundle.gt_post[k].joint()));
  }
  if (!r.post_metrics.empty()) {
    r.post_mean = aggregate(r.post_metrics, AggregateMode::mean_of_views);
    r.post_pooled = aggregate(r.post_metrics, AggregateMode::pooled_pixels);
  }
  if (!reconstruct_scene) return r;

  const RenderOptions opts = cfg.render_options();
  r.recon = reconstruct(pre, make_update_plan(cfg, r.detect), bundle.post_images, bundle.post_cams,
                        cfg.background(), make_recon_config(cfg), opts);
  const GaussianScene& g_post = r.recon.splice.g_post;
  r.frozen_intact = r.recon.splice.report.n_frozen_touched == 0;
  for (std::size_t i = 0; i < pre.size(); ++i) {
    const auto j = r.recon.removal.old_to_new[i];
    if (j >= 0 && !bitwise_equal(pre.gaussians[i], g_post.gaussians[static_cast<std::size_t>(j)])) {
      r.frozen_intact = false;
    }
  }

  r.min_out_psnr = kPsnrIdentical;
  double in_before = 0.0, in_after = 0.0;
  int in_views = 0;
  for (std::size_t k = 0; k < bundle.test_cams.size(); ++k) {
    const auto& cam = bundle.test_cams.cameras[k];
    const ImageBuffer before = render(pre, cam, cfg.background(), opts);
    const ImageBuffer after = render(g_post, cam, cfg.background(), opts);
    const ImageBuffer& gt = bundle.test_images[k];
    TestViewRecon v;
    v.view_id = cam.id;
    v.psnr_full = psnr(after, gt);
    v.ssim_full = ssim(after, gt);
    const ChangeMask region = bundle.gt_test[k].joint();
    const auto box = region.bbox();
    v.psnr_crop = box ? psnr(after, gt, *box) : nan();
    if (region.any()) {
      v.psnr_in_before = psnr(before, gt, region);
      v.psnr_in_after = psnr(after, gt, region);
      in_before += v.psnr_in_before;
      in_after += v.psnr_in_after;
      ++in_views;
    } else {
      v.psnr_in_before = v.psnr_in_after = nan();
    }
    const ChangeMask changed = influence_mask(pre, r.recon.removed, cam, opts) |
                               influence_mask(g_post, r.recon.splice.added, cam, opts);
    const ChangeMask outside = ~changed;
    v.psnr_out_locality = outside.any() ? psnr(before, after, outside) : nan();
    if (!std::isnan(v.psnr_out_locality)) r.min_out_psnr = std::min(r.min_out_psnr, v.psnr_out_locality);
    r.test_views.push_back(v);
  }
  r.mean_in_before = in_views ? in_before / in_views : nan();
  r.mean_in_after = in_views ? in_after / in_views : nan();
  return r;
}

std::string format_e2e_report(const E2EResult& r) {
  std::ostringstream os;
  os << "detect_exit_code " << r.detect.exit_code() << "\n";
  os << "direction pre=" << to_string(r.detect.direction.pre_family)
     << " post=" << to_string(r.detect.direction.post_family) << "\n";
  os << "m1 " << format_retention(r.detect.m1.stats) << "\n";
  os << "m2 " << format_retention(r.detect.m2.stats) << "\n";
  os << "post_views_mean precision " << fmt(r.post_mean.precision) << " recall " << fmt(r.post_mean.recall)
     << " f1 " << fmt(r.post_mean.f1) << " iou " << fmt(r.post_mean.iou) << "\n";
  os << "post_views_pooled precision " << fmt(r.post_pooled.precision) << " recall "
     << fmt(r.post_pooled.recall) << " f1 " << fmt(r.post_pooled.f1) << " iou " << fmt(r.post_pooled.iou)
     << "\n";
  if (r.test_views.empty()) return os.str();
  const auto& rep = r.recon.splice.report;
  os << "removed " << rep.n_removed << " seeded " << r.recon.n_seeds << " added " << rep.n_added
     << " frozen_touched " << rep.n_frozen_touched << " frozen_intact " << (r.frozen_intact ? 1 : 0)
     << "\n";
  os << "optimization loss " << fmt(r.recon.optimization.initial_loss, 6) << " -> "
     << fmt(r.recon.optimization.final_loss, 6) << " in " << r.recon.optimization.steps << " steps\n";
  os << "test_in_mask_psnr before " << fmt(r.mean_in_before) << " after " << fmt(r.mean_in_after) << "\n";
  os << "test_out_of_mask_min_psnr " << fmt(r.min_out_psnr) << "\n";
  os << "# view psnr_full ssim_full psnr_crop psnr_in_before psnr_in_after psnr_out_locality\n";
  for (const auto& v : r.test_views) {
    os << v.view_id << " " << fmt(v.psnr_full) << " " << fmt(v.ssim_full) << " " << fmt(v.psnr_crop) << " "
       << fmt(v.psnr_in_before) << " " << fmt(v.psnr_in_after) << " " << fmt(v.psnr_out_locality) << "\n";
  }
  return os.str();
}

std::vector<SweepRow> run_sweep(const PipelineConfig& cfg, const SweepSpec& spec) {
  std::vector<SweepRow> rows;
  for (ChangeCategory cat : spec.categories) {
    for (int count : spec.counts) {
      if (cat == ChangeCategory::mixed && count < 2) continue;
      for (int s = 0; s < spec.seeds; ++s) {
        SweepRow row;
        row.category = cat;
        row.count = count;
        row.seed = spec.seed * 1000003ull + static_cast<std::uint64_t>(s);
        BundleSpec b = spec.base;
        b.category = cat;
        b.n_changes = count;
        b.seed = row.seed * 31ull + static_cast<std::uint64_t>(count) * 7ull +
                 static_cast<std::uint64_t>(cat);
        b.scene.n_objects = std::max(b.scene.n_objects, count + 1);
        try {
          const SynthBundle bundle = make_bundle(b, cfg.render_options());
          const auto e2e = run_pipeline_e2e(cfg, bundle, false);
          row.exit_code = e2e.detect.exit_code();
          row.mean = e2e.post_mean;
        } catch (const PlacementError&) {
          row.exit_code = -1;
        }
        rows.push_back(row);
      }
    }
  }
  return rows;
}

std::string format_sweep_csv(const std::vector<SweepRow>& rows) {
  std::ostringstream os;
  os << "category,count,seed,exit_code,precision,recall,f1,iou\n";
  for (const auto& r : rows) {
    os << to_string(r.category) << "," << r.count << "," << r.seed << "," << r.exit_code << ","
       << fmt(r.mean.precision, 6) << "," << fmt(r.mean.recall, 6) << "," << fmt(r.mean.f1, 6) << ","
       << fmt(r.mean.iou, 6) << "\n";
  }
  return os.str();
}

std::string format_sweep_matrix(const std::vector<SweepRow>& rows) {
  std::vector<ChangeCategory> cats;
  std::vector<int> counts;
  std::map<std::pair<int, int>, std::pair<double, double>> sum;
  std::map<std::pair<int, int>, int> n;
  for (const auto& r : rows) {
    if (std::find(cats.begin(), cats.end(), r.category) == cats.end()) cats.push_back(r.category);
    if (std::find(counts.begin(), counts.end(), r.count) == counts.end()) counts.push_back(r.count);
    if (r.exit_code < 0) continue;
    const auto key = std::make_pair(static_cast<int>(r.category), r.count);
    sum[key].first += r.mean.f1;
    sum[key].second += r.mean.iou;
    ++n[key];
  }
  std::ostringstream os;
  char buf[64];
  std::snprintf(buf, sizeof buf, "%-12s", "F1/IoU");
  os << buf;
  for (int c : counts) {
    std::snprintf(buf, sizeof buf, " %13s", (std::to_string(c) + " obj").c_str());
    os << buf;
  }
  os << "\n";
  for (ChangeCategory cat : cats) {
    std::snprintf(buf, sizeof buf, "%-12s", to_string(cat).c_str());
    os << buf;
    for (int c : counts) {
      const auto key = std::make_pair(static_cast<int>(cat), c);
      if (!n.count(key)) {
        std::snprintf(buf, sizeof buf, " %13s", "--");
      } else {
        std::snprintf(buf, sizeof buf, " %6.3f/%6.3f", sum[key].first / n[key], sum[key].second / n[key]);
      }
      os << buf;
    }
    os << "\n";
  }
  return os.str();
}

}  // namespace gscd
