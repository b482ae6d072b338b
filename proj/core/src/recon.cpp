#include "gscd/recon.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <limits>
#include <random>
#include <sstream>

#include "gscd/errors.hpp"
#include "gscd/metrics.hpp"

namespace gscd {

namespace {

void check_views(const std::vector<ImageBuffer>& imgs, const std::vector<ChangeMask>& masks,
                 const CameraSet& cams, const char* who) {
  if (imgs.size() != cams.size() || masks.size() != cams.size()) {
    throw ContractError(std::string(who) + ": images, masks and cameras are not aligned");
  }
  for (std::size_t k = 0; k < cams.size(); ++k) {
    const auto& c = cams.cameras[k];
    if (imgs[k].width != c.width || imgs[k].height != c.height || masks[k].width() != c.width ||
        masks[k].height() != c.height) {
      throw ContractError(std::string(who) + ": view " + std::to_string(c.id) +
                          " has mismatched dimensions");
    }
  }
}

template <class T>
bool same_bits(const T& a, const T& b) {
  return std::memcmp(&a, &b, sizeof(T)) == 0;
}

Vec3 clip(const Vec3& g, double max_norm) {
  const double n = g.norm();
  return n > max_norm ? Vec3(g * (max_norm / n)) : g;
}

double nan_psnr(const ImageBuffer& a, const ImageBuffer& b, const ChangeMask& region) {
  if (!region.any()) return std::numeric_limits<double>::quiet_NaN();
  return psnr(a, b, region);
}

}  // namespace

bool bitwise_equal(const Gaussian3D& a, const Gaussian3D& b) {
  for (int i = 0; i < 3; ++i) {
    if (!same_bits(a.position[i], b.position[i]) || !same_bits(a.scale[i], b.scale[i]) ||
        !same_bits(a.color[i], b.color[i])) {
      return false;
    }
  }
  for (int i = 0; i < 4; ++i) {
    if (!same_bits(a.rotation.coeffs()[i], b.rotation.coeffs()[i])) return false;
  }
  return same_bits(a.opacity, b.opacity);
}

RemovalResult remove_selection(const GaussianScene& scene, const DiffSelection& selection) {
  std::vector<std::uint8_t> drop(scene.size(), 0);
  for (GaussianIndex i : selection.indices) {
    if (i >= scene.size()) throw ContractError("remove_selection: index outside the scene");
    drop[i] = 1;
  }
  RemovalResult out;
  out.old_to_new.assign(scene.size(), -1);
  std::vector<float> diff;
  for (std::size_t i = 0; i < scene.size(); ++i) {
    if (drop[i]) {
      ++out.n_removed;
      continue;
    }
    out.old_to_new[i] = static_cast<std::int64_t>(out.scene.gaussians.size());
    out.scene.gaussians.push_back(scene.gaussians[i]);
    if (scene.diff_channel) diff.push_back((*scene.diff_channel)[i]);
  }
  if (scene.diff_channel) out.scene.diff_channel = std::move(diff);
  return out;
}

std::vector<Gaussian3D> seed_new_gaussians(const std::vector<ImageBuffer>& post_imgs,
                                           const std::vector<ChangeMask>& post_masks,
                                           const CameraSet& cameras,
                                           const std::vector<std::vector<double>>& background_depth,
                                           const SeedConfig& cfg) {
  check_views(post_imgs, post_masks, cameras, "seed_new_gaussians");
  if (background_depth.size() != cameras.size()) {
    throw ContractError("seed_new_gaussians: background depth not aligned with cameras");
  }
  if (cfg.depth_candidates < 1 || cfg.near_depth <= 0.0) {
    throw ContractError("seed_new_gaussians: invalid depth sampling parameters");
  }
  for (std::size_t k = 0; k < cameras.size(); ++k) {
    if (background_depth[k].size() != cameras.cameras[k].pixel_count()) {
      throw ContractError("seed_new_gaussians: background depth has the wrong size");
    }
  }
  std::vector<Gaussian3D> seeds;
  const std::size_t n_views = cameras.size();

  // Fraction of the other views that see x inside their mask and not behind
  // their rendered background.
  const auto consistency = [&](const Vec3& x, std::size_t source) {
    int seen = 0, inside = 0;
    for (std::size_t j = 0; j < n_views; ++j) {
      if (j == source) continue;
      const auto& cam = cameras.cameras[j];
      const Vec3 pc = cam.to_camera(x);
      if (pc.z() <= cfg.near_depth) continue;
      const Vec2 px = cam.project_camera(pc);
      if (!cam.contains(px)) continue;
      ++seen;
      const std::size_t p = static_cast<std::size_t>(std::floor(px.y())) * cam.width +
                            static_cast<std::size_t>(std::floor(px.x()));
      const double bg = background_depth[j][p];
      const bool behind_surface = bg > 0.0 && pc.z() > bg * 1.02;
      if (post_masks[j].get(p) && !behind_surface) ++inside;
    }
    return seen == 0 ? 1.0 : static_cast<double>(inside) / seen;
  };

  for (std::size_t k = 0; k < n_views; ++k) {
    const auto& cam = cameras.cameras[k];
    std::vector<std::size_t> pixels;
    for (std::size_t p = 0; p < post_masks[k].size(); ++p) {
      if (post_masks[k].get(p)) pixels.push_back(p);
    }
    if (pixels.empty() || cfg.count_per_view <= 0) continue;
    std::mt19937_64 rng(cfg.seed + 0x9E3779B97F4A7C15ull * (k + 1));
    std::uniform_int_distribution<std::size_t> pick(0, pixels.size() - 1);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<std::pair<double, double>> candidates;  // (depth, consistency)
    for (int s = 0; s < cfg.count_per_view; ++s) {
      const std::size_t p = pixels[pick(rng)];
      const Vec2 pixel(static_cast<double>(p % cam.width) + 0.5,
                       static_cast<double>(p / cam.width) + 0.5);
      double far = background_depth[k][p] > 0.0 ? background_depth[k][p] : cfg.far_depth;
      far = std::max(far, cfg.near_depth * 1.0001);
      const double d_lo = 1.0 / far, d_hi = 1.0 / cfg.near_depth;
      candidates.clear();
      double best = -1.0;
      for (int c = 0; c < cfg.depth_candidates; ++c) {
        const double disparity = d_lo + (c + unit(rng)) / cfg.depth_candidates * (d_hi - d_lo);
        const double depth = 1.0 / disparity;
        const double score = consistency(cam.unproject(pixel, depth), k);
        candidates.emplace_back(depth, score);
        best = std::max(best, score);
      }
      const double bar = std::min(best, cfg.hull_fraction);
      std::vector<double> passing;
      for (const auto& [d, score] : candidates) {
        if (score >= bar) passing.push_back(d);
      }
      const double depth =
          passing[std::uniform_int_distribution<std::size_t>(0, passing.size() - 1)(rng)];
      Gaussian3D g;
      g.position = cam.unproject(pixel, depth);
      g.scale = Vec3::Constant(std::max(1e-4, cfg.scale_px * depth / cam.fx));
      g.rotation = Quat::Identity();
      g.opacity = cfg.opacity;
      g.color = post_imgs[k].rgb(p).cwiseMax(0.0).cwiseMin(1.0);
      seeds.push_back(g);
    }
  }
  return seeds;
}

OptimizeResult masked_optimize(const GaussianScene& scene, const std::vector<bool>& frozen,
                               const std::vector<ImageBuffer>& post_imgs,
                               const std::vector<ChangeMask>& post_masks, const CameraSet& cameras,
                               const Rgb& background, const OptimizerConfig& cfg,
                               const RenderOptions& opts) {
  check_views(post_imgs, post_masks, cameras, "masked_optimize");
  if (frozen.size() != scene.size()) {
    throw ContractError("masked_optimize: frozen flags do not match the scene");
  }
  if (cfg.iterations < 0 || cfg.batch < 1 || !(cfg.step_size > 0.0) || !(cfg.clip_norm > 0.0)) {
    throw ContractError("masked_optimize: invalid optimizer settings");
  }
  OptimizeResult res;
  res.scene = scene;
  auto& gs = res.scene.gaussians;
  const std::size_t n = gs.size();
  std::vector<bool> active(n);
  bool any_active = false;
  for (std::size_t i = 0; i < n; ++i) {
    active[i] = !frozen[i];
    any_active = any_active || active[i];
  }
  std::vector<std::size_t> views;
  std::size_t masked_pixels = 0;
  for (std::size_t k = 0; k < cameras.size(); ++k) {
    const std::size_t c = post_masks[k].count();
    if (c > 0) views.push_back(k);
    masked_pixels += c;
  }
  const auto total_loss = [&] {
    double loss = 0.0;
    for (std::size_t k : views) {
      loss += masked_loss(res.scene, cameras.cameras[k], background, post_imgs[k], post_masks[k],
                          opts, cfg.loss);
    }
    return loss;
  };
  res.initial_loss = total_loss();
  res.final_loss = res.initial_loss;
  if (cfg.iterations == 0 || !any_active || views.empty()) return res;

  const double initial_per_pixel = res.initial_loss / static_cast<double>(masked_pixels);
  const double pos_step = cfg.step_size * cfg.position_step_scale;
  constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kEps = 1e-8;
  struct Moments {
    Vec3 pos_m = Vec3::Zero(), pos_v = Vec3::Zero();
    Eigen::Vector4d app_m = Eigen::Vector4d::Zero(), app_v = Eigen::Vector4d::Zero();
  };
  std::vector<Moments> moments(cfg.method == OptimizerMethod::adam ? n : 0);
  std::vector<GaussianGradient> grads(n);
  int diverging = 0;

  for (int step = 0; step < cfg.iterations; ++step) {
    std::fill(grads.begin(), grads.end(), GaussianGradient{});
    double batch_loss = 0.0;
    std::size_t batch_pixels = 0;
    const int batch = std::min<int>(cfg.batch, static_cast<int>(views.size()));
    for (int b = 0; b < batch; ++b) {
      const std::size_t k = views[(static_cast<std::size_t>(step) * batch + b) % views.size()];
      const auto gr = render_gradients(res.scene, cameras.cameras[k], background, post_imgs[k],
                                       post_masks[k], active, opts, cfg.loss);
      batch_loss += gr.loss;
      batch_pixels += post_masks[k].count();
      for (std::size_t i = 0; i < n; ++i) {
        if (!active[i]) continue;
        grads[i].position += gr.grads[i].position;
        grads[i].opacity += gr.grads[i].opacity;
        grads[i].color += gr.grads[i].color;
      }
    }
    if (!std::isfinite(batch_loss)) throw DivergenceError("masked_optimize: loss is not finite");
    const double per_pixel = batch_loss / static_cast<double>(batch_pixels);
    diverging = per_pixel > 10.0 * initial_per_pixel && initial_per_pixel > 0.0 ? diverging + 1 : 0;
    if (diverging >= 50) {
      throw DivergenceError("masked_optimize: loss above 10x its initial value for 50 steps (step " +
                            std::to_string(step) + ", loss/pixel " + std::to_string(per_pixel) +
                            ", initial " + std::to_string(initial_per_pixel) + ")");
    }

    const double t = step + 1;
    for (std::size_t i = 0; i < n; ++i) {
      if (!active[i]) continue;
      Gaussian3D& g = gs[i];
      const Vec3 gp = clip(grads[i].position, cfg.clip_norm);
      Eigen::Vector4d ga(grads[i].opacity, grads[i].color.x(), grads[i].color.y(),
                         grads[i].color.z());
      if (ga.norm() > cfg.clip_norm) ga *= cfg.clip_norm / ga.norm();
      Vec3 dp;
      Eigen::Vector4d da;
      if (cfg.method == OptimizerMethod::adam) {
        Moments& m = moments[i];
        m.pos_m = kBeta1 * m.pos_m + (1 - kBeta1) * gp;
        m.pos_v = kBeta2 * m.pos_v + (1 - kBeta2) * gp.cwiseProduct(gp);
        m.app_m = kBeta1 * m.app_m + (1 - kBeta1) * ga;
        m.app_v = kBeta2 * m.app_v + (1 - kBeta2) * ga.cwiseProduct(ga);
        const double c1 = 1 - std::pow(kBeta1, t), c2 = 1 - std::pow(kBeta2, t);
        dp = (m.pos_m / c1).array() / ((m.pos_v / c2).array().sqrt() + kEps);
        da = (m.app_m / c1).array() / ((m.app_v / c2).array().sqrt() + kEps);
      } else {
        dp = gp;
        da = ga;
      }
      g.position -= pos_step * dp;
      g.opacity = std::clamp(g.opacity - cfg.step_size * da[0], 0.0, 1.0);
      g.color = (g.color - cfg.step_size * da.tail<3>()).cwiseMax(0.0).cwiseMin(1.0);
      g.scale = g.scale.cwiseMax(1e-4);
    }
    res.steps = step + 1;
  }
  res.final_loss = total_loss();
  return res;
}

SpliceResult splice(const GaussianScene& pre_scene, const RemovalResult& removal,
                    const GaussianScene& intermediate, const CameraSet& cameras,
                    const std::vector<ChangeMask>& post_masks,
                    const std::vector<ImageBuffer>& post_imgs, const Rgb& background,
                    const PruneConfig& cfg, const RenderOptions& opts) {
  check_views(post_imgs, post_masks, cameras, "splice");
  const GaussianScene& base = removal.scene;
  const std::size_t nb = base.size();
  if (intermediate.size() < nb) {
    throw ContractError("splice: intermediate scene is smaller than the base scene");
  }
  SpliceResult out;
  auto& rep = out.report;
  rep.n_removed = removal.n_removed;
  for (std::size_t i = 0; i < nb; ++i) {
    if (!bitwise_equal(base.gaussians[i], intermediate.gaussians[i])) ++rep.n_frozen_touched;
  }

  std::vector<GaussianIndex> chosen;
  const bool any_mask =
      std::any_of(post_masks.begin(), post_masks.end(), [](const ChangeMask& m) { return m.any(); });
  if (intermediate.size() > nb && any_mask) {
    std::vector<ContributionRecord> records;
    records.reserve(cameras.size());
    for (const auto& cam : cameras.cameras) {
      auto rec = render_with_contributions(intermediate, cam, background, 1e-5, opts).second;
      rec.view_id = cam.id;
      records.push_back(std::move(rec));
    }
    try {
      const auto acc = vote_multi_view(records, post_masks, intermediate.size(),
                                       VoteMode::visibility_aware, cfg, opts.threads);
      const auto sel = select_by_weight(acc, cfg.weight_floor);
      const auto pruned = prune_multi_view(intermediate, sel, cameras, post_masks, cfg, opts);
      for (GaussianIndex i : pruned.kept.indices) {
        if (i >= nb) chosen.push_back(i);
      }
    } catch (const EmptyVoteError&) {
    }
  }

  out.g_post.gaussians = base.gaussians;
  for (GaussianIndex i : chosen) {
    out.added.push_back(static_cast<GaussianIndex>(out.g_post.gaussians.size()));
    out.g_post.gaussians.push_back(intermediate.gaussians[i]);
  }
  rep.n_added = chosen.size();
  rep.empty_selection = chosen.empty();

  for (std::size_t k = 0; k < cameras.size(); ++k) {
    const auto& cam = cameras.cameras[k];
    const ImageBuffer before = render(pre_scene, cam, background, opts);
    const ImageBuffer after = render(out.g_post, cam, background, opts);
    ViewPsnr v;
    v.view_id = cam.id;
    const ChangeMask outside = ~post_masks[k];
    v.in_before = nan_psnr(before, post_imgs[k], post_masks[k]);
    v.in_after = nan_psnr(after, post_imgs[k], post_masks[k]);
    v.out_before = nan_psnr(before, post_imgs[k], outside);
    v.out_after = nan_psnr(after, post_imgs[k], outside);
    rep.views.push_back(v);
  }
  return out;
}

ReconstructionResult reconstruct(const GaussianScene& pre_scene, const UpdatePlan& plan,
                                 const std::vector<ImageBuffer>& post_imgs,
                                 const CameraSet& cameras, const Rgb& background,
                                 const ReconConfig& cfg, const RenderOptions& opts) {
  check_views(post_imgs, plan.post_masks, cameras, "reconstruct");
  if (plan.pre_masks.size() != cameras.size()) {
    throw ContractError("reconstruct: pre masks are not aligned with cameras");
  }
  ReconstructionResult out;
  out.removal = remove_selection(pre_scene, plan.remove_selection);
  out.removed = plan.remove_selection.indices;
  GaussianScene intermediate;
  intermediate.gaussians = out.removal.scene.gaussians;
  const bool any_post = std::any_of(plan.post_masks.begin(), plan.post_masks.end(),
                                    [](const ChangeMask& m) { return m.any(); });
  if (any_post) {
    std::vector<std::vector<double>> depth;
    depth.reserve(cameras.size());
    for (const auto& cam : cameras.cameras) {
      depth.push_back(render_depth(out.removal.scene, cam, opts).depth);
    }
    const auto seeds = seed_new_gaussians(post_imgs, plan.post_masks, cameras, depth, cfg.seeds);
    out.n_seeds = seeds.size();
    intermediate.gaussians.insert(intermediate.gaussians.end(), seeds.begin(), seeds.end());
  }
  std::vector<bool> frozen(intermediate.size(), false);
  std::fill(frozen.begin(), frozen.begin() + static_cast<std::ptrdiff_t>(out.removal.scene.size()),
            true);
  out.optimization = masked_optimize(intermediate, frozen, post_imgs, plan.post_masks, cameras,
                                     background, plan.optimizer, opts);
  out.splice = splice(pre_scene, out.removal, out.optimization.scene, cameras, plan.post_masks,
                      post_imgs, background, cfg.splice_prune, opts);
  return out;
}

std::string format_splice_report(const SpliceReport& r) {
  std::ostringstream os;
  os << "n_removed " << r.n_removed << "\n"
     << "n_added " << r.n_added << "\n"
     << "n_frozen_touched " << r.n_frozen_touched << "\n"
     << "empty_selection " << (r.empty_selection ? 1 : 0) << "\n"
     << "# view psnr_in_before psnr_in_after psnr_out_before psnr_out_after\n";
  char buf[160];
  for (const auto& v : r.views) {
    std::snprintf(buf, sizeof buf, "%d %.4f %.4f %.4f %.4f\n", v.view_id, v.in_before, v.in_after,
                  v.out_before, v.out_after);
    os << buf;
  }
  return os.str();
}

std::string to_string(OptimizerMethod m) { return m == OptimizerMethod::gd ? "gd" : "adam"; }

OptimizerMethod parse_optimizer_method(const std::string& s) {
  if (s == "gd") return OptimizerMethod::gd;
  if (s == "adam") return OptimizerMethod::adam;
  throw ContractError("unknown optimizer '" + s + "'");
}

}  // namespace gscd
