#include "gscd/diff3d.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "binary_io.hpp"
#include "gscd/errors.hpp"
#include "gscd/parallel.hpp"

namespace gscd {

ViewVote vote_single_view(const ContributionRecord& record, const ChangeMask& mask) {
  if (mask.width() != record.width || mask.height() != record.height) {
    throw ContractError("vote_single_view: mask does not match record dimensions");
  }
  std::size_t n = 0;
  for (const auto& e : record.entries) n = std::max<std::size_t>(n, e.gaussian_index + 1);
  // Entries are summed in record order so the result matches a direct
  // per-pixel recomputation that walks the same record.
  std::vector<double> s(n, 0.0), vis(n, 0.0);
  for (const auto& e : record.entries) {
    const double w = static_cast<double>(e.alpha) * static_cast<double>(e.transmittance_before);
    vis[e.gaussian_index] += w;
    if (mask.get(static_cast<std::size_t>(e.pixel_index))) s[e.gaussian_index] += w;
  }
  ViewVote v;
  v.view_id = record.view_id;
  for (std::size_t i = 0; i < n; ++i) {
    if (s[i] > 0.0) {
      v.s_column.emplace_back(static_cast<GaussianIndex>(i), s[i]);
      v.w_max = std::max(v.w_max, s[i]);
    }
    if (vis[i] > 0.0) v.visibility.emplace_back(static_cast<GaussianIndex>(i), vis[i]);
  }
  v.skipped = !mask.any() || !(v.w_max > 0.0);
  return v;
}

void finalize_weights(VoteAccumulator& acc, VoteMode mode) {
  acc.weight.assign(acc.size(), 0.0);
  for (std::size_t i = 0; i < acc.size(); ++i) {
    const double divisor =
        mode == VoteMode::uniform ? static_cast<double>(acc.n_views_used) : acc.n_seen[i];
    if (divisor > 0.0 && acc.n_seen[i] > 0) {
      acc.weight[i] = std::min(1.0, acc.sum_norm_contrib[i] / divisor);
    }
  }
}

VoteAccumulator accumulate_votes(std::vector<ViewVote> views, std::size_t gaussian_count,
                                 VoteMode mode, const PruneConfig& cfg) {
  VoteAccumulator acc;
  acc.sum_norm_contrib.assign(gaussian_count, 0.0);
  acc.n_seen.assign(gaussian_count, 0);
  acc.n_out.assign(gaussian_count, 0);
  std::vector<std::uint8_t> seen_here(gaussian_count, 0);
  for (const ViewVote& v : views) {
    if (v.skipped) continue;
    ++acc.n_views_used;
    std::fill(seen_here.begin(), seen_here.end(), 0);
    for (const auto& [idx, total] : v.visibility) {
      if (idx >= gaussian_count) throw ContractError("vote references a Gaussian outside the scene");
      if (total >= cfg.seen_epsilon) seen_here[idx] = 1;
    }
    for (const auto& [idx, s] : v.s_column) {
      if (idx >= gaussian_count) throw ContractError("vote references a Gaussian outside the scene");
      acc.sum_norm_contrib[idx] += s / v.w_max;
      // A Gaussian that casts a vote in this view is seen in it.
      seen_here[idx] = 1;
    }
    for (std::size_t i = 0; i < gaussian_count; ++i) acc.n_seen[i] += seen_here[i];
  }
  acc.views = std::move(views);
  if (acc.n_views_used == 0) throw EmptyVoteError("every view was skipped (empty masks)");
  finalize_weights(acc, mode);
  return acc;
}

VoteAccumulator vote_multi_view(const std::vector<ContributionRecord>& records,
                                const std::vector<ChangeMask>& masks, std::size_t gaussian_count,
                                VoteMode mode, const PruneConfig& cfg, int threads) {
  if (records.size() != masks.size()) {
    throw ContractError("vote_multi_view: records and masks are not aligned");
  }
  std::vector<ViewVote> views(records.size());
  parallel_for(records.size(), threads,
               [&](std::size_t k) { views[k] = vote_single_view(records[k], masks[k]); });
  return accumulate_votes(std::move(views), gaussian_count, mode, cfg);
}

DiffSelection select_by_weight(const VoteAccumulator& acc, double weight_floor) {
  DiffSelection sel;
  for (std::size_t i = 0; i < acc.weight.size(); ++i) {
    if (acc.weight[i] > 0.0 && acc.weight[i] >= weight_floor) {
      sel.indices.push_back(static_cast<GaussianIndex>(i));
      sel.weights.push_back(static_cast<float>(acc.weight[i]));
    }
  }
  return sel;
}

PruneResult prune_multi_view(const GaussianScene& scene, const DiffSelection& selection,
                             const CameraSet& cameras, const std::vector<ChangeMask>& masks,
                             const PruneConfig& cfg, const RenderOptions& opts) {
  if (cameras.size() != masks.size()) {
    throw ContractError("prune_multi_view: cameras and masks are not aligned");
  }
  for (std::size_t k = 0; k < masks.size(); ++k) {
    if (masks[k].width() != cameras.cameras[k].width ||
        masks[k].height() != cameras.cameras[k].height) {
      throw ContractError("prune_multi_view: mask does not match camera size");
    }
  }
  PruneResult out;
  out.n_seen.assign(selection.size(), 0);
  out.n_out.assign(selection.size(), 0);
  std::vector<std::uint8_t> keep(selection.size(), 0);
  parallel_for(selection.size(), opts.threads, [&](std::size_t j) {
    const GaussianIndex idx = selection.indices[j];
    if (idx >= scene.size()) throw ContractError("selection index outside the scene");
    const Vec3& mu = scene.gaussians[idx].position;
    std::uint32_t seen = 0, outside = 0;
    for (std::size_t k = 0; k < masks.size(); ++k) {
      const auto px = cameras.cameras[k].project(mu, opts.near_plane);
      if (!px || !cameras.cameras[k].contains(*px)) continue;
      ++seen;
      const int x = static_cast<int>(std::floor(px->x()));
      const int y = static_cast<int>(std::floor(px->y()));
      if (!masks[k].get(x, y)) ++outside;
    }
    out.n_seen[j] = seen;
    out.n_out[j] = outside;
    keep[j] = static_cast<double>(outside) > cfg.tau * static_cast<double>(seen) ? 0 : 1;
  });
  for (std::size_t j = 0; j < selection.size(); ++j) {
    if (!keep[j]) continue;
    out.kept.indices.push_back(selection.indices[j]);
    out.kept.weights.push_back(selection.weights[j]);
  }
  out.stats.n_selected = selection.size();
  out.stats.n_pruned = selection.size() - out.kept.size();
  out.stats.degenerate = selection.empty();
  out.stats.retention =
      selection.empty() ? 0.0
                        : static_cast<double>(out.stats.n_selected - out.stats.n_pruned) /
                              static_cast<double>(out.stats.n_selected);
  return out;
}

DirectionAssignment resolve_direction(const RetentionStats& m1, const RetentionStats& m2) {
  DirectionAssignment a;
  const auto assign_pre = [&](MaskFamily pre) {
    a.pre_family = pre;
    a.post_family = pre == MaskFamily::m1 ? MaskFamily::m2 : MaskFamily::m1;
  };
  if (m1.degenerate && m2.degenerate) {
    a.no_change = true;
    a.note = "no Gaussians selected by either family";
    return a;
  }
  // A family with nothing left after pruning has no 3D support.
  const bool s1 = m1.n_selected > m1.n_pruned, s2 = m2.n_selected > m2.n_pruned;
  if (!s1 && !s2) {
    a.ambiguous = true;
    assign_pre(m1.n_selected >= m2.n_selected ? MaskFamily::m2 : MaskFamily::m1);
    a.note = "both families fully pruned; larger family assigned post-change";
    return a;
  }
  if (s1 != s2) {
    const MaskFamily live = s1 ? MaskFamily::m1 : MaskFamily::m2;
    const double r = s1 ? m1.retention : m2.retention;
    const MaskFamily other = live == MaskFamily::m1 ? MaskFamily::m2 : MaskFamily::m1;
    assign_pre(r >= kSingleFamilyRetention ? live : other);
    a.note = "single supported family " + to_string(live) + " with R=" + std::to_string(r);
    return a;
  }
  const double delta = m1.retention - m2.retention;
  if (std::abs(delta) < kDirectionTieMargin) {
    a.ambiguous = true;
    assign_pre(m1.n_selected >= m2.n_selected ? MaskFamily::m1 : MaskFamily::m2);
    a.note = "retention gap " + std::to_string(delta) + " below margin; assigned by larger N";
    return a;
  }
  assign_pre(delta > 0.0 ? MaskFamily::m1 : MaskFamily::m2);
  return a;
}

ChangeMask project_selection(const GaussianScene& scene, const DiffSelection& selection,
                             const PinholeCamera& cam, double render_threshold,
                             const RenderOptions& opts) {
  ChangeMask mask(cam.width, cam.height);
  if (selection.empty()) return mask;
  std::vector<double> payload(scene.size(), 0.0);
  for (GaussianIndex i : selection.indices) {
    if (i >= scene.size()) throw ContractError("selection index outside the scene");
    payload[i] = 1.0;
  }
  const auto accumulated = render_payload(scene, cam, payload, opts);
  for (std::size_t p = 0; p < accumulated.size(); ++p) {
    if (accumulated[p] >= render_threshold) mask.set(p);
  }
  return mask;
}

void save_selection(const DiffSelection& sel, const std::filesystem::path& path) {
  if (sel.indices.size() != sel.weights.size()) {
    throw ContractError("selection indices and weights differ in length");
  }
  detail::ByteWriter w;
  w.magic("GDIF");
  w.u32(static_cast<std::uint32_t>(sel.size()));
  for (std::size_t i = 0; i < sel.size(); ++i) {
    w.u32(sel.indices[i]);
    w.f32(sel.weights[i]);
  }
  w.write_file(path);
}

DiffSelection load_selection(const std::filesystem::path& path) {
  auto r = detail::ByteReader::from_file(path);
  r.expect_magic("GDIF");
  const std::uint32_t count = r.u32();
  if (r.remaining() != static_cast<std::size_t>(count) * 8) {
    throw FormatError(path.string() + ": GDIF payload size mismatch");
  }
  DiffSelection sel;
  sel.indices.resize(count);
  sel.weights.resize(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    sel.indices[i] = r.u32();
    sel.weights[i] = r.f32();
    if (!std::isfinite(sel.weights[i]) || sel.weights[i] < 0.0f || sel.weights[i] > 1.0f) {
      throw DataError(path.string() + ": selection weight outside [0,1]");
    }
  }
  return sel;
}

std::string format_retention(const RetentionStats& stats) {
  char buf[128];
  std::snprintf(buf, sizeof buf, "N=%zu N_p=%zu R=%.6f", stats.n_selected, stats.n_pruned,
                stats.retention);
  return buf;
}

RetentionStats parse_retention(const std::string& line) {
  RetentionStats s;
  if (std::sscanf(line.c_str(), "N=%zu N_p=%zu R=%lf", &s.n_selected, &s.n_pruned,
                  &s.retention) != 3) {
    throw ParseError("expected 'N=<n> N_p=<n> R=<r>'", 1);
  }
  s.degenerate = s.n_selected == 0;
  return s;
}

std::string to_string(VoteMode mode) {
  return mode == VoteMode::uniform ? "uniform" : "visibility_aware";
}

VoteMode parse_vote_mode(const std::string& s) {
  if (s == "uniform") return VoteMode::uniform;
  if (s == "visibility_aware") return VoteMode::visibility_aware;
  throw ContractError("unknown vote mode '" + s + "'");
}

std::string to_string(MaskFamily f) { return f == MaskFamily::m1 ? "m1" : "m2"; }

}  // namespace gscd
