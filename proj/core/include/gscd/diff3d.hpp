#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "gscd/camera.hpp"
#include "gscd/image.hpp"
#include "gscd/renderer.hpp"
#include "gscd/scene.hpp"

namespace gscd {

// Masked contribution of every Gaussian in one view (S_i^k) and its maximum.
struct ViewVote {
  int view_id = 0;
  bool skipped = false;  // empty mask or zero maximum
  double w_max = 0.0;
  // Sparse S column sorted by gaussian index; zero entries omitted.
  std::vector<std::pair<GaussianIndex, double>> s_column;
  // Sparse mask-independent contribution sum per Gaussian, sorted by index.
  std::vector<std::pair<GaussianIndex, double>> visibility;
};

ViewVote vote_single_view(const ContributionRecord& record, const ChangeMask& mask);

enum class VoteMode { uniform, visibility_aware };

struct PruneConfig {
  double tau = 0.5;
  double seen_epsilon = 1e-4;
  double weight_floor = 0.1;
};

struct VoteAccumulator {
  std::vector<double> sum_norm_contrib;  // sum_k S_i^k / w_max^k over used views
  std::vector<std::uint32_t> n_seen;
  std::vector<std::uint32_t> n_out;      // filled by pruning
  std::vector<double> weight;
  std::vector<ViewVote> views;
  std::uint32_t n_views_used = 0;        // non-skipped views

  std::size_t size() const { return sum_norm_contrib.size(); }
};

// Folds single-view votes in view order and finalizes weights.
VoteAccumulator accumulate_votes(std::vector<ViewVote> views, std::size_t gaussian_count,
                                 VoteMode mode, const PruneConfig& cfg);

// Recomputes `weight` from sum_norm_contrib, n_seen and n_views_used.
void finalize_weights(VoteAccumulator& acc, VoteMode mode);

// Throws EmptyVoteError when every view is skipped.
VoteAccumulator vote_multi_view(const std::vector<ContributionRecord>& records,
                                const std::vector<ChangeMask>& masks, std::size_t gaussian_count,
                                VoteMode mode, const PruneConfig& cfg, int threads = 1);

struct DiffSelection {
  std::vector<GaussianIndex> indices;  // ascending
  std::vector<float> weights;

  std::size_t size() const { return indices.size(); }
  bool empty() const { return indices.empty(); }
};

DiffSelection select_by_weight(const VoteAccumulator& acc, double weight_floor);

struct RetentionStats {
  std::size_t n_selected = 0;
  std::size_t n_pruned = 0;
  double retention = 0.0;
  bool degenerate = false;  // n_selected == 0
};

struct PruneResult {
  DiffSelection kept;
  RetentionStats stats;
  std::vector<std::uint32_t> n_seen;  // per selected Gaussian, aligned with input selection
  std::vector<std::uint32_t> n_out;
};

// Removes selected Gaussians whose centers fall outside the masks in more
// than tau of the views where the center projects inside the image.
PruneResult prune_multi_view(const GaussianScene& scene, const DiffSelection& selection,
                             const CameraSet& cameras, const std::vector<ChangeMask>& masks,
                             const PruneConfig& cfg, const RenderOptions& opts = {});

enum class MaskFamily { m1, m2 };

struct DirectionAssignment {
  MaskFamily pre_family = MaskFamily::m1;
  MaskFamily post_family = MaskFamily::m2;
  bool ambiguous = false;
  bool no_change = false;
  std::string note;
};

// Retention margin below which the two families are considered tied.
inline constexpr double kDirectionTieMargin = 0.05;
// When only one family keeps any Gaussian after pruning, its retention is
// compared with this reference instead of an unsupported partner.
inline constexpr double kSingleFamilyRetention = 0.75;

DirectionAssignment resolve_direction(const RetentionStats& m1, const RetentionStats& m2);

// Renders selection membership through the regular compositing and keeps
// pixels whose accumulated value reaches render_threshold.
ChangeMask project_selection(const GaussianScene& scene, const DiffSelection& selection,
                             const PinholeCamera& cam, double render_threshold = 0.5,
                             const RenderOptions& opts = {});

// GDIF: "GDIF", u32 count, count x (u32 index, f32 weight).
void save_selection(const DiffSelection& sel, const std::filesystem::path& path);
DiffSelection load_selection(const std::filesystem::path& path);

// "N=<n> N_p=<n> R=<r>"
std::string format_retention(const RetentionStats& stats);
RetentionStats parse_retention(const std::string& line);

std::string to_string(VoteMode mode);
VoteMode parse_vote_mode(const std::string& s);
std::string to_string(MaskFamily f);

}  // namespace gscd
