#pragma once

#include <filesystem>
#include <optional>
#include <vector>

#include "gscd/image.hpp"

namespace gscd {

enum class ProposalSource { builtin, external };

struct SegmentationProposals {
  int view_id = 0;
  ProposalSource source = ProposalSource::builtin;
  std::vector<ChangeMask> masks;
};

struct SegmentParams {
  double blur_sigma = 1.0;
  double edge_threshold = 0.08;  // gradient magnitude of the blurred image
  int min_area = 20;
  double merge_tolerance = 0.03;  // max per-channel step between joined neighbors
};

// Deterministic region proposals: blur, cut at gradient edges, flood
// 4-neighbors within a color tolerance, drop small regions and grow the
// survivors back over unlabeled pixels by nearest mean color.
SegmentationProposals propose_segments(const ImageBuffer& img, const SegmentParams& params,
                                       int view_id = 0);

// Reads <dir>/view_<id>/mask_<k>.pgm in ascending k.
SegmentationProposals load_proposals(const std::filesystem::path& dir, int view_id, int width,
                                     int height);
void save_proposals(const SegmentationProposals& p, const std::filesystem::path& dir);

double mask_iou(const ChangeMask& a, const ChangeMask& b);

struct ValidationResult {
  std::optional<ChangeMask> mask;  // nullopt: nothing reached min_iou
  int index = -1;
  double iou = 0.0;
};

// Picks the proposal with the highest IoU against `projected`; ties go to
// the smaller area, then the lower index.
ValidationResult validate(const ChangeMask& projected, const SegmentationProposals& proposals,
                          double min_iou = 0.3);

// 4-connected components of a mask, in scan order of their first pixel.
std::vector<ChangeMask> connected_components(const ChangeMask& mask);

}  // namespace gscd
