#include "gscd/segmentation.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <string>

#include "gscd/errors.hpp"
#include "gscd/image_io.hpp"

namespace gscd {

namespace {

std::vector<double> gaussian_kernel(double sigma) {
  const int r = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  std::vector<double> k(2 * r + 1);
  double sum = 0.0;
  for (int i = -r; i <= r; ++i) sum += k[i + r] = std::exp(-0.5 * i * i / (sigma * sigma));
  for (double& v : k) v /= sum;
  return k;
}

// Separable blur with clamped borders; returns interleaved RGB doubles.
std::vector<double> blur_rgb(const ImageBuffer& img, double sigma) {
  const int w = img.width, h = img.height;
  std::vector<double> src(img.pixels.begin(), img.pixels.end());
  if (sigma <= 0.0) return src;
  const auto k = gaussian_kernel(sigma);
  const int r = static_cast<int>(k.size() / 2);
  std::vector<double> tmp(src.size());
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c) {
        double acc = 0.0;
        for (int i = -r; i <= r; ++i) {
          const int xx = std::clamp(x + i, 0, w - 1);
          acc += k[i + r] * src[(static_cast<std::size_t>(y) * w + xx) * 3 + c];
        }
        tmp[(static_cast<std::size_t>(y) * w + x) * 3 + c] = acc;
      }
  std::vector<double> out(src.size());
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c) {
        double acc = 0.0;
        for (int i = -r; i <= r; ++i) {
          const int yy = std::clamp(y + i, 0, h - 1);
          acc += k[i + r] * tmp[(static_cast<std::size_t>(yy) * w + x) * 3 + c];
        }
        out[(static_cast<std::size_t>(y) * w + x) * 3 + c] = acc;
      }
  return out;
}

constexpr int kUnlabeled = -1;

}  // namespace

std::vector<ChangeMask> connected_components(const ChangeMask& mask) {
  const int w = mask.width(), h = mask.height();
  std::vector<int> label(mask.size(), kUnlabeled);
  std::vector<ChangeMask> out;
  std::vector<std::size_t> stack;
  for (std::size_t start = 0; start < mask.size(); ++start) {
    if (!mask.get(start) || label[start] != kUnlabeled) continue;
    const int id = static_cast<int>(out.size());
    ChangeMask comp(w, h);
    stack.assign(1, start);
    label[start] = id;
    while (!stack.empty()) {
      const std::size_t p = stack.back();
      stack.pop_back();
      comp.set(p);
      const int x = static_cast<int>(p % w), y = static_cast<int>(p / w);
      const std::array<std::array<int, 2>, 4> nb{{{x - 1, y}, {x + 1, y}, {x, y - 1}, {x, y + 1}}};
      for (const auto& [nx, ny] : nb) {
        if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
        const std::size_t q = static_cast<std::size_t>(ny) * w + nx;
        if (mask.get(q) && label[q] == kUnlabeled) {
          label[q] = id;
          stack.push_back(q);
        }
      }
    }
    out.push_back(std::move(comp));
  }
  return out;
}

SegmentationProposals propose_segments(const ImageBuffer& img, const SegmentParams& params,
                                       int view_id) {
  if (!(params.merge_tolerance > 0.0) || params.min_area < 1) {
    throw ContractError("propose_segments: merge_tolerance and min_area must be positive");
  }
  const int w = img.width, h = img.height;
  const std::size_t n = img.pixel_count();
  SegmentationProposals out;
  out.view_id = view_id;
  if (n == 0) return out;

  const auto blurred = blur_rgb(img, params.blur_sigma);
  const auto value = [&](int x, int y, int c) {
    return blurred[(static_cast<std::size_t>(y) * w + x) * 3 + c];
  };

  std::vector<std::uint8_t> edge(n, 0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const std::size_t p = static_cast<std::size_t>(y) * w + x;
      double g2max = 0.0;
      for (int c = 0; c < 3; ++c) {
        const double gx = 0.5 * (value(std::min(x + 1, w - 1), y, c) - value(std::max(x - 1, 0), y, c));
        const double gy = 0.5 * (value(x, std::min(y + 1, h - 1), c) - value(x, std::max(y - 1, 0), c));
        g2max = std::max(g2max, gx * gx + gy * gy);
      }
      edge[p] = std::sqrt(g2max) > params.edge_threshold ? 1 : 0;
    }

  const auto close = [&](std::size_t p, std::size_t q) {
    for (int c = 0; c < 3; ++c)
      if (std::abs(blurred[p * 3 + c] - blurred[q * 3 + c]) >= params.merge_tolerance) return false;
    return true;
  };

  // Flood non-edge pixels whose neighbors differ by less than the tolerance.
  std::vector<int> label(n, kUnlabeled);
  std::vector<std::size_t> area;
  std::vector<std::size_t> stack;
  for (std::size_t start = 0; start < n; ++start) {
    if (edge[start] || label[start] != kUnlabeled) continue;
    const int id = static_cast<int>(area.size());
    area.push_back(0);
    stack.assign(1, start);
    label[start] = id;
    while (!stack.empty()) {
      const std::size_t p = stack.back();
      stack.pop_back();
      ++area[id];
      const int x = static_cast<int>(p % w), y = static_cast<int>(p / w);
      const std::array<std::array<int, 2>, 4> nb{{{x - 1, y}, {x + 1, y}, {x, y - 1}, {x, y + 1}}};
      for (const auto& [nx, ny] : nb) {
        if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
        const std::size_t q = static_cast<std::size_t>(ny) * w + nx;
        if (!edge[q] && label[q] == kUnlabeled && close(p, q)) {
          label[q] = id;
          stack.push_back(q);
        }
      }
    }
  }

  // Keep large regions, renumbered in first-pixel order.
  std::vector<int> remap(area.size(), kUnlabeled);
  int kept = 0;
  for (std::size_t i = 0; i < area.size(); ++i) {
    if (area[i] >= static_cast<std::size_t>(params.min_area)) remap[i] = kept++;
  }
  for (int& l : label) l = l == kUnlabeled ? kUnlabeled : remap[l];
  if (kept == 0) return out;

  std::vector<std::array<double, 3>> mean(kept, {0.0, 0.0, 0.0});
  std::vector<std::size_t> count(kept, 0);
  for (std::size_t p = 0; p < n; ++p) {
    if (label[p] == kUnlabeled) continue;
    for (int c = 0; c < 3; ++c) mean[label[p]][c] += blurred[p * 3 + c];
    ++count[label[p]];
  }
  for (int i = 0; i < kept; ++i)
    for (int c = 0; c < 3; ++c) mean[i][c] /= static_cast<double>(count[i]);

  // Grow labels one ring at a time; each unlabeled pixel takes the
  // neighboring region whose mean color is closest.
  bool changed = true;
  while (changed) {
    changed = false;
    std::vector<int> next = label;
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const std::size_t p = static_cast<std::size_t>(y) * w + x;
        if (label[p] != kUnlabeled) continue;
        int best = kUnlabeled;
        double best_d = std::numeric_limits<double>::infinity();
        const std::array<std::array<int, 2>, 4> nb{{{x - 1, y}, {x + 1, y}, {x, y - 1}, {x, y + 1}}};
        for (const auto& [nx, ny] : nb) {
          if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
          const int l = label[static_cast<std::size_t>(ny) * w + nx];
          if (l == kUnlabeled) continue;
          double d = 0.0;
          for (int c = 0; c < 3; ++c) {
            const double diff = blurred[p * 3 + c] - mean[l][c];
            d += diff * diff;
          }
          if (d < best_d || (d == best_d && l < best)) {
            best_d = d;
            best = l;
          }
        }
        if (best != kUnlabeled) {
          next[p] = best;
          changed = true;
        }
      }
    label.swap(next);
  }

  out.masks.assign(kept, ChangeMask(w, h));
  for (std::size_t p = 0; p < n; ++p) {
    if (label[p] != kUnlabeled) out.masks[label[p]].set(p);
  }
  return out;
}

SegmentationProposals load_proposals(const std::filesystem::path& dir, int view_id, int width,
                                     int height) {
  namespace fs = std::filesystem;
  SegmentationProposals out;
  out.view_id = view_id;
  out.source = ProposalSource::external;
  const fs::path view_dir = dir / ("view_" + std::to_string(view_id));
  if (!fs::is_directory(view_dir)) return out;
  std::vector<std::pair<long, fs::path>> files;
  for (const auto& entry : fs::directory_iterator(view_dir)) {
    const std::string name = entry.path().filename().string();
    if (name.rfind("mask_", 0) != 0 || entry.path().extension() != ".pgm") continue;
    const std::string num = name.substr(5, name.size() - 9);
    try {
      std::size_t used = 0;
      const long k = std::stol(num, &used);
      if (used == num.size()) files.emplace_back(k, entry.path());
    } catch (const std::exception&) {
    }
  }
  std::sort(files.begin(), files.end());
  for (const auto& [k, path] : files) {
    ChangeMask m = read_pgm(path);
    if (m.width() != width || m.height() != height) {
      throw ContractError(path.string() + ": proposal size does not match the view");
    }
    out.masks.push_back(std::move(m));
  }
  return out;
}

void save_proposals(const SegmentationProposals& p, const std::filesystem::path& dir) {
  const auto view_dir = dir / ("view_" + std::to_string(p.view_id));
  std::filesystem::create_directories(view_dir);
  for (std::size_t k = 0; k < p.masks.size(); ++k) {
    write_pgm(p.masks[k], view_dir / ("mask_" + std::to_string(k) + ".pgm"));
  }
}

double mask_iou(const ChangeMask& a, const ChangeMask& b) {
  if (!a.same_size(b)) throw ContractError("mask_iou: size mismatch");
  std::size_t inter = 0, uni = 0;
  const auto& ab = a.bits();
  const auto& bb = b.bits();
  for (std::size_t i = 0; i < ab.size(); ++i) {
    inter += (ab[i] && bb[i]) ? 1 : 0;
    uni += (ab[i] || bb[i]) ? 1 : 0;
  }
  return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

ValidationResult validate(const ChangeMask& projected, const SegmentationProposals& proposals,
                          double min_iou) {
  ValidationResult best;
  std::size_t best_area = 0;
  for (std::size_t k = 0; k < proposals.masks.size(); ++k) {
    const ChangeMask& m = proposals.masks[k];
    if (!m.same_size(projected)) throw ContractError("validate: proposal size mismatch");
    const double iou = mask_iou(projected, m);
    if (iou < min_iou || iou <= 0.0) continue;
    const std::size_t area = m.count();
    if (best.index < 0 || iou > best.iou || (iou == best.iou && area < best_area)) {
      best.index = static_cast<int>(k);
      best.iou = iou;
      best_area = area;
    }
  }
  if (best.index >= 0) best.mask = proposals.masks[best.index];
  return best;
}

}  // namespace gscd
