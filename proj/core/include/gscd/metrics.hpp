#pragma once

#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "gscd/image.hpp"

namespace gscd {

struct DetectionMetrics {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double iou = 0.0;
  bool both_empty = false;  // prediction and ground truth both empty
};

// Pixelwise counts. Both masks empty scores 1 everywhere (flagged); exactly
// one empty scores 0.
DetectionMetrics detection_metrics(const ChangeMask& pred, const ChangeMask& gt);

// f1 from precision and recall; 0 when both are 0.
double f1_score(double precision, double recall);

enum class AggregateMode { mean_of_views, pooled_pixels };

DetectionMetrics aggregate(const std::vector<DetectionMetrics>& metrics, AggregateMode mode);

inline constexpr double kPsnrIdentical = std::numeric_limits<double>::infinity();

// 10 log10(1 / MSE) with unit peak; +inf for identical inputs.
double psnr(const ImageBuffer& a, const ImageBuffer& b);
double psnr(const ImageBuffer& a, const ImageBuffer& b, const ChangeMask& region);
double psnr(const ImageBuffer& a, const ImageBuffer& b, const PixelRect& region);

// Per-pixel SSIM of two single-channel images using a Gaussian window.
// Windows are truncated and renormalized at the borders.
std::vector<double> ssim_map(const std::vector<double>& a, const std::vector<double>& b, int width,
                             int height, int window = 11, double sigma = 1.5);

// Mean SSIM over pixels whose full window fits inside the image, computed on
// luminance with c1 = 0.01^2, c2 = 0.03^2.
double ssim(const ImageBuffer& a, const ImageBuffer& b, int window = 11, double sigma = 1.5);

ImageBuffer crop(const ImageBuffer& img, const PixelRect& rect);

enum class RegionKind { full, crop };

struct ReconMetrics {
  double psnr = 0.0;
  double ssim = 0.0;
  RegionKind region = RegionKind::full;
};

std::string to_string(AggregateMode mode);

}  // namespace gscd
