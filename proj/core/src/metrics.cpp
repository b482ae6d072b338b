#include "gscd/metrics.hpp"

#include <cmath>

#include "gscd/errors.hpp"

namespace gscd {

double f1_score(double precision, double recall) {
  if (precision + recall <= 0.0) return 0.0;
  return 2.0 * precision * recall / (precision + recall);
}

DetectionMetrics detection_metrics(const ChangeMask& pred, const ChangeMask& gt) {
  if (!pred.same_size(gt)) throw ContractError("prediction and ground truth differ in size");
  DetectionMetrics m;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const bool p = pred.get(i), g = gt.get(i);
    if (p && g) ++m.tp;
    else if (p) ++m.fp;
    else if (g) ++m.fn;
  }
  const std::size_t n_pred = m.tp + m.fp;
  const std::size_t n_gt = m.tp + m.fn;
  if (n_pred == 0 && n_gt == 0) {
    m.both_empty = true;
    m.precision = m.recall = m.f1 = m.iou = 1.0;
    return m;
  }
  m.precision = n_pred == 0 ? 0.0 : static_cast<double>(m.tp) / static_cast<double>(n_pred);
  m.recall = n_gt == 0 ? 0.0 : static_cast<double>(m.tp) / static_cast<double>(n_gt);
  m.f1 = f1_score(m.precision, m.recall);
  m.iou = static_cast<double>(m.tp) / static_cast<double>(m.tp + m.fp + m.fn);
  return m;
}

DetectionMetrics aggregate(const std::vector<DetectionMetrics>& metrics, AggregateMode mode) {
  if (metrics.empty()) throw ContractError("cannot aggregate an empty metric list");
  DetectionMetrics out;
  for (const auto& m : metrics) {
    out.tp += m.tp;
    out.fp += m.fp;
    out.fn += m.fn;
  }
  if (mode == AggregateMode::mean_of_views) {
    const double n = static_cast<double>(metrics.size());
    bool all_empty = true;
    for (const auto& m : metrics) {
      out.precision += m.precision;
      out.recall += m.recall;
      out.f1 += m.f1;
      out.iou += m.iou;
      all_empty = all_empty && m.both_empty;
    }
    out.precision /= n;
    out.recall /= n;
    out.f1 /= n;
    out.iou /= n;
    out.both_empty = all_empty;
    return out;
  }
  const std::size_t n_pred = out.tp + out.fp;
  const std::size_t n_gt = out.tp + out.fn;
  if (n_pred == 0 && n_gt == 0) {
    out.both_empty = true;
    out.precision = out.recall = out.f1 = out.iou = 1.0;
    return out;
  }
  out.precision = n_pred == 0 ? 0.0 : static_cast<double>(out.tp) / static_cast<double>(n_pred);
  out.recall = n_gt == 0 ? 0.0 : static_cast<double>(out.tp) / static_cast<double>(n_gt);
  out.f1 = f1_score(out.precision, out.recall);
  out.iou = static_cast<double>(out.tp) / static_cast<double>(out.tp + out.fp + out.fn);
  return out;
}

namespace {

template <class InRegion>
double psnr_over(const ImageBuffer& a, const ImageBuffer& b, InRegion&& in_region) {
  if (!a.same_size(b)) throw ContractError("psnr: image sizes differ");
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t p = 0; p < a.pixel_count(); ++p) {
    if (!in_region(p)) continue;
    for (int c = 0; c < 3; ++c) {
      const double d = static_cast<double>(a.pixels[p * 3 + c]) - b.pixels[p * 3 + c];
      sum += d * d;
    }
    n += 3;
  }
  if (n == 0) throw ContractError("psnr: empty region");
  if (sum == 0.0) return kPsnrIdentical;
  return 10.0 * std::log10(1.0 / (sum / static_cast<double>(n)));
}

}  // namespace

double psnr(const ImageBuffer& a, const ImageBuffer& b) {
  return psnr_over(a, b, [](std::size_t) { return true; });
}

double psnr(const ImageBuffer& a, const ImageBuffer& b, const ChangeMask& region) {
  if (!region.same_size(a)) throw ContractError("psnr: region size differs");
  return psnr_over(a, b, [&](std::size_t p) { return region.get(p); });
}

double psnr(const ImageBuffer& a, const ImageBuffer& b, const PixelRect& region) {
  const int w = a.width;
  return psnr_over(a, b, [&](std::size_t p) {
    const int x = static_cast<int>(p % static_cast<std::size_t>(w));
    const int y = static_cast<int>(p / static_cast<std::size_t>(w));
    return x >= region.x0 && x < region.x1 && y >= region.y0 && y < region.y1;
  });
}

std::vector<double> ssim_map(const std::vector<double>& a, const std::vector<double>& b, int width,
                             int height, int window, double sigma) {
  if (a.size() != b.size() || a.size() != static_cast<std::size_t>(width) * height) {
    throw ContractError("ssim: input sizes differ");
  }
  constexpr double c1 = 0.01 * 0.01;
  constexpr double c2 = 0.03 * 0.03;
  const int r = window / 2;
  std::vector<double> kernel(static_cast<std::size_t>(window));
  for (int k = -r; k <= r; ++k) {
    kernel[static_cast<std::size_t>(k + r)] = std::exp(-0.5 * k * k / (sigma * sigma));
  }

  // Separable weighted moments; weights renormalized where the window is cut.
  const auto blur = [&](const std::vector<double>& src) {
    std::vector<double> tmp(src.size()), out(src.size());
    for (int y = 0; y < height; ++y) {
      for (int x = 0; x < width; ++x) {
        double s = 0.0, wsum = 0.0;
        for (int k = -r; k <= r; ++k) {
          const int xx = x + k;
          if (xx < 0 || xx >= width) continue;
          const double w = kernel[static_cast<std::size_t>(k + r)];
          s += w * src[static_cast<std::size_t>(y) * width + xx];
          wsum += w;
        }
        tmp[static_cast<std::size_t>(y) * width + x] = s / wsum;
      }
    }
    for (int y = 0; y < height; ++y) {
      for (int x = 0; x < width; ++x) {
        double s = 0.0, wsum = 0.0;
        for (int k = -r; k <= r; ++k) {
          const int yy = y + k;
          if (yy < 0 || yy >= height) continue;
          const double w = kernel[static_cast<std::size_t>(k + r)];
          s += w * tmp[static_cast<std::size_t>(yy) * width + x];
          wsum += w;
        }
        out[static_cast<std::size_t>(y) * width + x] = s / wsum;
      }
    }
    return out;
  };

  std::vector<double> aa(a.size()), bb(a.size()), ab(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    aa[i] = a[i] * a[i];
    bb[i] = b[i] * b[i];
    ab[i] = a[i] * b[i];
  }
  const auto mu_a = blur(a), mu_b = blur(b);
  const auto e_aa = blur(aa), e_bb = blur(bb), e_ab = blur(ab);
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double va = e_aa[i] - mu_a[i] * mu_a[i];
    const double vb = e_bb[i] - mu_b[i] * mu_b[i];
    const double cov = e_ab[i] - mu_a[i] * mu_b[i];
    out[i] = ((2.0 * mu_a[i] * mu_b[i] + c1) * (2.0 * cov + c2)) /
             ((mu_a[i] * mu_a[i] + mu_b[i] * mu_b[i] + c1) * (va + vb + c2));
  }
  return out;
}

double ssim(const ImageBuffer& a, const ImageBuffer& b, int window, double sigma) {
  if (!a.same_size(b)) throw ContractError("ssim: image sizes differ");
  if (a.width < window || a.height < window) {
    throw ContractError("ssim: image smaller than the window");
  }
  const auto map = ssim_map(luminance(a), luminance(b), a.width, a.height, window, sigma);
  const int r = window / 2;
  double sum = 0.0;
  std::size_t n = 0;
  for (int y = r; y < a.height - r; ++y) {
    for (int x = r; x < a.width - r; ++x) {
      sum += map[static_cast<std::size_t>(y) * a.width + x];
      ++n;
    }
  }
  return sum / static_cast<double>(n);
}

ImageBuffer crop(const ImageBuffer& img, const PixelRect& rect) {
  if (rect.empty() || rect.x0 < 0 || rect.y0 < 0 || rect.x1 > img.width || rect.y1 > img.height) {
    throw ContractError("crop rectangle outside image");
  }
  ImageBuffer out(rect.x1 - rect.x0, rect.y1 - rect.y0);
  for (int y = rect.y0; y < rect.y1; ++y) {
    for (int x = rect.x0; x < rect.x1; ++x) {
      const std::size_t src = static_cast<std::size_t>(y) * img.width + x;
      const std::size_t dst = static_cast<std::size_t>(y - rect.y0) * out.width + (x - rect.x0);
      for (int c = 0; c < 3; ++c) out.pixels[dst * 3 + c] = img.pixels[src * 3 + c];
      out.final_transmittance[dst] = img.final_transmittance[src];
    }
  }
  return out;
}

std::string to_string(AggregateMode mode) {
  return mode == AggregateMode::mean_of_views ? "mean_of_views" : "pooled_pixels";
}

}  // namespace gscd
