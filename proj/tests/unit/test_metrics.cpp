#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "gscd/errors.hpp"
#include "gscd/metrics.hpp"
#include "oracles.hpp"

using namespace gscd;

namespace {

ImageBuffer noise_image(std::uint64_t seed, int w, int h) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  ImageBuffer img(w, h);
  for (auto& v : img.pixels) v = u(rng);
  return img;
}

std::vector<double> random_plane(std::mt19937_64& rng, int w, int h) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> v(static_cast<std::size_t>(w) * h);
  for (auto& x : v) x = u(rng);
  return v;
}

// Direct 2D Gaussian-window SSIM at one interior pixel.
double ssim_at(const std::vector<double>& a, const std::vector<double>& b, int w, int x, int y,
               int window, double sigma) {
  const int r = window / 2;
  double wsum = 0, ma = 0, mb = 0;
  for (int dy = -r; dy <= r; ++dy)
    for (int dx = -r; dx <= r; ++dx) {
      const double k = std::exp(-(dx * dx + dy * dy) / (2 * sigma * sigma));
      const std::size_t i = static_cast<std::size_t>(y + dy) * w + (x + dx);
      wsum += k;
      ma += k * a[i];
      mb += k * b[i];
    }
  ma /= wsum;
  mb /= wsum;
  double va = 0, vb = 0, cov = 0;
  for (int dy = -r; dy <= r; ++dy)
    for (int dx = -r; dx <= r; ++dx) {
      const double k = std::exp(-(dx * dx + dy * dy) / (2 * sigma * sigma)) / wsum;
      const std::size_t i = static_cast<std::size_t>(y + dy) * w + (x + dx);
      va += k * (a[i] - ma) * (a[i] - ma);
      vb += k * (b[i] - mb) * (b[i] - mb);
      cov += k * (a[i] - ma) * (b[i] - mb);
    }
  const double c1 = 1e-4, c2 = 9e-4;
  return (2 * ma * mb + c1) * (2 * cov + c2) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
}

}  // namespace

TEST(Detection, IdenticalMasksScoreOne) {
  std::mt19937_64 rng(1);
  const ChangeMask m = oracle::random_mask(rng, 30, 20, 0.3);
  const auto d = detection_metrics(m, m);
  EXPECT_EQ(d.fp, 0u);
  EXPECT_EQ(d.fn, 0u);
  EXPECT_EQ(d.tp, m.count());
  EXPECT_DOUBLE_EQ(d.precision, 1.0);
  EXPECT_DOUBLE_EQ(d.recall, 1.0);
  EXPECT_DOUBLE_EQ(d.f1, 1.0);
  EXPECT_DOUBLE_EQ(d.iou, 1.0);
  EXPECT_FALSE(d.both_empty);
}

TEST(Detection, DisjointMasksScoreZero) {
  const auto d = detection_metrics(oracle::rect_mask(10, 10, 0, 0, 5, 10), oracle::rect_mask(10, 10, 5, 0, 10, 10));
  EXPECT_EQ(d.tp, 0u);
  EXPECT_EQ(d.precision, 0.0);
  EXPECT_EQ(d.recall, 0.0);
  EXPECT_EQ(d.f1, 0.0);
  EXPECT_EQ(d.iou, 0.0);
}

TEST(Detection, HandWorkedExample) {
  // gt 100 px, prediction 100 px, overlap 50 px.
  const ChangeMask gt = oracle::rect_mask(40, 10, 0, 0, 10, 10);
  const ChangeMask pred = oracle::rect_mask(40, 10, 5, 0, 15, 10);
  const auto d = detection_metrics(pred, gt);
  EXPECT_EQ(d.tp, 50u);
  EXPECT_EQ(d.fp, 50u);
  EXPECT_EQ(d.fn, 50u);
  EXPECT_DOUBLE_EQ(d.precision, 0.5);
  EXPECT_DOUBLE_EQ(d.recall, 0.5);
  EXPECT_DOUBLE_EQ(d.f1, 0.5);
  EXPECT_DOUBLE_EQ(d.iou, 1.0 / 3.0);
}

TEST(Detection, EmptyConventions) {
  const ChangeMask empty(8, 8);
  const auto both = detection_metrics(empty, empty);
  EXPECT_TRUE(both.both_empty);
  EXPECT_EQ(both.f1, 1.0);
  EXPECT_EQ(both.iou, 1.0);
  const ChangeMask some = oracle::rect_mask(8, 8, 0, 0, 2, 2);
  const auto miss = detection_metrics(empty, some);
  EXPECT_FALSE(miss.both_empty);
  EXPECT_EQ(miss.f1, 0.0);
  EXPECT_EQ(miss.recall, 0.0);
  const auto spurious = detection_metrics(some, empty);
  EXPECT_EQ(spurious.f1, 0.0);
  EXPECT_EQ(spurious.precision, 0.0);
  EXPECT_THROW(detection_metrics(ChangeMask(8, 8), ChangeMask(8, 9)), ContractError);
}

TEST(Detection, RandomMasksMatchCountingOracle) {
  std::mt19937_64 rng(2);
  for (int t = 0; t < 50; ++t) {
    const ChangeMask a = oracle::random_mask(rng, 17, 13, 0.4);
    const ChangeMask b = oracle::random_mask(rng, 17, 13, 0.4);
    std::size_t tp = 0, fp = 0, fn = 0;
    for (std::size_t p = 0; p < a.size(); ++p) {
      tp += a.get(p) && b.get(p);
      fp += a.get(p) && !b.get(p);
      fn += !a.get(p) && b.get(p);
    }
    const auto d = detection_metrics(a, b);
    EXPECT_EQ(d.tp, tp);
    EXPECT_EQ(d.fp, fp);
    EXPECT_EQ(d.fn, fn);
    EXPECT_NEAR(d.f1, 2.0 * tp / (2.0 * tp + fp + fn), 1e-12);
    EXPECT_NEAR(d.iou, double(tp) / (tp + fp + fn), 1e-12);
  }
}

TEST(Aggregate, MeanAndPooledDiffer) {
  // View A: 1 px gt fully found. View B: 99 px gt, nothing predicted.
  DetectionMetrics a;
  a.tp = 1;
  a.precision = a.recall = a.f1 = a.iou = 1.0;
  DetectionMetrics b;
  b.fn = 99;
  const auto mean = aggregate({a, b}, AggregateMode::mean_of_views);
  EXPECT_DOUBLE_EQ(mean.f1, 0.5);
  EXPECT_DOUBLE_EQ(mean.recall, 0.5);
  const auto pooled = aggregate({a, b}, AggregateMode::pooled_pixels);
  EXPECT_EQ(pooled.tp, 1u);
  EXPECT_EQ(pooled.fn, 99u);
  EXPECT_DOUBLE_EQ(pooled.recall, 0.01);
  EXPECT_DOUBLE_EQ(pooled.precision, 1.0);
  EXPECT_NEAR(pooled.f1, 2.0 / 101.0, 1e-12);
  EXPECT_THROW(aggregate({}, AggregateMode::pooled_pixels), ContractError);
}

TEST(Aggregate, PooledEqualsMetricsOfConcatenatedMasks) {
  std::mt19937_64 rng(3);
  std::vector<DetectionMetrics> per;
  ChangeMask big_a(10, 30), big_b(10, 30);
  for (int v = 0; v < 3; ++v) {
    const ChangeMask a = oracle::random_mask(rng, 10, 10, 0.3);
    const ChangeMask b = oracle::random_mask(rng, 10, 10, 0.5);
    per.push_back(detection_metrics(a, b));
    for (int y = 0; y < 10; ++y)
      for (int x = 0; x < 10; ++x) {
        big_a.set(x, y + 10 * v, a.get(x, y));
        big_b.set(x, y + 10 * v, b.get(x, y));
      }
  }
  const auto pooled = aggregate(per, AggregateMode::pooled_pixels);
  const auto direct = detection_metrics(big_a, big_b);
  EXPECT_DOUBLE_EQ(pooled.f1, direct.f1);
  EXPECT_DOUBLE_EQ(pooled.iou, direct.iou);
}

TEST(Aggregate, AllEmptyViewsStayFlagged) {
  const ChangeMask e(4, 4);
  const auto m = detection_metrics(e, e);
  EXPECT_TRUE(aggregate({m, m}, AggregateMode::mean_of_views).both_empty);
  EXPECT_TRUE(aggregate({m, m}, AggregateMode::pooled_pixels).both_empty);
  EXPECT_EQ(aggregate({m, m}, AggregateMode::pooled_pixels).f1, 1.0);
}

TEST(Psnr, IdenticalIsInfinite) {
  const ImageBuffer a = noise_image(4, 16, 16);
  EXPECT_EQ(psnr(a, a), kPsnrIdentical);
  EXPECT_TRUE(std::isinf(psnr(a, a)));
}

TEST(Psnr, ConstantOffsetGivesKnownValue) {
  // MSE 0.01 -> 20 dB; 0.25 and 0.75 are exact in float.
  const ImageBuffer a(12, 9, Rgb(0.25, 0.25, 0.25));
  const ImageBuffer b(12, 9, Rgb(0.35, 0.35, 0.35));
  EXPECT_NEAR(psnr(a, b), 20.0, 1e-5);
  const ImageBuffer c(12, 9, Rgb(0.75, 0.75, 0.75));
  EXPECT_NEAR(psnr(a, c), 10.0 * std::log10(4.0), 1e-12);
}

TEST(Psnr, RegionsRestrictTheComparison) {
  ImageBuffer a(10, 10, Rgb(0.5, 0.5, 0.5));
  ImageBuffer b = a;
  for (int c = 0; c < 3; ++c) b.at(9, 9, c) = 0.0f;
  const PixelRect inside{0, 0, 5, 5};
  EXPECT_EQ(psnr(a, b, inside), kPsnrIdentical);
  EXPECT_EQ(psnr(a, b, oracle::rect_mask(10, 10, 0, 0, 9, 9)), kPsnrIdentical);
  EXPECT_NEAR(psnr(a, b, oracle::rect_mask(10, 10, 9, 9, 10, 10)), 10.0 * std::log10(4.0), 1e-12);
  EXPECT_EQ(psnr(crop(a, inside), crop(b, inside)), kPsnrIdentical);
  EXPECT_THROW(psnr(a, b, ChangeMask(10, 10)), ContractError);
  EXPECT_THROW(psnr(a, ImageBuffer(9, 10)), ContractError);
}

TEST(Psnr, DecreasesWithNoise) {
  const ImageBuffer a(32, 32, Rgb(0.5, 0.5, 0.5));
  std::mt19937_64 rng(5);
  std::normal_distribution<float> n(0.0f, 1.0f);
  std::vector<float> z(a.pixels.size());
  for (auto& v : z) v = n(rng);
  double last = kPsnrIdentical;
  for (double s : {0.01, 0.03, 0.1, 0.2}) {
    ImageBuffer b = a;
    for (std::size_t i = 0; i < z.size(); ++i) b.pixels[i] += static_cast<float>(s) * z[i];
    const double p = psnr(a, b);
    EXPECT_LT(p, last);
    last = p;
  }
}

TEST(Ssim, IdenticalIsOne) {
  const ImageBuffer a = noise_image(6, 24, 24);
  EXPECT_NEAR(ssim(a, a), 1.0, 1e-12);
}

TEST(Ssim, MapMatchesDirectWindowOracle) {
  std::mt19937_64 rng(7);
  const int w = 25, h = 21;
  const auto a = random_plane(rng, w, h);
  auto b = a;
  for (auto& v : b) v = 0.7 * v + 0.1 * std::uniform_real_distribution<double>(0, 1)(rng);
  const auto map = ssim_map(a, b, w, h);
  for (int y = 5; y < h - 5; ++y)
    for (int x = 5; x < w - 5; ++x) {
      EXPECT_NEAR(map[static_cast<std::size_t>(y) * w + x], ssim_at(a, b, w, x, y, 11, 1.5), 1e-10);
    }
}

TEST(Ssim, AnticorrelatedIsNegativeAndSymmetric) {
  std::mt19937_64 rng(8);
  ImageBuffer a(20, 20), b(20, 20);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  for (std::size_t p = 0; p < a.pixel_count(); ++p) {
    const float v = u(rng);
    for (int c = 0; c < 3; ++c) {
      a.pixels[p * 3 + c] = v;
      b.pixels[p * 3 + c] = 1.0f - v;
    }
  }
  EXPECT_LT(ssim(a, b), 0.0);
  EXPECT_NEAR(ssim(a, b), ssim(b, a), 1e-12);
  EXPECT_THROW(ssim(ImageBuffer(8, 8), ImageBuffer(8, 8)), ContractError);
}

TEST(Crop, CopiesTheRectangle) {
  const ImageBuffer a = noise_image(9, 10, 8);
  const PixelRect r{2, 3, 7, 8};
  const ImageBuffer c = crop(a, r);
  ASSERT_EQ(c.width, 5);
  ASSERT_EQ(c.height, 5);
  for (int y = 0; y < 5; ++y)
    for (int x = 0; x < 5; ++x)
      for (int k = 0; k < 3; ++k) EXPECT_EQ(c.at(x, y, k), a.at(x + 2, y + 3, k));
  EXPECT_THROW(crop(a, PixelRect{0, 0, 11, 2}), ContractError);
  EXPECT_THROW(crop(a, PixelRect{3, 3, 3, 5}), ContractError);
}
