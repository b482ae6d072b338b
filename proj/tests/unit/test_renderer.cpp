#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>

#include <gtest/gtest.h>

#include "gscd/renderer.hpp"
#include "oracles.hpp"

using namespace gscd;

namespace {

double max_abs_diff(const ImageBuffer& a, const ImageBuffer& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.pixels.size(); ++i) m = std::max(m, std::abs(double(a.pixels[i]) - b.pixels[i]));
  return m;
}

Gaussian3D blob(const Vec3& pos, double scale, double opacity, const Rgb& color) {
  Gaussian3D g;
  g.position = pos;
  g.scale = Vec3::Constant(scale);
  g.opacity = opacity;
  g.color = color;
  return g;
}

}  // namespace

TEST(Project, OnAxisLandsAtPrincipalPoint) {
  PinholeCamera cam = oracle::front_camera(64, 64, 50.0);
  cam.cx = 31.0;
  cam.cy = 29.5;
  const auto p = project_gaussian(blob({0, 0, 1}, 0.05, 1.0, Rgb::Ones()), cam);
  ASSERT_TRUE(p.has_value());
  EXPECT_DOUBLE_EQ(p->mean2d.x(), 31.0);
  EXPECT_DOUBLE_EQ(p->mean2d.y(), 29.5);
}

TEST(Project, BehindCameraIsCulled) {
  const PinholeCamera cam = oracle::front_camera(64, 64, 50.0);
  EXPECT_FALSE(project_gaussian(blob({0, 0, -1}, 0.05, 1.0, Rgb::Ones()), cam).has_value());
}

TEST(Project, MeanMatchesIndependentPinhole) {
  std::mt19937_64 rng(11);
  const GaussianScene s = oracle::random_scene(rng, 300);
  const PinholeCamera cam = PinholeCamera::look_at(0, 128, 96, 90, 95, Vec3(0.3, -0.2, -0.5),
                                                   Vec3(0, 0, 4), Vec3(0, -1, 0));
  int checked = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const auto p = project_gaussian(s.gaussians[i], cam);
    if (!p) continue;
    ++checked;
    EXPECT_LT((p->mean2d - oracle::pinhole(cam, s.gaussians[i].position)).norm(), 1e-6);
    EXPECT_GT(p->depth, RenderOptions{}.near_plane);
    EXPECT_GT(p->cov2d.determinant(), 0.0);
  }
  EXPECT_GT(checked, 100);
}

TEST(Render, EmptySceneIsBackground) {
  const PinholeCamera cam = oracle::front_camera(20, 10, 20.0);
  const Rgb bg(0.2, 0.4, 0.6);
  const ImageBuffer img = render(GaussianScene{}, cam, bg);
  for (std::size_t p = 0; p < img.pixel_count(); ++p) {
    EXPECT_FLOAT_EQ(img.pixels[p * 3 + 1], 0.4f);
    EXPECT_EQ(img.final_transmittance[p], 1.0f);
  }
}

TEST(Render, ZeroOpacityGaussianMatchesEmptyScene) {
  const PinholeCamera cam = oracle::front_camera(32, 32, 30.0);
  const Rgb bg(0.1, 0.5, 0.9);
  GaussianScene s;
  s.gaussians.push_back(blob({0, 0, 2}, 0.3, 0.0, Rgb(1, 0, 0)));
  const ImageBuffer a = render(s, cam, bg);
  const ImageBuffer b = render(GaussianScene{}, cam, bg);
  EXPECT_EQ(a.pixels, b.pixels);
  EXPECT_EQ(a.final_transmittance, b.final_transmittance);
}

TEST(Render, MatchesNaiveOracle) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    std::mt19937_64 rng(seed);
    const GaussianScene s = oracle::random_scene(rng, 200);
    const PinholeCamera cam = oracle::front_camera(128, 128, 110.0);
    const Rgb bg(0.3, 0.2, 0.1);
    const ImageBuffer img = render(s, cam, bg);
    const auto ref = oracle::naive_render(s, cam, bg);
    EXPECT_LT(max_abs_diff(img, ref.image), 1e-5) << "seed " << seed;
    for (std::size_t p = 0; p < img.pixel_count(); ++p) {
      ASSERT_NEAR(img.final_transmittance[p], ref.image.final_transmittance[p], 1e-5);
    }
  }
}

TEST(Render, IndependentOfThreadsAndTileSize) {
  std::mt19937_64 rng(21);
  const GaussianScene s = oracle::random_scene(rng, 150);
  const PinholeCamera cam = oracle::front_camera(100, 70, 80.0);
  const ImageBuffer ref = render(s, cam, Rgb::Zero());
  for (int threads : {2, 4, 16}) {
    for (int tile : {1, 7, 16, 64}) {
      RenderOptions o;
      o.threads = threads;
      o.tile_size = tile;
      const ImageBuffer img = render(s, cam, Rgb::Zero(), o);
      EXPECT_EQ(img.pixels, ref.pixels) << threads << " threads, tile " << tile;
      EXPECT_EQ(img.final_transmittance, ref.final_transmittance);
    }
  }
}

TEST(Render, PermutingDistinctDepthsLeavesImageUnchanged) {
  std::mt19937_64 rng(5);
  GaussianScene s = oracle::random_scene(rng, 80);
  const PinholeCamera cam = oracle::front_camera(64, 64, 55.0);
  const ImageBuffer ref = render(s, cam, Rgb(0.5, 0.5, 0.5));
  std::shuffle(s.gaussians.begin(), s.gaussians.end(), rng);
  EXPECT_EQ(render(s, cam, Rgb(0.5, 0.5, 0.5)).pixels, ref.pixels);
}

TEST(Render, EqualDepthsBreakTiesByIndex) {
  const PinholeCamera cam = oracle::front_camera(32, 32, 30.0);
  GaussianScene s;
  s.gaussians.push_back(blob({0, 0, 2}, 0.2, 0.8, Rgb(1, 0, 0)));
  s.gaussians.push_back(blob({0, 0, 2}, 0.2, 0.8, Rgb(0, 0, 1)));
  const ImageBuffer img = render(s, cam, Rgb::Zero());
  // Index 0 is in front, so red dominates at the center.
  EXPECT_GT(img.at(16, 16, 0), img.at(16, 16, 2));
  std::swap(s.gaussians[0], s.gaussians[1]);
  const ImageBuffer swapped = render(s, cam, Rgb::Zero());
  EXPECT_GT(swapped.at(16, 16, 2), swapped.at(16, 16, 0));
}

TEST(Render, TransmittanceBoundsAndMonotonicity) {
  std::mt19937_64 rng(9);
  const GaussianScene s = oracle::random_scene(rng, 120);
  const PinholeCamera cam = oracle::front_camera(64, 64, 55.0);
  const auto [img, rec] = render_with_contributions(s, cam, Rgb::Zero(), 0.0);
  for (float t : img.final_transmittance) {
    EXPECT_GE(t, 0.0f);
    EXPECT_LE(t, 1.0f);
  }
  std::map<std::uint32_t, std::vector<ContributionEntry>> per_pixel;
  for (const auto& e : rec.entries) per_pixel[e.pixel_index].push_back(e);
  for (const auto& [pix, entries] : per_pixel) {
    EXPECT_EQ(entries.front().transmittance_before, 1.0f);
    for (std::size_t k = 1; k < entries.size(); ++k) {
      EXPECT_LE(entries[k].transmittance_before, entries[k - 1].transmittance_before);
    }
  }
}

TEST(Contributions, ImageEqualsPlainRender) {
  std::mt19937_64 rng(2);
  const GaussianScene s = oracle::random_scene(rng, 100);
  const PinholeCamera cam = oracle::front_camera(64, 48, 50.0);
  const auto [img, rec] = render_with_contributions(s, cam, Rgb(0.1, 0.2, 0.3));
  const ImageBuffer plain = render(s, cam, Rgb(0.1, 0.2, 0.3));
  EXPECT_EQ(img.pixels, plain.pixels);
  for (const auto& e : rec.entries) EXPECT_GE(double(e.alpha) * e.transmittance_before, 1e-5 * (1 - 1e-6));
}

TEST(Contributions, OpaqueGaussianGivesSingleEntryWithUnitTransmittance) {
  PinholeCamera cam = oracle::front_camera(33, 33, 30.0);
  cam.cx = cam.cy = 16.5;  // pixel 16's center
  GaussianScene s;
  s.gaussians.push_back(blob({0, 0, 2}, 0.1, 1.0, Rgb::Ones()));
  const auto [img, rec] = render_with_contributions(s, cam, Rgb::Zero());
  const std::uint32_t center = 16 * 33 + 16;
  int found = 0;
  for (const auto& e : rec.entries) {
    if (e.pixel_index != center) continue;
    ++found;
    EXPECT_EQ(e.transmittance_before, 1.0f);
    EXPECT_NEAR(e.alpha, 0.999, 1e-6);
  }
  EXPECT_EQ(found, 1);
}

TEST(Contributions, StackedHalfOpacityGaussians) {
  PinholeCamera cam = oracle::front_camera(33, 33, 30.0);
  cam.cx = cam.cy = 16.5;
  GaussianScene s;
  s.gaussians.push_back(blob({0, 0, 2}, 0.1, 0.5, Rgb::Ones()));
  s.gaussians.push_back(blob({0, 0, 2}, 0.1, 0.5, Rgb::Ones()));
  const auto [img, rec] = render_with_contributions(s, cam, Rgb::Zero());
  std::vector<ContributionEntry> at_center;
  for (const auto& e : rec.entries)
    if (e.pixel_index == 16 * 33 + 16) at_center.push_back(e);
  ASSERT_EQ(at_center.size(), 2u);
  EXPECT_EQ(at_center[0].gaussian_index, 0u);
  EXPECT_FLOAT_EQ(at_center[0].alpha, 0.5f);
  EXPECT_FLOAT_EQ(at_center[1].transmittance_before, 0.5f);
}

TEST(Contributions, ConservationAgainstFinalTransmittance) {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    std::mt19937_64 rng(seed + 40);
    const GaussianScene s = oracle::random_scene(rng, 150);
    const PinholeCamera cam = oracle::front_camera(64, 64, 55.0);
    const auto [img, rec] = render_with_contributions(s, cam, Rgb::Zero(), 0.0);
    std::vector<double> sum(img.pixel_count(), 0.0);
    for (const auto& e : rec.entries) sum[e.pixel_index] += double(e.alpha) * e.transmittance_before;
    for (std::size_t p = 0; p < sum.size(); ++p) {
      ASSERT_NEAR(sum[p] + img.final_transmittance[p], 1.0, 1e-5);
    }
  }
}

TEST(Contributions, MatchNaiveOracleEntries) {
  std::mt19937_64 rng(77);
  const GaussianScene s = oracle::random_scene(rng, 60);
  const PinholeCamera cam = oracle::front_camera(48, 48, 45.0);
  const auto [img, rec] = render_with_contributions(s, cam, Rgb::Zero(), 0.0);
  const auto ref = oracle::naive_render(s, cam, Rgb::Zero());
  std::vector<std::vector<ContributionEntry>> per_pixel(img.pixel_count());
  for (const auto& e : rec.entries) per_pixel[e.pixel_index].push_back(e);
  for (std::size_t p = 0; p < per_pixel.size(); ++p) {
    ASSERT_EQ(per_pixel[p].size(), ref.contributions[p].size()) << "pixel " << p;
    for (std::size_t k = 0; k < per_pixel[p].size(); ++k) {
      EXPECT_EQ(per_pixel[p][k].gaussian_index, ref.contributions[p][k].gaussian);
      EXPECT_NEAR(per_pixel[p][k].alpha, ref.contributions[p][k].alpha, 1e-6);
      EXPECT_NEAR(per_pixel[p][k].transmittance_before, ref.contributions[p][k].transmittance, 1e-6);
    }
  }
}

TEST(Payload, UnitPayloadIsAccumulatedAlpha) {
  std::mt19937_64 rng(12);
  const GaussianScene s = oracle::random_scene(rng, 90);
  const PinholeCamera cam = oracle::front_camera(64, 64, 55.0);
  const std::vector<double> ones(s.size(), 1.0);
  const auto acc = render_payload(s, cam, ones);
  const ImageBuffer img = render(s, cam, Rgb::Zero());
  const DepthImage d = render_depth(s, cam);
  for (std::size_t p = 0; p < acc.size(); ++p) {
    ASSERT_NEAR(acc[p], 1.0 - img.final_transmittance[p], 1e-6);
    ASSERT_NEAR(d.alpha[p], acc[p], 1e-9);
  }
}

TEST(Payload, ColorChannelPayloadReproducesRender) {
  std::mt19937_64 rng(13);
  const GaussianScene s = oracle::random_scene(rng, 90);
  const PinholeCamera cam = oracle::front_camera(64, 64, 55.0);
  std::vector<double> red(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) red[i] = s.gaussians[i].color.x();
  const auto acc = render_payload(s, cam, red);
  const ImageBuffer img = render(s, cam, Rgb::Zero());
  for (std::size_t p = 0; p < acc.size(); ++p) ASSERT_NEAR(acc[p], img.pixels[p * 3], 1e-6);
}

TEST(Depth, SingleGaussianDepthIsItsCameraZ) {
  const PinholeCamera cam = oracle::front_camera(32, 32, 30.0);
  GaussianScene s;
  s.gaussians.push_back(blob({0.1, -0.1, 3.0}, 0.3, 0.9, Rgb::Ones()));
  const DepthImage d = render_depth(s, cam);
  bool any = false;
  for (std::size_t p = 0; p < d.depth.size(); ++p) {
    if (d.alpha[p] <= 0.0) {
      EXPECT_EQ(d.depth[p], 0.0);
      continue;
    }
    any = true;
    EXPECT_NEAR(d.depth[p], 3.0, 1e-9);
  }
  EXPECT_TRUE(any);
}
