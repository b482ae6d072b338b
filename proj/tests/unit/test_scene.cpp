#include <cmath>
#include <cstring>
#include <fstream>
#include <random>

#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "gscd/camera.hpp"
#include "gscd/errors.hpp"
#include "gscd/scene.hpp"
#include "gscd/scene_io.hpp"
#include "gscd/synth.hpp"
#include "oracles.hpp"

using namespace gscd;

namespace {

std::vector<char> read_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_bytes(const std::filesystem::path& p, const std::vector<char>& bytes) {
  std::ofstream out(p, std::ios::binary);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace

TEST(SceneIo, EmptySceneIsHeaderOnly) {
  const auto bytes = encode_scene(GaussianScene{});
  ASSERT_EQ(bytes.size(), 16u);
  EXPECT_EQ(std::string(bytes.data(), 4), "GSCN");
  const GaussianScene back = decode_scene(bytes);
  EXPECT_TRUE(back.empty());
  EXPECT_FALSE(back.diff_channel.has_value());
}

TEST(SceneIo, DiffChannelSetsFlagAndTrailingBlock) {
  std::mt19937_64 rng(3);
  GaussianScene s = oracle::random_scene(rng, 7);
  s.diff_channel = std::vector<float>(7, 0.25f);
  const auto bytes = encode_scene(s);
  EXPECT_EQ(bytes.size(), 16 + 7 * kGaussianRecordBytes + 7 * sizeof(float));
  std::uint32_t flags = 0;
  std::memcpy(&flags, bytes.data() + 12, 4);
  EXPECT_EQ(flags & 1u, 1u);
  const GaussianScene back = decode_scene(bytes);
  ASSERT_TRUE(back.diff_channel.has_value());
  EXPECT_EQ(*back.diff_channel, *s.diff_channel);
}

TEST(SceneIo, SaveIsDeterministic) {
  std::mt19937_64 rng(4);
  const GaussianScene s = oracle::random_scene(rng, 30);
  EXPECT_EQ(encode_scene(s), encode_scene(s));
}

TEST(SceneIo, RandomSceneFileRoundTripIsByteIdentical) {
  const auto dir = fixture::temp_dir("scene_rt");
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    std::mt19937_64 rng(seed);
    GaussianScene s = oracle::random_scene(rng, 100);
    if (seed % 2) {
      std::uniform_real_distribution<float> u(0.0f, 1.0f);
      std::vector<float> d(100);
      for (auto& v : d) v = u(rng);
      s.diff_channel = d;
    }
    const auto p1 = dir / "a.gscn", p2 = dir / "b.gscn";
    save_scene(s, p1);
    save_scene(load_scene(p1), p2);
    EXPECT_EQ(read_bytes(p1), read_bytes(p2)) << "seed " << seed;
    // Indices are stable.
    const GaussianScene back = load_scene(p1);
    ASSERT_EQ(back.size(), s.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
      EXPECT_NEAR(back.gaussians[i].position.x(), s.gaussians[i].position.x(), 1e-6);
    }
  }
  std::filesystem::remove_all(dir);
}

TEST(SceneIo, BadMagicIsFormatError) {
  auto bytes = encode_scene(GaussianScene{});
  bytes[0] = 'X';
  EXPECT_THROW(decode_scene(bytes), FormatError);
}

TEST(SceneIo, BadVersionIsFormatError) {
  auto bytes = encode_scene(GaussianScene{});
  bytes[4] = 9;
  EXPECT_THROW(decode_scene(bytes), FormatError);
}

TEST(SceneIo, TruncatedPayloadIsFormatError) {
  std::mt19937_64 rng(1);
  auto bytes = encode_scene(oracle::random_scene(rng, 3));
  bytes.resize(bytes.size() - 4);
  EXPECT_THROW(decode_scene(bytes), FormatError);
}

namespace {

// Byte offset of float field k (0..13) of record i.
std::size_t field_offset(std::size_t i, std::size_t k) { return 16 + i * kGaussianRecordBytes + k * 4; }

void poke(std::vector<char>& bytes, std::size_t offset, float v) { std::memcpy(bytes.data() + offset, &v, 4); }

}  // namespace

TEST(SceneIo, OpacityAboveOneIsDataError) {
  std::mt19937_64 rng(1);
  auto bytes = encode_scene(oracle::random_scene(rng, 2));
  poke(bytes, field_offset(1, 10), 1.5f);
  EXPECT_THROW(decode_scene(bytes), DataError);
}

TEST(SceneIo, NonFiniteFieldIsDataError) {
  std::mt19937_64 rng(1);
  auto bytes = encode_scene(oracle::random_scene(rng, 2));
  poke(bytes, field_offset(0, 1), std::numeric_limits<float>::quiet_NaN());
  EXPECT_THROW(decode_scene(bytes), DataError);
}

TEST(SceneIo, NonPositiveScaleIsDataError) {
  std::mt19937_64 rng(1);
  auto bytes = encode_scene(oracle::random_scene(rng, 2));
  poke(bytes, field_offset(0, 4), 0.0f);
  EXPECT_THROW(decode_scene(bytes), DataError);
}

TEST(SceneIo, SmallQuaternionDriftIsRenormalized) {
  GaussianScene s;
  s.gaussians.emplace_back();
  auto bytes = encode_scene(s);
  poke(bytes, field_offset(0, 6), 1.0005f);
  const GaussianScene back = decode_scene(bytes);
  EXPECT_NEAR(back.gaussians[0].rotation.norm(), 1.0, 1e-6);
}

TEST(SceneIo, LargeQuaternionDriftIsDataError) {
  GaussianScene s;
  s.gaussians.emplace_back();
  auto bytes = encode_scene(s);
  poke(bytes, field_offset(0, 6), 1.01f);
  EXPECT_THROW(decode_scene(bytes), DataError);
}

TEST(SceneIo, MissingFileIsIoError) {
  EXPECT_THROW(load_scene("/nonexistent/dir/x.gscn"), IoError);
}

TEST(SceneIo, FileWithZeroGaussiansLoads) {
  const auto dir = fixture::temp_dir("scene_empty");
  write_bytes(dir / "e.gscn", encode_scene(GaussianScene{}));
  EXPECT_TRUE(load_scene(dir / "e.gscn").empty());
  std::filesystem::remove_all(dir);
}

TEST(Scene, ValidateRejectsDiffChannelLengthMismatch) {
  std::mt19937_64 rng(1);
  GaussianScene s = oracle::random_scene(rng, 3);
  s.diff_channel = std::vector<float>(2, 0.0f);
  EXPECT_THROW(validate_scene(s), DataError);
}

TEST(Scene, CovarianceMatchesHandWrittenRotation) {
  std::mt19937_64 rng(8);
  const GaussianScene s = oracle::random_scene(rng, 20);
  for (const auto& g : s.gaussians) {
    const auto r = oracle::quat_matrix(g.rotation.w(), g.rotation.x(), g.rotation.y(), g.rotation.z());
    const Mat3 expected = r * g.scale.array().square().matrix().asDiagonal() * r.transpose();
    EXPECT_LT((g.covariance() - expected).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Camera, SingleLineParses) {
  const CameraSet set = parse_cameras("# header\n3 64 48 50 50 32 24 1 0 0 0 0 0 0\n");
  ASSERT_EQ(set.size(), 1u);
  EXPECT_EQ(set.cameras[0].id, 3);
  EXPECT_EQ(set.cameras[0].width, 64);
  EXPECT_DOUBLE_EQ(set.cameras[0].cx, 32.0);
}

TEST(Camera, ZeroFocalIsDataError) {
  EXPECT_THROW(parse_cameras("0 64 48 0 50 32 24 1 0 0 0 0 0 0\n"), DataError);
}

TEST(Camera, PrincipalPointOutsideImageIsDataError) {
  EXPECT_THROW(parse_cameras("0 64 48 50 50 64 24 1 0 0 0 0 0 0\n"), DataError);
}

TEST(Camera, MalformedLineCarriesLineNumber) {
  try {
    parse_cameras("0 64 48 50 50 32 24 1 0 0 0 0 0 0\n# c\n1 64 48 50\n");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3);
  }
}

TEST(Camera, DuplicateIdIsDataError) {
  EXPECT_THROW(parse_cameras("0 64 48 50 50 32 24 1 0 0 0 0 0 0\n0 64 48 50 50 32 24 1 0 0 0 0 0 0\n"),
               DataError);
}

TEST(Camera, OpticalAxisAtDepthOneHitsPrincipalPoint) {
  PinholeCamera c = oracle::front_camera(64, 48, 40.0);
  c.cx = 30.25;
  c.cy = 20.5;
  const auto p = c.project(Vec3(0, 0, 1));
  ASSERT_TRUE(p.has_value());
  EXPECT_DOUBLE_EQ(p->x(), 30.25);
  EXPECT_DOUBLE_EQ(p->y(), 20.5);
}

TEST(Camera, BehindCameraDoesNotProject) {
  const PinholeCamera c = oracle::front_camera(64, 48, 40.0);
  EXPECT_FALSE(c.project(Vec3(0, 0, -1)).has_value());
}

TEST(Camera, UnprojectInvertsProject) {
  const PinholeCamera c = PinholeCamera::look_at(0, 64, 48, 50, 50, Vec3(1, 2, 3), Vec3(0, 0, 0),
                                                 Vec3(0, 0, 1));
  const Vec3 w = c.unproject(Vec2(10.5, 30.25), 2.5);
  const auto p = c.project(w);
  ASSERT_TRUE(p.has_value());
  EXPECT_NEAR(p->x(), 10.5, 1e-9);
  EXPECT_NEAR(p->y(), 30.25, 1e-9);
  EXPECT_NEAR(c.to_camera(w).z(), 2.5, 1e-9);
}

TEST(Camera, FileRoundTripIsByteIdentical) {
  const auto dir = fixture::temp_dir("cams_rt");
  TrajectorySpec t;
  t.n_pre = 16;
  t.n_post = 4;
  t.n_test = 4;
  const Trajectories tr = make_trajectories(t);
  save_cameras(tr.pre, dir / "a.txt");
  save_cameras(load_cameras(dir / "a.txt", CameraRole::pre), dir / "b.txt");
  EXPECT_EQ(read_bytes(dir / "a.txt"), read_bytes(dir / "b.txt"));
  std::filesystem::remove_all(dir);
}

// Generator cameras, written and reloaded, reproject world points like the
// generator's in-memory cameras (projection computed by the oracle).
TEST(Camera, ReloadedGeneratorCamerasReprojectWithinTolerance) {
  const auto dir = fixture::temp_dir("cams_reproj");
  TrajectorySpec t;
  t.n_pre = 32;
  t.n_post = 8;
  t.n_test = 8;
  for (auto style : {TrajectoryStyle::orbit, TrajectoryStyle::walkthrough}) {
    t.style = style;
    const Trajectories tr = make_trajectories(t);
    save_cameras(tr.pre, dir / "pre.txt");
    const CameraSet back = load_cameras(dir / "pre.txt", CameraRole::pre);
    ASSERT_EQ(back.size(), tr.pre.size());
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (std::size_t k = 0; k < back.size(); ++k) {
      for (int n = 0; n < 20; ++n) {
        const Vec3 w(u(rng), u(rng), 0.35 + 0.3 * u(rng));
        const Vec3 cam_pt = oracle::world_to_camera(tr.pre.cameras[k], w);
        if (cam_pt.z() <= 0.1) continue;
        const Eigen::Vector2d a = oracle::pinhole(tr.pre.cameras[k], w);
        const Eigen::Vector2d b = oracle::pinhole(back.cameras[k], w);
        EXPECT_LT((a - b).norm(), 1e-4);
      }
    }
  }
  std::filesystem::remove_all(dir);
}
