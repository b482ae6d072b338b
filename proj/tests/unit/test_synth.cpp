#include <cmath>
#include <numbers>
#include <set>

#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "gscd/errors.hpp"
#include "gscd/synth.hpp"
#include "oracles.hpp"

using namespace gscd;

namespace {

SceneSpec small_scene(std::uint64_t seed, int n_objects = 3) {
  SceneSpec s;
  s.seed = seed;
  s.n_objects = n_objects;
  s.gaussians_per_object = 120;
  s.room_spacing = 0.5;
  return s;
}

bool same_scene(const GaussianScene& a, const GaussianScene& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const auto& x = a.gaussians[i];
    const auto& y = b.gaussians[i];
    if (x.position != y.position || x.scale != y.scale || x.opacity != y.opacity ||
        x.color != y.color || x.rotation.coeffs() != y.rotation.coeffs()) {
      return false;
    }
  }
  return true;
}

// Silhouette by the oracle renderer: summed alpha * T of the listed range.
ChangeMask oracle_silhouette(const GaussianScene& s, GaussianIndex begin, GaussianIndex end,
                             const PinholeCamera& cam, std::size_t* borderline) {
  const auto frame = oracle::naive_render(s, cam, Rgb::Zero());
  ChangeMask m(cam.width, cam.height);
  for (std::size_t p = 0; p < m.size(); ++p) {
    double v = 0.0;
    for (const auto& c : frame.contributions[p]) {
      if (c.gaussian >= begin && c.gaussian < end) v += c.alpha * c.transmittance;
    }
    m.set(p, v >= 0.5);
    if (std::abs(v - 0.5) < 1e-4) ++*borderline;
  }
  return m;
}

std::size_t mismatch(const ChangeMask& a, const ChangeMask& b) {
  std::size_t n = 0;
  for (std::size_t p = 0; p < a.size(); ++p) n += a.get(p) != b.get(p);
  return n;
}

}  // namespace

TEST(Generate, IsDeterministic) {
  const auto a = generate_scene(small_scene(5));
  const auto b = generate_scene(small_scene(5));
  EXPECT_TRUE(same_scene(a.scene, b.scene));
  const auto c = generate_scene(small_scene(6));
  EXPECT_FALSE(same_scene(a.scene, c.scene));
}

TEST(Generate, RangesPartitionTheScene) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto g = generate_scene(small_scene(seed));
    EXPECT_EQ(g.table.room_begin, 0u);
    ASSERT_EQ(g.table.objects.size(), 3u);
    GaussianIndex next = g.table.room_end;
    EXPECT_GT(next, 0u);
    for (const auto& o : g.table.objects) {
      EXPECT_EQ(o.begin, next);
      // Boxes round their face grids, so counts only approximate the target.
      EXPECT_NEAR(static_cast<double>(o.count()), 120.0, 30.0);
      next = o.end;
    }
    EXPECT_EQ(next, g.scene.size());
  }
}

TEST(Generate, ObjectsDoNotInterpenetrateAndSitInsideTheRoom) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const SceneSpec spec = small_scene(seed, 4);
    const auto g = generate_scene(spec);
    const auto& objs = g.table.objects;
    for (std::size_t i = 0; i < objs.size(); ++i) {
      for (std::size_t j = i + 1; j < objs.size(); ++j) {
        EXPECT_GT((objs[i].center - objs[j].center).norm(),
                  objs[i].bounding_radius() + objs[j].bounding_radius());
      }
      for (GaussianIndex k = objs[i].begin; k < objs[i].end; ++k) {
        const Vec3& p = g.scene.gaussians[k].position;
        EXPECT_LT(p.head<2>().cwiseAbs().maxCoeff(), spec.room_extent);
        EXPECT_GT(p.z(), 0.0);
      }
    }
  }
}

TEST(Generate, InvalidSpecsAreRejected) {
  SceneSpec s = small_scene(0);
  s.n_objects = 0;
  EXPECT_THROW(generate_scene(s), ContractError);
  s.n_objects = 9;
  EXPECT_THROW(generate_scene(s), ContractError);
}

TEST(Changes, EmptyScriptKeepsTheScene) {
  const SceneSpec spec = small_scene(1);
  const auto g = generate_scene(spec);
  const auto post = apply_changes(g.scene, g.table, ChangeScript{}, spec);
  EXPECT_TRUE(same_scene(g.scene, post.scene));
}

TEST(Changes, TranslateThereAndBackIsIdentity) {
  const SceneSpec spec = small_scene(2, 1);
  const auto g = generate_scene(spec);
  const Vec3 delta = -0.2 * Vec3(g.table.objects[0].center.x(), g.table.objects[0].center.y(), 0.0);
  ChangeScript fwd;
  fwd.ops.push_back({0, ChangeKind::translate, delta, 0.0});
  const auto moved = apply_changes(g.scene, g.table, fwd, spec);
  const auto& o = moved.table.objects[0];
  for (GaussianIndex k = o.begin; k < o.end; ++k) {
    const Vec3 d = moved.scene.gaussians[k].position - g.scene.gaussians[k].position;
    EXPECT_LT((d - delta).norm(), 1e-12);
  }
  ChangeScript back;
  back.ops.push_back({0, ChangeKind::translate, -delta, 0.0});
  const auto home = apply_changes(moved.scene, moved.table, back, spec);
  for (std::size_t k = 0; k < g.scene.size(); ++k) {
    EXPECT_LT((home.scene.gaussians[k].position - g.scene.gaussians[k].position).norm(), 1e-6);
  }
}

TEST(Changes, FullTurnRotationIsIdentity) {
  const SceneSpec spec = small_scene(3);
  const auto g = generate_scene(spec);
  ChangeScript s;
  s.ops.push_back({1, ChangeKind::rotate, Vec3(0.3, -0.2, 1.0), 2.0 * std::numbers::pi});
  const auto r = apply_changes(g.scene, g.table, s, spec);
  ASSERT_EQ(r.scene.size(), g.scene.size());
  for (std::size_t k = 0; k < g.scene.size(); ++k) {
    EXPECT_LT((r.scene.gaussians[k].position - g.scene.gaussians[k].position).norm(), 1e-5);
    EXPECT_LT(r.scene.gaussians[k].rotation.angularDistance(g.scene.gaussians[k].rotation), 1e-5);
  }
}

TEST(Changes, RotationPreservesDistancesToCentroid) {
  const SceneSpec spec = small_scene(4);
  const auto g = generate_scene(spec);
  ChangeScript s;
  s.ops.push_back({0, ChangeKind::rotate, Vec3::UnitZ(), 0.7});
  const auto r = apply_changes(g.scene, g.table, s, spec);
  const auto& o = g.table.objects[0];
  const auto& ro = *r.table.find(0);
  Vec3 c0 = Vec3::Zero(), c1 = Vec3::Zero();
  for (GaussianIndex k = 0; k < o.count(); ++k) {
    c0 += g.scene.gaussians[o.begin + k].position;
    c1 += r.scene.gaussians[ro.begin + k].position;
  }
  c0 /= o.count();
  c1 /= o.count();
  EXPECT_LT((c0 - c1).norm(), 1e-9);
  for (GaussianIndex k = 0; k < o.count(); ++k) {
    const Vec3 a = g.scene.gaussians[o.begin + k].position - c0;
    const Vec3 b = r.scene.gaussians[ro.begin + k].position - c1;
    EXPECT_NEAR(a.norm(), b.norm(), 1e-9);
    EXPECT_NEAR(a.z(), b.z(), 1e-9);
  }
}

TEST(Changes, RemoveAndInsertEditTheTable) {
  const SceneSpec spec = small_scene(5);
  const auto g = generate_scene(spec);
  ChangeScript s;
  s.ops.push_back({2, ChangeKind::remove, Vec3::Zero(), 0.0});
  const auto r = apply_changes(g.scene, g.table, s, spec);
  EXPECT_EQ(r.table.find(2), nullptr);
  EXPECT_EQ(r.scene.size(), g.scene.size() - g.table.objects[2].count());
  ChangeScript ins;
  ins.seed = 1;
  ins.ops.push_back({2, ChangeKind::insert, g.table.objects[2].center, 0.0});
  const auto back = apply_changes(r.scene, r.table, ins, spec);
  ASSERT_NE(back.table.find(2), nullptr);
  EXPECT_EQ(back.scene.size(), r.scene.size() + back.table.find(2)->count());
}

TEST(Changes, InvalidScriptsAreRejected) {
  const SceneSpec spec = small_scene(6);
  const auto g = generate_scene(spec);
  ChangeScript twice;
  twice.ops = {{0, ChangeKind::remove, {}, 0.0}, {0, ChangeKind::translate, Vec3(0.1, 0, 0), 0.0}};
  EXPECT_THROW(apply_changes(g.scene, g.table, twice, spec), ContractError);
  ChangeScript missing;
  missing.ops = {{42, ChangeKind::remove, {}, 0.0}};
  EXPECT_THROW(apply_changes(g.scene, g.table, missing, spec), ContractError);
  ChangeScript dup;
  dup.ops = {{1, ChangeKind::insert, Vec3::Zero(), 0.0}};
  EXPECT_THROW(apply_changes(g.scene, g.table, dup, spec), ContractError);
  ChangeScript zero_axis;
  zero_axis.ops = {{1, ChangeKind::rotate, Vec3::Zero(), 1.0}};
  EXPECT_THROW(apply_changes(g.scene, g.table, zero_axis, spec), ContractError);
  ChangeScript collide;
  collide.ops = {{0, ChangeKind::translate, g.table.objects[1].center - g.table.objects[0].center, 0.0}};
  EXPECT_THROW(apply_changes(g.scene, g.table, collide, spec), PlacementError);
}

TEST(Changes, GeneratedScriptsMatchTheirCategory) {
  const SceneSpec spec = small_scene(7);
  const auto g = generate_scene(spec);
  const std::pair<ChangeCategory, ChangeKind> cases[] = {
      {ChangeCategory::insert, ChangeKind::insert},
      {ChangeCategory::remove, ChangeKind::remove},
      {ChangeCategory::translation, ChangeKind::translate},
      {ChangeCategory::rotation, ChangeKind::rotate}};
  for (const auto& [cat, kind] : cases) {
    const auto s = make_change_script(g, spec, cat, 1, 11);
    ASSERT_EQ(s.ops.size(), 1u) << to_string(cat);
    EXPECT_EQ(s.ops[0].kind, kind);
    EXPECT_NO_THROW(apply_changes(g.scene, g.table, s, spec));
  }
  EXPECT_TRUE(make_change_script(g, spec, ChangeCategory::none, 3, 1).ops.empty());
}

TEST(Script, FormatParseRoundTrip) {
  ChangeScript s;
  s.seed = 1234567890123ull;
  s.ops = {{0, ChangeKind::remove, {}, 0.0},
           {5, ChangeKind::insert, Vec3(0.1, -0.2, 0.3), 0.0},
           {1, ChangeKind::translate, Vec3(1.0 / 3.0, 0, -1e-7), 0.0},
           {2, ChangeKind::rotate, Vec3(0, 0, 1), 0.123456789}};
  const std::string text = format_script(s);
  const ChangeScript back = parse_script(text);
  EXPECT_EQ(format_script(back), text);
  ASSERT_EQ(back.ops.size(), 4u);
  EXPECT_EQ(back.seed, s.seed);
  EXPECT_EQ(back.ops[2].vec, s.ops[2].vec);
  EXPECT_EQ(back.ops[3].angle, s.ops[3].angle);
  EXPECT_THROW(parse_script("seed 1\nexplode 3\n"), ParseError);
}

TEST(Trajectories, OrbitSpacingAndFraming) {
  TrajectorySpec t;
  t.n_pre = 16;
  t.n_post = 4;
  t.n_test = 4;
  const auto tr = make_trajectories(t);
  ASSERT_EQ(tr.pre.size(), 16u);
  EXPECT_EQ(tr.pre.role, CameraRole::pre);
  EXPECT_EQ(tr.post.role, CameraRole::post);
  EXPECT_EQ(tr.test.role, CameraRole::test);
  for (const CameraSet* set : {&tr.pre, &tr.post, &tr.test}) {
    std::vector<double> angles;
    for (const auto& c : set->cameras) {
      const Vec3 eye = c.center();
      angles.push_back(std::atan2(eye.y() - t.centroid.y(), eye.x() - t.centroid.x()));
      const Vec2 px = oracle::pinhole(c, t.centroid);
      EXPECT_NEAR(px.x(), c.cx, 1.0);
      EXPECT_NEAR(px.y(), c.cy, 1.0);
    }
    for (std::size_t i = 0; i < angles.size(); ++i) {
      double d = angles[(i + 1) % angles.size()] - angles[i];
      d = std::remainder(d, 2.0 * std::numbers::pi);
      EXPECT_NEAR(std::abs(d), 2.0 * std::numbers::pi / angles.size(), 1e-9);
    }
  }
  t.n_pre = 15;
  EXPECT_THROW(make_trajectories(t), ContractError);
}

TEST(Trajectories, DeterministicAndIdsDisjoint) {
  for (auto style : {TrajectoryStyle::orbit, TrajectoryStyle::walkthrough}) {
    TrajectorySpec t;
    t.style = style;
    t.seed = 9;
    const auto a = make_trajectories(t);
    const auto b = make_trajectories(t);
    EXPECT_EQ(format_cameras(a.pre), format_cameras(b.pre));
    EXPECT_EQ(format_cameras(a.test), format_cameras(b.test));
    std::set<int> ids;
    for (const CameraSet* set : {&a.pre, &a.post, &a.test}) {
      for (const auto& c : set->cameras) EXPECT_TRUE(ids.insert(c.id).second);
    }
  }
}

TEST(Trajectories, WalkthroughKeepsCentroidInFrame) {
  TrajectorySpec t;
  t.style = TrajectoryStyle::walkthrough;
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    t.seed = seed;
    const auto tr = make_trajectories(t);
    for (const CameraSet* set : {&tr.pre, &tr.post, &tr.test}) {
      for (const auto& c : set->cameras) {
        EXPECT_GT(oracle::world_to_camera(c, t.centroid).z(), 0.0);
        const Vec2 px = oracle::pinhole(c, t.centroid);
        EXPECT_TRUE(px.x() >= 0 && px.x() < c.width && px.y() >= 0 && px.y() < c.height)
            << "camera " << c.id;
        EXPECT_LT(c.center().head<2>().cwiseAbs().maxCoeff(), t.room_extent);
      }
    }
  }
}

TEST(GtMasks, RemovalHasEmptyPostAndInsertionEmptyPre) {
  const SceneSpec spec = small_scene(8);
  const auto g = generate_scene(spec);
  TrajectorySpec t;
  t.n_post = 4;
  t.width = 48;
  t.height = 36;
  t.fx = 42;
  const auto tr = make_trajectories(t);
  ChangeScript rem;
  rem.ops = {{0, ChangeKind::remove, {}, 0.0}};
  const auto post_rem = apply_changes(g.scene, g.table, rem, spec);
  bool any = false;
  for (const auto& mp : render_gt_masks(g, post_rem, rem, tr.post)) {
    EXPECT_FALSE(mp.post.any());
    any = any || mp.pre.any();
  }
  EXPECT_TRUE(any);
  ChangeScript ins;
  ins.ops = {{0, ChangeKind::insert, g.table.objects[0].center, 0.0}};
  // Insert the removed object back: pre is the removal result.
  any = false;
  const auto post_ins = apply_changes(post_rem.scene, post_rem.table, ins, spec);
  for (const auto& mp : render_gt_masks(post_rem, post_ins, ins, tr.post)) {
    EXPECT_FALSE(mp.pre.any());
    any = any || mp.post.any();
  }
  EXPECT_TRUE(any);
}

TEST(GtMasks, TranslationMasksMatchOracleSilhouettes) {
  const SceneSpec spec = small_scene(9);
  const auto g = generate_scene(spec);
  TrajectorySpec t;
  t.n_post = 3;
  t.width = 40;
  t.height = 30;
  t.fx = 35;
  const auto tr = make_trajectories(t);
  const auto script = make_change_script(g, spec, ChangeCategory::translation, 1, 3);
  const auto post = apply_changes(g.scene, g.table, script, spec);
  const int id = script.ops[0].object_id;
  const auto gt = render_gt_masks(g, post, script, tr.post);
  for (std::size_t k = 0; k < tr.post.size(); ++k) {
    std::size_t borderline = 0;
    const auto* o_pre = g.table.find(id);
    const auto* o_post = post.table.find(id);
    const ChangeMask pre_m = oracle_silhouette(g.scene, o_pre->begin, o_pre->end, tr.post.cameras[k], &borderline);
    const ChangeMask post_m = oracle_silhouette(post.scene, o_post->begin, o_post->end, tr.post.cameras[k], &borderline);
    const std::size_t diff = mismatch(pre_m, gt[k].pre) + mismatch(post_m, gt[k].post);
    EXPECT_LE(diff, borderline) << "view " << k;
    EXPECT_EQ(gt[k].joint(), gt[k].pre | gt[k].post);
  }
}

TEST(Bundle, DeterministicAndRoundTrips) {
  auto spec = fixture::small_bundle_spec(ChangeCategory::translation, 21);
  const auto a = make_bundle(spec);
  const auto b = make_bundle(spec);
  EXPECT_EQ(format_script(a.script), format_script(b.script));
  ASSERT_EQ(a.post_images.size(), b.post_images.size());
  for (std::size_t k = 0; k < a.post_images.size(); ++k) EXPECT_EQ(a.post_images[k].pixels, b.post_images[k].pixels);
  EXPECT_EQ(a.gt_post.size(), a.post_cams.size());
  EXPECT_EQ(a.gt_test.size(), a.test_cams.size());

  const auto dir = fixture::temp_dir("bundle");
  write_bundle(a, dir);
  const auto back = load_bundle(dir);
  EXPECT_EQ(format_script(back.script), format_script(a.script));
  EXPECT_TRUE(same_scene(back.pre.scene, a.pre.scene));
  EXPECT_TRUE(same_scene(back.post.scene, a.post.scene));
  ASSERT_EQ(back.pre.table.objects.size(), a.pre.table.objects.size());
  for (std::size_t i = 0; i < a.pre.table.objects.size(); ++i) {
    EXPECT_EQ(back.pre.table.objects[i].begin, a.pre.table.objects[i].begin);
    EXPECT_EQ(back.pre.table.objects[i].end, a.pre.table.objects[i].end);
  }
  EXPECT_EQ(format_cameras(back.post_cams), format_cameras(a.post_cams));
  for (std::size_t k = 0; k < a.post_images.size(); ++k) {
    EXPECT_EQ(back.post_images[k].pixels, a.post_images[k].pixels);
    EXPECT_EQ(back.gt_post[k].pre, a.gt_post[k].pre);
    EXPECT_EQ(back.gt_post[k].post, a.gt_post[k].post);
  }
  std::filesystem::remove_all(dir);
}

TEST(Bundle, ChangesAreVisibleInSomePostView) {
  for (auto cat : {ChangeCategory::insert, ChangeCategory::remove, ChangeCategory::rotation}) {
    const auto b = make_bundle(fixture::small_bundle_spec(cat, 31));
    bool any = false;
    for (const auto& mp : b.gt_post) any = any || mp.joint().any();
    EXPECT_TRUE(any) << to_string(cat);
  }
}

TEST(Names, RoundTrip) {
  for (auto c : {ChangeCategory::none, ChangeCategory::in_out, ChangeCategory::insert, ChangeCategory::remove,
                 ChangeCategory::translation, ChangeCategory::rotation, ChangeCategory::mixed}) {
    EXPECT_EQ(parse_change_category(to_string(c)), c);
  }
  for (auto s : {TrajectoryStyle::orbit, TrajectoryStyle::walkthrough}) EXPECT_EQ(parse_trajectory_style(to_string(s)), s);
  EXPECT_THROW(parse_change_category("teleport"), ContractError);
}
