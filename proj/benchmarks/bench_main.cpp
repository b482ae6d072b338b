#include <benchmark/benchmark.h>

#include <random>

#include "gscd/diff3d.hpp"
#include "gscd/renderer.hpp"
#include "gscd/segmentation.hpp"
#include "gscd/synth.hpp"

namespace {

using namespace gscd;

struct Fixture {
  GeneratedScene scene;
  CameraSet cams;
  std::vector<ContributionRecord> records;
  std::vector<ChangeMask> masks;
};

const Fixture& fixture() {
  static const Fixture f = [] {
    Fixture f;
    SceneSpec spec;
    spec.seed = 7;
    f.scene = generate_scene(spec);
    TrajectorySpec t;
    t.seed = 7;
    f.cams = make_trajectories(t).post;
    for (const auto& cam : f.cams.cameras) {
      auto rec = render_with_contributions(f.scene.scene, cam, Rgb::Zero()).second;
      f.records.push_back(std::move(rec));
      ChangeMask m(cam.width, cam.height);
      for (int y = cam.height / 4; y < cam.height / 2; ++y)
        for (int x = cam.width / 4; x < cam.width / 2; ++x) m.set(x, y);
      f.masks.push_back(m);
    }
    return f;
  }();
  return f;
}

void BM_Render(benchmark::State& state) {
  const auto& f = fixture();
  RenderOptions opts;
  opts.threads = static_cast<int>(state.range(0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(render(f.scene.scene, f.cams.cameras[0], Rgb::Zero(), opts));
  }
  state.counters["gaussians"] = static_cast<double>(f.scene.scene.size());
}
BENCHMARK(BM_Render)->Arg(1)->Arg(4)->Unit(benchmark::kMillisecond);

void BM_RenderWithContributions(benchmark::State& state) {
  const auto& f = fixture();
  for (auto _ : state) {
    benchmark::DoNotOptimize(render_with_contributions(f.scene.scene, f.cams.cameras[0], Rgb::Zero()));
  }
}
BENCHMARK(BM_RenderWithContributions)->Unit(benchmark::kMillisecond);

void BM_VoteSingleView(benchmark::State& state) {
  const auto& f = fixture();
  for (auto _ : state) benchmark::DoNotOptimize(vote_single_view(f.records[0], f.masks[0]));
}
BENCHMARK(BM_VoteSingleView)->Unit(benchmark::kMicrosecond);

void BM_VoteMultiView(benchmark::State& state) {
  const auto& f = fixture();
  for (auto _ : state) {
    benchmark::DoNotOptimize(vote_multi_view(f.records, f.masks, f.scene.scene.size(),
                                             VoteMode::visibility_aware, {}));
  }
}
BENCHMARK(BM_VoteMultiView)->Unit(benchmark::kMillisecond);

void BM_Prune(benchmark::State& state) {
  const auto& f = fixture();
  const auto acc = vote_multi_view(f.records, f.masks, f.scene.scene.size(),
                                   VoteMode::visibility_aware, {});
  const auto sel = select_by_weight(acc, 0.1);
  for (auto _ : state) {
    benchmark::DoNotOptimize(prune_multi_view(f.scene.scene, sel, f.cams, f.masks, {}));
  }
}
BENCHMARK(BM_Prune)->Unit(benchmark::kMicrosecond);

void BM_ProposeSegments(benchmark::State& state) {
  const auto& f = fixture();
  const auto img = render(f.scene.scene, f.cams.cameras[0], Rgb::Zero());
  for (auto _ : state) benchmark::DoNotOptimize(propose_segments(img, {}));
}
BENCHMARK(BM_ProposeSegments)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
