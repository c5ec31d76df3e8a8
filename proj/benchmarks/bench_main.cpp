#include <random>

#include <benchmark/benchmark.h>

#include "flowmesh/arap.hpp"
#include "flowmesh/depth_mesh.hpp"
#include "flowmesh/drag.hpp"
#include "flowmesh/flow.hpp"
#include "flowmesh/samples.hpp"

using namespace flowmesh;

namespace {

// Left column pinned, right column lifted.
ConstraintSet lift_right(const Mesh& m) {
  double xmax = 0.0;
  for (const Vec3& v : m.vertices) xmax = std::max(xmax, v.x());
  ConstraintSet cs;
  for (std::size_t i = 0; i < m.vertices.size(); ++i) {
    const Vec3& v = m.vertices[i];
    if (v.x() == 0.0) {
      cs.fixed.push_back(static_cast<int>(i));
      cs.fixed_positions.push_back(v);
    } else if (v.x() == xmax) {
      cs.handles.push_back(static_cast<int>(i));
      cs.targets.push_back(v + Vec3(0, 0, 0.3 * xmax));
    } else {
      cs.movable.push_back(static_cast<int>(i));
    }
  }
  return cs;
}

void BM_DeformGrid(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const Mesh m = synth_grid(n, n);
  const ConstraintSet cs = lift_right(m);
  DeformParams p;
  p.steps = 5;
  for (auto _ : state) benchmark::DoNotOptimize(deform_progressive(m, cs, p));
  state.counters["vertices"] = static_cast<double>(m.vertex_count());
}
BENCHMARK(BM_DeformGrid)->Arg(20)->Arg(40)->Arg(80)->Unit(benchmark::kMillisecond);

void BM_DepthToMesh(benchmark::State& state) {
  const DepthMap d = dome_depth(257);
  DepthMeshOptions opt;
  opt.reduction_ratio = 1.0 / static_cast<double>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(depth_to_mesh(d, opt));
}
BENCHMARK(BM_DepthToMesh)->Arg(1)->Arg(4)->Arg(100)->Unit(benchmark::kMillisecond);

void BM_SampleFlow(benchmark::State& state) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-5.0, 5.0);
  std::vector<FlowVector> c;
  for (int i = 0; i < 400; ++i) c.push_back({double(i % 20), double(i / 20), u(rng), u(rng)});
  const auto strategy = state.range(0) ? SamplingStrategy::Uniform : SamplingStrategy::Magnitude;
  for (auto _ : state) benchmark::DoNotOptimize(sample_flow(c, strategy, 10));
}
BENCHMARK(BM_SampleFlow)->Arg(0)->Arg(1);

void BM_GridCandidates(benchmark::State& state) {
  const BinaryMask mask = disk_mask(257, 257, 160, 160, 64);
  FlowField f{{}, 257, 257};
  for (int r = 0; r < 257; r += 2) {
    for (int col = 0; col < 257; col += 2) f.vectors.push_back({double(col), double(r), 1.0, 0.5});
  }
  for (auto _ : state) benchmark::DoNotOptimize(grid_candidates(f, mask));
}
BENCHMARK(BM_GridCandidates)->Unit(benchmark::kMillisecond);

void BM_DragGaussian(benchmark::State& state) {
  const DragScenario sc = gaussian_drag_scenario();
  const IdentityFeature feature;
  for (auto _ : state) benchmark::DoNotOptimize(run_drag(sc.state, feature, sc.params));
}
BENCHMARK(BM_DragGaussian)->Unit(benchmark::kMillisecond);

void BM_DdimRoundTrip(benchmark::State& state) {
  const NoiseSchedule s = NoiseSchedule::linear(50);
  LatentGrid z(64, 64, 4, 0.5);
  const EpsFn eps = [](const LatentGrid& g, int) { return LatentGrid(g.height, g.width, g.channels, 0.1); };
  for (auto _ : state) benchmark::DoNotOptimize(ddim_sample(ddim_invert(z, eps, s), eps, s));
}
BENCHMARK(BM_DdimRoundTrip)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
