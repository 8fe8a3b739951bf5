#include <benchmark/benchmark.h>

#include "nti/data/dataset.hpp"
#include "nti/sim/simulator.hpp"

using namespace nti;

namespace {

Image frame() {
  static const sim::Simulator sim(sim::SimConfig::defaults());
  sim::SimState s = sim.reset(2);
  for (int i = 0; i < 60; ++i) s = sim.step(s, {0.0012, 0.0, 0.0}).state;
  return sim.render_camera1(s, 5);
}

void BM_Pipeline(benchmark::State& state) {
  const Image img = frame();
  for (auto _ : state) benchmark::DoNotOptimize(vision::run_pipeline(img));
}
BENCHMARK(BM_Pipeline)->Unit(benchmark::kMicrosecond);

void BM_ExtractFeatures(benchmark::State& state) {
  const Image img = frame();
  for (auto _ : state) benchmark::DoNotOptimize(data::extract_features(img, 32, {}));
}
BENCHMARK(BM_ExtractFeatures)->Unit(benchmark::kMicrosecond);

}  // namespace
