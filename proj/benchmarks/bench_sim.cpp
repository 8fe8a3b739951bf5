#include <benchmark/benchmark.h>

#include "nti/eval/rollout.hpp"

using namespace nti;

namespace {

const sim::Simulator& simulator() {
  static const sim::Simulator sim(sim::SimConfig::defaults());
  return sim;
}

// States along one expert demonstration, so contact-heavy steps are included.
std::vector<std::pair<sim::SimState, sim::ControlIncrement>> trajectory() {
  std::vector<std::pair<sim::SimState, sim::ControlIncrement>> out;
  eval::ScriptedExpert expert({}, simulator().config(), 1);
  sim::SimState s = simulator().reset(1);
  sim::ForceSample f = simulator().measure(s);
  for (int i = 0; i < 160; ++i) {
    const sim::ControlIncrement u = expert.act(s, f);
    out.emplace_back(s, u);
    const auto r = simulator().step(s, u);
    s = r.state;
    f = r.forces;
  }
  return out;
}

void BM_SimStep(benchmark::State& state) {
  static const auto traj = trajectory();
  std::size_t i = 0;
  for (auto _ : state) {
    const auto& [s, u] = traj[i++ % traj.size()];
    benchmark::DoNotOptimize(simulator().step(s, u));
  }
}
BENCHMARK(BM_SimStep)->Unit(benchmark::kMicrosecond);

void BM_RenderCamera(benchmark::State& state) {
  static const auto traj = trajectory();
  std::uint64_t seed = 0;
  for (auto _ : state) benchmark::DoNotOptimize(simulator().render_camera1(traj[100].first, seed++));
}
BENCHMARK(BM_RenderCamera)->Unit(benchmark::kMicrosecond);

void BM_ExpertEpisode(benchmark::State& state) {
  eval::RolloutConfig rc;
  rc.record_frames = false;
  std::uint64_t seed = 0;
  for (auto _ : state) benchmark::DoNotOptimize(eval::rollout_expert(simulator(), {}, seed++, rc));
}
BENCHMARK(BM_ExpertEpisode)->Unit(benchmark::kMillisecond)->Iterations(3);

}  // namespace
