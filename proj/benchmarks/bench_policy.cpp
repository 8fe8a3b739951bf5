#include <benchmark/benchmark.h>

#include <random>

#include "nti/eval/rollout.hpp"

using namespace nti;

namespace {

policy::Observation observation(const policy::HyperParams& hp, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  policy::Observation obs;
  obs.image.resize(static_cast<std::size_t>(hp.image_channels * hp.image_side * hp.image_side));
  for (double& v : obs.image) v = u(rng);
  obs.proprio.resize(data::kProprioDim);
  for (double& v : obs.proprio) v = u(rng) - 0.5;
  obs.s_kappa = 0.1;
  return obs;
}

void BM_Infer(benchmark::State& state) {
  const auto variant = static_cast<policy::Variant>(state.range(0));
  const policy::HyperParams hp = policy::HyperParams::desk();
  const policy::Model model(hp, variant, 1);
  const policy::Observation obs = observation(hp, 2);
  std::optional<policy::DecoderState> prev;
  for (auto _ : state) {
    auto [chunk, next] = model.infer(obs, prev ? &*prev : nullptr);
    benchmark::DoNotOptimize(chunk);
    if (model.flags().recurrent) prev = std::move(next);
  }
  state.SetLabel(policy::to_string(variant));
}
BENCHMARK(BM_Infer)->DenseRange(0, 3)->Unit(benchmark::kMillisecond);

// Observe (vision + normalisation), forward and temporal ensemble: one control cycle.
void BM_ControlCycle(benchmark::State& state) {
  static const sim::Simulator sim(sim::SimConfig::defaults());
  const policy::Model model(policy::HyperParams::desk(), policy::Variant::kRacct, 1);
  data::DatasetStats stats;
  stats.proprio = {std::vector<double>(data::kProprioDim, 0.0), std::vector<double>(data::kProprioDim, 1.0)};
  stats.action = {std::vector<double>(3, 0.0), std::vector<double>(3, 1e-3)};
  stats.s_kappa = {{0.0}, {1.0}};
  eval::PolicyController controller(model, stats, {}, sim.config().limits);
  const sim::SimState s = sim.reset(3);
  const sim::ForceSample f = sim.measure(s);
  const Image frame = sim.render_camera1(s, 3);
  int step = 0;
  for (auto _ : state) benchmark::DoNotOptimize(controller(s, f, frame, step++));
}
BENCHMARK(BM_ControlCycle)->Unit(benchmark::kMillisecond);

void BM_TrainStep(benchmark::State& state) {
  // Synthetic windows keep the benchmark independent of recorded demonstrations.
  const auto variant = static_cast<policy::Variant>(state.range(0));
  static const sim::Simulator sim(sim::SimConfig::defaults());
  std::vector<data::EpisodeData> episodes;
  data::DatasetConfig dc;
  eval::RolloutConfig rc;
  rc.max_steps = 120;
  episodes.push_back(data::episode_data(eval::rollout_expert(sim, {}, 1, rc), dc));
  const data::Dataset dataset(dc, std::move(episodes));
  policy::Model model(policy::HyperParams::desk(), variant, 1);
  policy::Trainer trainer(model, dataset, 1);
  for (auto _ : state) benchmark::DoNotOptimize(trainer.step());
  state.SetLabel(policy::to_string(variant));
}
BENCHMARK(BM_TrainStep)->Arg(0)->Arg(3)->Unit(benchmark::kMillisecond);

}  // namespace
