#include <benchmark/benchmark.h>

#include <random>

#include "nti/numkit/ops.hpp"

using namespace nti::numkit;

namespace {

Tensor random_tensor(Shape shape, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n;
  Tensor t(std::move(shape));
  for (double& v : t.values()) v = n(rng);
  return t;
}

void BM_MatmulForwardBackward(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Parameter w{"w", random_tensor({n, n}, 1)};
  const Tensor x = random_tensor({8 * 19, n}, 2);
  for (auto _ : state) {
    Tape tape;
    const Var y = sum(matmul(tape.constant(x), tape.parameter(w)));
    benchmark::DoNotOptimize(backward(tape, y));
  }
}
BENCHMARK(BM_MatmulForwardBackward)->Arg(64)->Arg(128)->Unit(benchmark::kMicrosecond);

void BM_SoftmaxLayerNorm(benchmark::State& state) {
  const Tensor x = random_tensor({8, 4, 80, 80}, 3);
  for (auto _ : state) {
    Tape tape;
    benchmark::DoNotOptimize(layer_norm(softmax(tape.constant(x))).value());
  }
}
BENCHMARK(BM_SoftmaxLayerNorm)->Unit(benchmark::kMicrosecond);

}  // namespace
BENCHMARK_MAIN();
