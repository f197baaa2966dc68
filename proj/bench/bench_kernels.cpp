// Serial reference kernels against the OpenMP kernels on a synthetic corpus.

#include <map>

#include <benchmark/benchmark.h>

#include "infsus/im_kernels.hpp"
#include "infsus/synth.hpp"

namespace {

using namespace infsus;

struct Fixture {
  kernels::GroupLayout layout;
  IMModel model;
  kernels::LossWeights weights;
};

const Fixture& fixture(std::size_t n) {
  static std::map<std::size_t, Fixture> cache;
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;
  SynthConfig cfg;
  cfg.n_nodes = n;
  cfg.k = 20;
  cfg.n_cascades = 4 * n;
  const auto net = generate_ba_network(cfg.n_nodes, cfg.edges_per_node, cfg.seed);
  const auto truth = sample_ground_truth(cfg);
  const auto log = simulate_cascades(net, truth, cfg);
  const auto exposures = extract_exposures(log, build_diffusion_network(log));
  Hyperparams hp;
  Fixture f{kernels::GroupLayout::build(exposures, n), initial_model(n, hp),
            kernels::LossWeights::from(hp)};
  return cache.emplace(n, std::move(f)).first->second;
}

void BM_LossSerial(benchmark::State& state) {
  const auto& f = fixture(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state)
    benchmark::DoNotOptimize(
        kernels::loss_serial(f.layout, f.model.influence, f.model.susceptibility, f.weights));
  state.counters["groups"] = static_cast<double>(f.layout.groups());
}

void BM_LossParallel(benchmark::State& state) {
  const auto& f = fixture(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state)
    benchmark::DoNotOptimize(
        kernels::loss_parallel(f.layout, f.model.influence, f.model.susceptibility, f.weights));
  state.counters["groups"] = static_cast<double>(f.layout.groups());
}

void BM_GradientSerial(benchmark::State& state) {
  const auto& f = fixture(static_cast<std::size_t>(state.range(0)));
  Matrix di, ds;
  for (auto _ : state) {
    kernels::gradient_serial(f.layout, f.model.influence, f.model.susceptibility, f.weights, di, ds);
    benchmark::DoNotOptimize(di.data());
  }
}

void BM_GradientParallel(benchmark::State& state) {
  const auto& f = fixture(static_cast<std::size_t>(state.range(0)));
  Matrix di, ds;
  for (auto _ : state) {
    kernels::gradient_parallel(f.layout, f.model.influence, f.model.susceptibility, f.weights, di, ds);
    benchmark::DoNotOptimize(di.data());
  }
}

BENCHMARK(BM_LossSerial)->Arg(300)->Arg(1000)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_LossParallel)->Arg(300)->Arg(1000)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_GradientSerial)->Arg(300)->Arg(1000)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_GradientParallel)->Arg(300)->Arg(1000)->Unit(benchmark::kMicrosecond);

}  // namespace

BENCHMARK_MAIN();
