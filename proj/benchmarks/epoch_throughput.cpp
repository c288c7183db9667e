#include <benchmark/benchmark.h>

#include "shufgrad/optimize.hpp"
#include "shufgrad/problems.hpp"
#include "shufgrad/shuffling.hpp"

using namespace shufgrad;

namespace {

void BM_PermutationRandomReshuffle(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Scheme scheme = Scheme::random_reshuffle(n, 42);
  std::vector<std::size_t> perm;
  std::size_t t = 1;
  for (auto _ : state) {
    scheme.permutation_for_epoch(t++, perm);
    benchmark::DoNotOptimize(perm.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_PermutationRandomReshuffle)->Arg(1050)->Arg(3000);

template <class Problem>
void run_epochs(benchmark::State& state, const Problem& problem, double step, bool sgd) {
  RunConfig config;
  config.step = step;
  config.epochs = 1;
  config.record.grad_norm_sq = false;
  config.record.distance = false;
  const Scheme scheme = Scheme::random_reshuffle(problem.size(), 7);
  for (auto _ : state) {
    auto record = sgd ? run_sgd(problem, config) : run_shuffling(problem, scheme, config);
    benchmark::DoNotOptimize(record.final_point.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(problem.size()));
}

void BM_QuarticEpoch(benchmark::State& state) {
  static const QuarticProblem problem;
  run_epochs(state, problem, 0.01, state.range(0) != 0);
}
BENCHMARK(BM_QuarticEpoch)->Arg(0)->Arg(1);

void BM_ExpEpoch(benchmark::State& state) {
  static const ExpStrongProblem problem;
  run_epochs(state, problem, 1e-5, state.range(0) != 0);
}
BENCHMARK(BM_ExpEpoch)->Arg(0)->Arg(1);

void BM_PhaseEpoch(benchmark::State& state) {
  static const PhaseRetrievalProblem problem([] {
    PhaseRetrievalProblem::Options o;
    o.measurements = 600;
    o.dim = 40;
    o.seed = 3;
    return o;
  }());
  run_epochs(state, problem, 0.007 / 600.0, state.range(0) != 0);
}
BENCHMARK(BM_PhaseEpoch)->Arg(0)->Arg(1);

}  // namespace

BENCHMARK_MAIN();
