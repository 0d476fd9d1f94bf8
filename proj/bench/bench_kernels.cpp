// Parallel kernels against their serial references. Arg = thread count.

#include <benchmark/benchmark.h>

#include "sideguess/exponent.hpp"
#include "sideguess/finite_n.hpp"

using namespace sideguess;

namespace {

ProblemSpec dsbs(double e) {
  const Alphabet b = Alphabet::indexed(2);
  return ProblemSpec(JointPmf(b, b, {(1 - e) / 2, e / 2, e / 2, (1 - e) / 2}), DistortionSpec::hamming(b, 0.05), 1.0,
                     0.3);
}

SolverOptions small_search(int threads) {
  SolverOptions o;
  o.starts = 8;
  o.polished_starts = 2;
  o.max_evaluations = 60;
  o.threads = threads;
  return o;
}

void BM_ExponentSerial(benchmark::State& state) {
  const ProblemSpec spec = dsbs(0.1);
  for (auto _ : state) benchmark::DoNotOptimize(compute_exponent_serial(spec, small_search(1)).value);
}

void BM_ExponentParallel(benchmark::State& state) {
  const ProblemSpec spec = dsbs(0.1);
  const SolverOptions o = small_search(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(compute_exponent(spec, o).value);
}

// n = 3 with four messages: 2795 canonical helper tables.
FiniteNInstance helper_instance() { return {dsbs(0.1).with_budget(1.0 / 3.0), 3, 4}; }

void BM_HelperSerial(benchmark::State& state) {
  const FiniteNInstance inst = helper_instance();
  for (auto _ : state) benchmark::DoNotOptimize(best_helper_moment_serial(inst).moment);
}

void BM_HelperParallel(benchmark::State& state) {
  const FiniteNInstance inst = helper_instance();
  OracleOptions o;
  o.threads = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(best_helper_moment(inst, o).moment);
}

}  // namespace

BENCHMARK(BM_ExponentSerial)->Unit(benchmark::kMillisecond)->Iterations(1);
BENCHMARK(BM_ExponentParallel)->Arg(1)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond)->Iterations(1);
BENCHMARK(BM_HelperSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_HelperParallel)->Arg(1)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
