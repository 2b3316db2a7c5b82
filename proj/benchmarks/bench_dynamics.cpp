#include <benchmark/benchmark.h>

#include "popdyn/continuous.hpp"
#include "popdyn/discrete.hpp"
#include "popdyn/regularizer.hpp"

namespace {

using popdyn::Schedule;
using popdyn::SimplexState;
using popdyn::Vector;

popdyn::PayoffField builtin(const std::string& name) { return popdyn::make_field(popdyn::builtin_game(name)); }

void BM_Choice(benchmark::State& state, const char* name) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto reg = popdyn::make_regularizer(name, n);
  Vector y = Vector::LinSpaced(static_cast<Eigen::Index>(n), -1.0, 1.0);
  for (auto _ : state) {
    benchmark::DoNotOptimize(reg->choice(y));
    y(0) += 1e-9;
  }
}
BENCHMARK_CAPTURE(BM_Choice, entropic, "entropic")->Arg(3)->Arg(64)->Arg(1024);
BENCHMARK_CAPTURE(BM_Choice, euclidean, "euclidean")->Arg(3)->Arg(64)->Arg(1024);

void BM_RunDa(benchmark::State& state) {
  const auto game = builtin("gess");
  const popdyn::EntropicRegularizer ent(3);
  const auto steps = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        popdyn::run_da(game, ent, Schedule::power(1.0, 0.5), std::nullopt, SimplexState::uniform(3), steps));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_RunDa)->Arg(1000)->Arg(10000)->Unit(benchmark::kMillisecond);

void BM_IntegrateRbrd(benchmark::State& state) {
  const auto game = builtin("rps");
  const popdyn::EntropicRegularizer ent(3);
  popdyn::IntegrationOptions options;
  options.horizon = static_cast<double>(state.range(0));
  options.dt = 1e-3;
  options.max_records = 1000;
  const SimplexState x0(Vector{{0.6, 0.3, 0.1}});
  for (auto _ : state) benchmark::DoNotOptimize(popdyn::integrate_rbrd(game, ent, 1.0, x0, options));
}
BENCHMARK(BM_IntegrateRbrd)->Arg(1)->Arg(10)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
