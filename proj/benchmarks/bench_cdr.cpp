#include <benchmark/benchmark.h>

#include <cmath>
#include <random>
#include <vector>

#include "cdr/estimator.hpp"
#include "cdr/gauss2d.hpp"
#include "cdr/likelihood.hpp"
#include "cdr/simulate.hpp"

namespace {

cdr::HsmParams params() {
  cdr::HsmParams p;
  p.mu = Eigen::Vector3d(-0.5, 0.5, 2.5);
  p.nu = Eigen::Vector2d(1.0, 0.5);
  p.rho = 0.5;
  return p;
}

void BM_BivCdf(benchmark::State& state) {
  std::mt19937_64 gen(1);
  std::uniform_real_distribution<double> ab(-5.0, 5.0);
  std::uniform_real_distribution<double> r(-0.99, 0.99);
  std::vector<cdr::BivArgs> args(1024);
  for (auto& a : args) a = {ab(gen), ab(gen), r(gen)};
  std::size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(cdr::biv_cdf(args[i++ & 1023]));
  }
}
BENCHMARK(BM_BivCdf);

// One step-3 log-likelihood with score and Hessian.
void BM_Step3Loglik(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto sim = cdr::simulate_hsm(n, params(), 2);
  const auto layout = cdr::default_layout(sim.table);
  const auto design = cdr::make_design(sim.table, layout);
  const auto truth = sim.truth;
  const cdr::Step3Plugins pl{truth.mu_at(0.0), truth.mu_at(0.5), truth.nu_at(1.0), truth.rho_coefs(layout.sorting0)};
  const Eigen::VectorXd rho = truth.rho_coefs(layout.sorting);
  for (auto _ : state) {
    benchmark::DoNotOptimize(cdr::step3_loglik(rho, pl, design, 0.5, 1.0));
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * n));
}
BENCHMARK(BM_Step3Loglik)->Arg(1000)->Arg(10000);

// Full three-step fit on a 3 x 5 grid, one worker.
void BM_SmallFit(benchmark::State& state) {
  const auto sim = cdr::simulate_hsm(2000, params(), 3);
  const auto layout = cdr::default_layout(sim.table);
  const cdr::GridSpec grid{{0.0, 0.5, 1.5}, cdr::selected_y_quantiles(sim.table, {0.1, 0.3, 0.5, 0.7, 0.9})};
  cdr::FitOptions opts;
  opts.workers = 1;
  for (auto _ : state) {
    benchmark::DoNotOptimize(cdr::fit(sim.table, grid, layout, opts));
  }
}
BENCHMARK(BM_SmallFit)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
