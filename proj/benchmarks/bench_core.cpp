#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "advasym/erm_lab.hpp"
#include "advasym/gaussian_moments.hpp"
#include "advasym/losses_prox.hpp"
#include "advasym/theory_solver.hpp"

using namespace advasym;

namespace {

std::vector<EnvelopeQuery> queries(int n) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> ux(-5, 5), uk(0.05, 10);
  std::vector<EnvelopeQuery> out(n);
  for (auto& q : out) q = {ux(rng), uk(rng)};
  return out;
}

void BM_Prox(benchmark::State& state) {
  const auto kind = static_cast<LossKind>(state.range(0));
  const auto qs = queries(1024);
  for (auto _ : state) {
    double acc = 0;
    for (const auto& q : qs) acc += prox(kind, q);
    benchmark::DoNotOptimize(acc);
  }
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(qs.size()));
  state.SetLabel(std::string(loss_name(kind)));
}
BENCHMARK(BM_Prox)->DenseRange(0, 2);

void BM_EnvelopeGrad(benchmark::State& state) {
  const auto kind = static_cast<LossKind>(state.range(0));
  const auto qs = queries(1024);
  for (auto _ : state) {
    double acc = 0;
    for (const auto& q : qs) acc += moreau_env_grad(kind, q).d_kappa;
    benchmark::DoNotOptimize(acc);
  }
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(qs.size()));
  state.SetLabel(std::string(loss_name(kind)));
}
BENCHMARK(BM_EnvelopeGrad)->DenseRange(0, 2);

// one expectation over the Gaussian margin, the inner cost of every sweep
void BM_LossMoments(benchmark::State& state) {
  const auto kind = static_cast<LossKind>(state.range(0));
  ModelSpec model;
  model.kind = state.range(1) ? ModelKind::glm : ModelKind::gmm;
  for (auto _ : state) benchmark::DoNotOptimize(loss_moments(kind, model, 0.8, 1.1, 0.2, 0.7));
  state.SetLabel(std::string(loss_name(kind)) + (model.kind == ModelKind::glm ? "/glm" : "/gmm"));
}
BENCHMARK(BM_LossMoments)->ArgsProduct({{0, 1, 2}, {0, 1}});

ExperimentSpec theory_spec(AttackNorm q, double delta) {
  ExperimentSpec s;
  s.loss = LossKind::hinge;
  s.attack = {q, 0.25, 0.25};
  s.delta = delta;
  s.ridge = 1e-4;
  return s.with_derived_zeta();
}

void BM_SolveLinf(benchmark::State& state) {
  const ExperimentSpec s = theory_spec(AttackNorm::linf, static_cast<double>(state.range(0)));
  SolverOptions o;
  o.restarts = 0;
  for (auto _ : state) benchmark::DoNotOptimize(solve_linf_fixed_point(s, o));
}
BENCHMARK(BM_SolveLinf)->Arg(1)->Arg(4)->Unit(benchmark::kMillisecond);

void BM_SolveL2Iso(benchmark::State& state) {
  const ExperimentSpec s = theory_spec(AttackNorm::l2, static_cast<double>(state.range(0)));
  SolverOptions o;
  o.restarts = 0;
  for (auto _ : state) benchmark::DoNotOptimize(solve_l2_iso(s, o));
}
BENCHMARK(BM_SolveL2Iso)->Arg(1)->Arg(4)->Unit(benchmark::kMillisecond);

void BM_Train(benchmark::State& state) {
  ExperimentSpec s = theory_spec(state.range(1) ? AttackNorm::l2 : AttackNorm::linf, 2.0);
  const Dataset d = generate(s, static_cast<int>(state.range(0)), 11);
  for (auto _ : state) benchmark::DoNotOptimize(train(d, s));
  state.SetLabel(state.range(1) ? "q=2" : "q=inf");
}
BENCHMARK(BM_Train)->ArgsProduct({{50, 200}, {0, 1}})->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
