// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.
//   acceptance [--only N]

#include <fmt/core.h>

#include <chrono>
#include <cmath>
#include <cstring>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "advasym/erm_lab.hpp"
#include "advasym/error_formulas.hpp"
#include "advasym/harness.hpp"
#include "advasym/losses_prox.hpp"
#include "support.hpp"

using namespace advasym;
using advasym::testing::fd_grad_l2_iso;
using advasym::testing::fd_grad_max;
using advasym::testing::max_gap;

namespace {

struct Verdict {
  bool pass = true;
  std::string detail;
};

const LossKind kLosses[] = {LossKind::hinge, LossKind::logistic, LossKind::exponential};

double rel(double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); }

// ---------------------------------------------------------------------------

Verdict envelope_suite() {
  std::mt19937_64 rng(101);
  std::uniform_real_distribution<double> ux(-5, 5), lk(std::log(0.05), std::log(10.0)), u01(0, 1);
  const double h = 1e-5;
  double worst_stat = 0, worst_grad = 0;
  int env_above = 0, non_monotone = 0, checks = 0;

  auto grad_gap = [&](double an, double fp, double fm) {
    const double fd = (fp - fm) / (2 * h);
    return std::abs(an - fd) / std::max(1.0, std::abs(fd));
  };

  for (LossKind k : kLosses) {
    for (int i = 0; i < 10000; ++i, ++checks) {
      const double x = ux(rng), kappa = std::exp(lk(rng));
      const double p = prox(k, {x, kappa});
      const double g = (x - p) / kappa;  // must lie in dL(p)
      double stat;
      if (k == LossKind::hinge) {
        if (p < 1) stat = std::abs(g + 1);
        else if (p > 1) stat = std::abs(g);
        else stat = std::max({0.0, g, -1 - g});
      } else {
        stat = std::abs(g - loss_deriv(k, p)) / std::max(1.0, std::abs(g));
      }
      worst_stat = std::max(worst_stat, stat);

      const auto an = moreau_env_grad(k, {x, kappa});
      worst_grad = std::max(worst_grad, grad_gap(an.d_x, moreau_env(k, {x + h, kappa}), moreau_env(k, {x - h, kappa})));
      worst_grad =
          std::max(worst_grad, grad_gap(an.d_kappa, moreau_env(k, {x, kappa + h}), moreau_env(k, {x, kappa - h})));

      const double env = moreau_env(k, {x, kappa});
      if (env > loss_eval(k, x) + 1e-12) ++env_above;
      const double k2 = kappa * (1 + 2 * u01(rng));
      if (moreau_env(k, {x, k2}) > env + 1e-12) ++non_monotone;
    }
  }
  for (int i = 0; i < 10000; ++i, ++checks) {
    const double x = ux(rng), kappa = std::exp(lk(rng));
    const CompositePenalty pen{2 * u01(rng)};
    const double p = prox_l1_l2sq(x, kappa, pen);
    const double stat = p != 0 ? std::abs((p - x) / kappa + (p > 0 ? 1 : -1) + 2 * pen.c * p)
                               : std::max(0.0, std::abs(x / kappa) - 1);
    worst_stat = std::max(worst_stat, stat);
    const auto an = env_l1_l2sq_grad(x, kappa, pen);
    worst_grad = std::max(worst_grad, grad_gap(an.d_x, env_l1_l2sq(x + h, kappa, pen), env_l1_l2sq(x - h, kappa, pen)));
    worst_grad =
        std::max(worst_grad, grad_gap(an.d_kappa, env_l1_l2sq(x, kappa + h, pen), env_l1_l2sq(x, kappa - h, pen)));
    const double env = env_l1_l2sq(x, kappa, pen);
    if (env > std::abs(x) + pen.c * x * x + 1e-12) ++env_above;
    if (env_l1_l2sq(x, kappa * (1 + 2 * u01(rng)), pen) > env + 1e-12) ++non_monotone;
  }
  Verdict v;
  v.pass = worst_stat <= 1e-8 && worst_grad <= 1e-6 && env_above == 0 && non_monotone == 0;
  v.detail = fmt::format("{} draws, max stationarity {:.1e}, max gradient gap {:.1e}, env > loss {}, non-monotone {}",
                         checks, worst_stat, worst_grad, env_above, non_monotone);
  return v;
}

// ---------------------------------------------------------------------------

Verdict reduction_oracle() {
  std::mt19937_64 rng(202);
  std::uniform_int_distribution<int> un(2, 30), um(1, 20), ul(0, 2), uk(0, 1);
  std::uniform_real_distribution<double> ue(0, 2);
  std::normal_distribution<double> g;
  double worst = 0, worst_search = -1e300;
  int instances = 0;
  for (AttackNorm q : {AttackNorm::l2, AttackNorm::linf}) {
    for (int rep = 0; rep < 1000; ++rep, ++instances) {
      const int n = un(rng), m = um(rng);
      ExperimentSpec s;
      s.model.kind = uk(rng) ? ModelKind::gmm : ModelKind::glm;
      s.attack = {q, ue(rng), 0};
      s.loss = kLosses[ul(rng)];
      s.delta = static_cast<double>(m) / n;
      s.ridge = 0.01 * ue(rng);
      const Dataset d = generate(s, n, rng());
      Eigen::VectorXd theta(n);
      for (auto& t : theta) t = g(rng);
      double sum = 0;
      for (int i = 0; i < d.m(); ++i) {
        // random search on the first sample only; the closed form on all
        const int draws = i == 0 ? 10000 : 0;
        const InnerMax im = inner_max_oracle(theta, d.features.row(i).transpose(), d.labels[i], s.attack, s.loss, rng(), draws);
        sum += im.value;
        if (i == 0) worst_search = std::max(worst_search, (im.search_best - im.value) / std::max(1.0, im.value));
      }
      const double agg = sum / d.m() + s.ridge * theta.squaredNorm();
      worst = std::max(worst, rel(robust_objective(theta, d, s.attack, s.loss, s.ridge), agg));
    }
  }
  Verdict v;
  v.pass = worst <= 1e-12 && worst_search <= 1e-12;
  v.detail = fmt::format("{} instances, max |objective - inner-max aggregate| {:.1e}, max search excess {:.1e}",
                         instances, worst, worst_search);
  return v;
}

// ---------------------------------------------------------------------------

Verdict solver_stationarity() {
  const std::vector<std::pair<const char*, SpectralJointDistribution>> dists = {
      {"iso", SpectralJointDistribution::isotropic()},
      {"two-level", SpectralJointDistribution::product_normal({{0.5, 0.5}, {2.0, 0.5}})},
      {"atoms", SpectralJointDistribution::from_atoms({{1.0, 0.5, 1.0, 0.3}, {-0.5, 1.0, -0.5, 0.4}, {2.0, 3.0, 2.0, 0.3}})},
  };
  int specs = 0, bad = 0, failed_restarts = 0;
  double worst_fd = 0, worst_res = 0, worst_secs = 0;
  std::string first_bad;
  for (const auto& [name, dist] : dists) {
    for (ModelKind mk : {ModelKind::gmm, ModelKind::glm}) {
      for (LossKind loss : kLosses) {
        for (double delta : {0.5, 2.0, 6.0}) {
          for (double eps : {0.0, 0.4}) {
            for (AttackNorm q : {AttackNorm::linf, AttackNorm::l2}) {
              ExperimentSpec s;
              s.model.kind = mk;
              s.loss = loss;
              s.delta = delta;
              s.ridge = 1e-3;
              s.attack = {q, eps, eps};
              s.pi_dist = dist;
              s = s.with_derived_zeta();
              ++specs;
              const auto t0 = std::chrono::steady_clock::now();
              double fd = 0;
              SaddlePoint p;
              bool ok = true;
              try {
                if (q == AttackNorm::linf) {
                  if (dist.is_isotropic()) {
                    p = solve_linf_fixed_point(s);
                    fd = fd_grad_max(p, 8, [&](const SaddlePoint& x) { return objective_linf_iso(x, s); });
                  } else {
                    p = solve_linf_diag(s);
                    fd = fd_grad_max(p, 8, [&](const SaddlePoint& x) { return objective_linf_diag(x, s); });
                  }
                } else if (dist.is_isotropic()) {
                  const L2IsoSolution z = solve_l2_iso(s);
                  p = z.to_saddle_point(s);
                  fd = fd_grad_l2_iso(z, s);
                } else {
                  p = solve_l2_general(s);
                  fd = fd_grad_max(p, 9, [&](const SaddlePoint& x) { return objective_l2_general(x, s); });
                }
                ok = p.converged && p.residual <= 1e-8 && fd <= 1e-5 && p.restarts_agree;
              } catch (const std::exception& e) {
                ok = false;
                if (first_bad.empty()) first_bad = e.what();
              }
              const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
              worst_secs = std::max(worst_secs, secs);
              worst_fd = std::max(worst_fd, fd);
              worst_res = std::max(worst_res, p.residual);
              failed_restarts += p.restarts_failed;
              if (!ok || secs > 60) {
                ++bad;
                if (first_bad.empty()) {
                  first_bad = fmt::format("{} {} {} q={} delta={} eps={}: res {:.1e} fd {:.1e} agree {}", name,
                                          model_name(mk), loss_name(loss), attack_norm_name(q), delta, eps,
                                          p.residual, fd, p.restarts_agree);
                }
              }
            }
          }
        }
      }
    }
  }
  Verdict v;
  v.pass = bad == 0;
  v.detail = fmt::format(
      "{} specs, {} bad, max residual {:.1e}, max |FD gradient| {:.1e}, slowest {:.1f} s, {} of {} restarts did not "
      "converge (all converged restarts agree to 1e-6 relative){}",
      specs, bad, worst_res, worst_fd, worst_secs, failed_restarts, specs * SolverOptions{}.restarts,
      first_bad.empty() ? "" : "; first: " + first_bad);
  return v;
}

// ---------------------------------------------------------------------------

Verdict large_sample_limit_check() {
  Verdict v;
  std::string parts;
  for (double eps_tr : {0.2, 0.4, 0.8}) {
    ExperimentSpec s;
    s.loss = LossKind::exponential;
    s.ridge = 1e-6;
    s.delta = 200;
    s.attack = {AttackNorm::l2, eps_tr, 0};
    const auto [a0, m0] = large_sample_limit(eps_tr);
    try {
      const SaddlePoint p = solve_theory(s);
      const bool am = std::abs(p.alpha - a0) <= 0.02 && std::abs(p.mu - m0) <= 0.02;
      double worst_err = 0;
      for (double eps_ts : {0.1, 0.5}) {
        worst_err = std::max(worst_err, std::abs(adv_error_theory(p, s, eps_ts) - bayes_adv_error_gmm(1.0, eps_ts, AttackNorm::l2)));
      }
      v.pass = v.pass && am && worst_err <= 0.01;
      parts += fmt::format("{}eps_tr={}: alpha {:.4f} mu {:.4f} (target {:.1f}, {:.1f}), max error gap {:.4f}",
                           parts.empty() ? "" : "; ", eps_tr, p.alpha, p.mu, a0, m0, worst_err);
    } catch (const std::exception& e) {
      v.pass = false;
      parts += fmt::format("{}eps_tr={}: {}", parts.empty() ? "" : "; ", eps_tr, e.what());
    }
  }
  v.detail = parts;
  return v;
}

// ---------------------------------------------------------------------------

SweepConfig protocol(AttackNorm q) {
  SweepConfig c;
  c.base.attack.q = q;
  c.base.loss = LossKind::hinge;
  c.base.ridge = 1e-4;
  c.delta = {1, 2, 4, 8};
  c.eps_tr = {0, 0.25, 0.5};
  c.eps_ts = {0, 0.5};
  c.trials = 20;
  c.n = 200;
  c.n_test = 3000;
  c.seed = 1;
  return c;
}

Verdict theory_vs_simulation() {
  Verdict v;
  for (AttackNorm q : {AttackNorm::linf, AttackNorm::l2}) {
    CompareSummary s;
    const auto t0 = std::chrono::steady_clock::now();
    run_compare(protocol(q), s);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    v.pass = v.pass && s.pass();
    v.detail += fmt::format("{}q={}: {}/{} cells within max(0.02, 3 stderr), max gaps adv {:.4f} std {:.4f}, {:.0f} s",
                            v.detail.empty() ? "" : "; ", attack_norm_name(q), s.cells - s.failures, s.cells,
                            s.max_adv_gap, s.max_std_gap, secs);
  }
  return v;
}

// ---------------------------------------------------------------------------

Verdict monotonicity() {
  Verdict v;
  int cells = 0, violations = 0;
  for (AttackNorm q : {AttackNorm::linf, AttackNorm::l2}) {
    const SweepConfig c = protocol(q);
    const auto rows = run_theory(c).rows;
    const std::size_t stride = c.eps_tr.size() * c.eps_ts.size();
    for (std::size_t i = 0; i < rows.size(); ++i) {
      ++cells;
      const ResultRow& r = rows[i];
      if (r.theory_adv < r.bayes_adv) ++violations;
      if (i >= stride) {
        const ResultRow& prev = rows[i - stride];
        if (r.theory_adv > prev.theory_adv + 1e-12) ++violations;
        if (r.theory_std > prev.theory_std + 1e-12) ++violations;
        if (r.theory_adv - r.bayes_adv > prev.theory_adv - prev.bayes_adv + 1e-12) ++violations;
      }
    }
  }
  v.pass = violations == 0;
  v.detail = fmt::format("{} cells over q in {{inf, 2}}, {} violations", cells, violations);
  return v;
}

// ---------------------------------------------------------------------------

Verdict universality() {
  SweepConfig c;
  c.base.attack.q = AttackNorm::linf;
  c.base.loss = LossKind::hinge;
  c.delta = {1, 2, 4};
  c.eps_tr = {1};
  c.eps_ts = {1};
  c.noise = NoiseFamily::rademacher;
  c.seed = 7;
  const SweepResult t = run_theory(c);
  const SweepResult e = run_empirical(c);
  Verdict v;
  double worst = 0;
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    worst = std::max({worst, std::abs(t.rows[i].theory_adv - e.rows[i].emp_adv_mean),
                      std::abs(t.rows[i].theory_std - e.rows[i].emp_std_mean)});
    v.detail += fmt::format("delta={}: adv {:.4f} vs {:.4f}, std {:.4f} vs {:.4f}; ", t.rows[i].delta,
                            e.rows[i].emp_adv_mean, t.rows[i].theory_adv, e.rows[i].emp_std_mean, t.rows[i].theory_std);
  }
  v.pass = worst <= 0.02;
  v.detail += fmt::format("max gap {:.4f}", worst);
  return v;
}

// ---------------------------------------------------------------------------

Verdict degenerate_reductions() {
  double diag_gap = 0, gen_gap = 0, q_gap = 0;
  int specs = 0;
  std::string err;
  for (ModelKind mk : {ModelKind::gmm, ModelKind::glm}) {
    for (LossKind loss : kLosses) {
      for (double delta : {0.5, 2.0, 8.0}) {
        for (double eps : {0.0, 0.3}) {
          ExperimentSpec s;
          s.model.kind = mk;
          s.loss = loss;
          s.delta = delta;
          s.ridge = 1e-3;
          s.attack = {AttackNorm::linf, eps, eps};
          ExperimentSpec flat = s;
          flat.pi_dist = SpectralJointDistribution::product_normal({{1.0, 1.0}});
          try {
            ++specs;
            const SaddlePoint iso = solve_linf_fixed_point(s);
            const SaddlePoint diag = solve_linf_diag(flat);
            diag_gap = std::max({diag_gap, max_gap(iso, diag, 4), std::abs(diag.tau2 - (iso.tau2 - 2 * s.ridge * iso.alpha))});
            s.attack.q = flat.attack.q = AttackNorm::l2;
            const SaddlePoint l2 = solve_l2_iso(s).to_saddle_point(s);
            const SaddlePoint gen = solve_l2_general(flat);
            gen_gap = std::max({gen_gap, std::abs(l2.alpha - gen.alpha), std::abs(l2.mu - gen.mu), std::abs(l2.w - gen.w)});
            if (eps == 0) {
              q_gap = std::max({q_gap, std::abs(iso.alpha - l2.alpha), std::abs(iso.mu - l2.mu),
                                std::abs(std_error_theory(iso, s) - std_error_theory(l2, s))});
            }
          } catch (const std::exception& e) {
            if (err.empty()) err = e.what();
            diag_gap = gen_gap = q_gap = 1e300;
          }
        }
      }
    }
  }
  Verdict v;
  v.pass = diag_gap <= 1e-8 && gen_gap <= 1e-6 && q_gap <= 1e-4;
  v.detail = fmt::format("{} specs: diagonal vs isotropic {:.1e}, l2 general vs isotropic {:.1e}, eps_tr=0 across q {:.1e}{}",
                         specs, diag_gap, gen_gap, q_gap, err.empty() ? "" : "; " + err);
  return v;
}

// ---------------------------------------------------------------------------

Verdict error_formula_properties() {
  std::mt19937_64 rng(909);
  std::uniform_real_distribution<double> u(0.05, 3), u01(0, 1);
  double worst_scale = 0;
  int non_monotone = 0;
  for (ModelKind kind : {ModelKind::gmm, ModelKind::glm}) {
    ModelSpec m;
    m.kind = kind;
    for (int i = 0; i < 1000; ++i) {
      const KeyStats k{u(rng), u(rng) - 1, u(rng)};
      const double c = u(rng), e = u01(rng);
      const double base = adv_error_from_stats(m, k, e);
      worst_scale = std::max(worst_scale, std::abs(adv_error_from_stats(m, {c * k.u, c * k.mu, c * k.alpha}, e) - base));
      if (adv_error_from_stats(m, k, e + 0.05 * u01(rng)) < base - 1e-15) ++non_monotone;
    }
  }

  // population formula vs Monte Carlo on trained estimators
  std::uniform_int_distribution<int> ul(0, 2), un(40, 100);
  int outside = 0;
  double max_z = 0, z_sq = 0;
  const int estimators = 100;
  for (int i = 0; i < estimators; ++i) {
    ExperimentSpec s;
    s.model.kind = i % 2 ? ModelKind::glm : ModelKind::gmm;
    s.attack = {i % 4 < 2 ? AttackNorm::linf : AttackNorm::l2, u01(rng), 0};
    s.loss = kLosses[ul(rng)];
    s.delta = 0.5 + 3.5 * u01(rng);
    s.ridge = 1e-3;
    const Dataset d = generate(s, un(rng), rng());
    const TrainResult fit = train(d, s);
    const KeyStats k = key_stats(fit.theta, d, s.attack.q);
    const double eps_ts = u01(rng);
    const double pop = adv_error_from_stats(d.model, k, eps_ts);
    const ErrorReport mc = empirical_adv_error(fit.theta, d, s.attack.q, eps_ts, 3000, rng());
    const double z = (mc.adv_error - pop) / std::sqrt(pop * (1 - pop) / 3000);
    if (std::abs(z) > 3) ++outside;
    max_z = std::max(max_z, std::abs(z));
    z_sq += z * z;
  }
  Verdict v;
  v.pass = worst_scale <= 1e-12 && non_monotone == 0 && outside == 0;
  v.detail = fmt::format("scale invariance {:.1e}, non-monotone in eps' {}, {}/{} trained estimators outside 3 binomial "
                         "stderr of the population formula (max |z| {:.2f}, rms z {:.2f})",
                         worst_scale, non_monotone, outside, estimators, max_z, std::sqrt(z_sq / estimators));
  return v;
}

}  // namespace

int main(int argc, char** argv) {
  int only = 0;
  for (int i = 1; i < argc; ++i) {
    if (std::strcmp(argv[i], "--only") == 0 && i + 1 < argc) only = std::atoi(argv[++i]);
  }
  const std::vector<std::pair<const char*, std::function<Verdict()>>> criteria = {
      {"envelope calculus", envelope_suite},
      {"reduction oracle", reduction_oracle},
      {"solver stationarity", solver_stationarity},
      {"large-sample Bayes limit", large_sample_limit_check},
      {"theory vs simulation", theory_vs_simulation},
      {"monotonicity in delta", monotonicity},
      {"universality (rademacher)", universality},
      {"degenerate reductions", degenerate_reductions},
      {"error-formula properties", error_formula_properties},
  };
  // wall-clock limits in seconds; 0 means none (criterion 3 limits each spec)
  const double kBudget[] = {10, 30, 0, 60, 900, 0, 0, 0, 0};
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (only && only != id) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = criteria[i].second();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (kBudget[i] > 0 && secs > kBudget[i]) {
      v.pass = false;
      v.detail += fmt::format("; over the {:.0f} s budget", kBudget[i]);
    }
    fmt::print("[{}] {}. {} ({:.1f} s): {}\n", v.pass ? "PASS" : "FAIL", id, criteria[i].first, secs, v.detail);
    std::fflush(stdout);
    failed += !v.pass;
  }
  return failed ? 1 : 0;
}
