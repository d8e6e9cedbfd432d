#include <fmt/format.h>

#include <cmath>
#include <random>

#include "advasym/gaussian_moments.hpp"
#include "advasym/theory_solver.hpp"
#include "theory_internal.hpp"

namespace advasym {

namespace {

using detail::Domain;

// ---- isotropic, three equations in (alpha, mu, kappa) ------------------------

using V3 = std::array<double, 3>;
constexpr std::array<Domain, 3> kIsoDomains = {Domain::positive, Domain::free, Domain::positive};

LossMoments iso_moments(double alpha, double mu, double kappa, const ExperimentSpec& spec) {
  const double rho = std::hypot(alpha, mu);
  return loss_moments(spec.loss, spec.model, alpha, mu, spec.attack.eps_tr * rho, kappa);
}

V3 iso_residual(const V3& v, const ExperimentSpec& spec) {
  detail::check_finite(v, "q=2 residual");
  const double alpha = v[0], mu = v[1], kappa = v[2];
  if (!(alpha > 0) || !(kappa > 0)) throw DomainEscape("q=2 residual outside the domain");
  const double rho = std::hypot(alpha, mu);
  const double eps = spec.attack.eps_tr, lam = spec.ridge, delta = spec.delta;
  const LossMoments m = iso_moments(alpha, mu, kappa, spec);
  return {m.d2 - alpha * alpha / (kappa * kappa * delta),
          m.zd + 2 * lam * mu - eps * mu / rho * m.d,
          m.gd + 2 * alpha * lam - eps * alpha / rho * m.d - alpha / (delta * kappa)};
}

detail::FixedPointOutcome<3> iso_newton(const V3& start, const ExperimentSpec& spec, const SolverOptions& opts) {
  detail::FixedPointOutcome<3> out;
  out.v = start;
  try {
    // polish well below tol; the stiff near-separable cells have kappa in the thousands
    detail::newton_solve(
        out.v, [&](const V3& x) { return iso_residual(x, spec); }, kIsoDomains, std::max(1e-14, 1e-4 * opts.tol),
        std::max(50, opts.max_iter / 20), out.iterations, out.residual);
    // alpha pinned at the floor zeroes the alpha equation without solving it
    out.converged = out.residual <= opts.tol && out.v[0] > 1e3 * detail::kLower;
  } catch (const DomainEscape&) {
    out.converged = false;
  }
  return out;
}

detail::FixedPointOutcome<3> iso_run(double ridge, double eps, const V3& start, const ExperimentSpec& spec,
                                     const SolverOptions& opts) {
  ExperimentSpec stage = spec;
  stage.ridge = ridge;
  stage.attack.eps_tr = eps;
  return iso_newton(start, stage, opts);
}

// Standard ERM at a large ridge (shared by every attack norm, so taken from
// the q = inf fixed point), then the training budget and the ridge are walked
// to their targets. Steep stretches near robust separability are crossed at
// the large ridge.
detail::FixedPointOutcome<3> iso_homotopy(const ExperimentSpec& spec, const SolverOptions& opts) {
  const double top = std::max(spec.ridge, 0.1);
  ExperimentSpec base = spec;
  base.attack = {AttackNorm::linf, 0.0, 0.0};
  base.ridge = top;
  SolverOptions o;
  o.restarts = 0;
  o.tol = opts.tol;
  o.max_iter = opts.max_iter;
  const SaddlePoint p = solve_linf_fixed_point(base, o);
  auto out = iso_run(top, 0.0, {p.alpha, p.mu, p.tau1 / p.beta}, spec, opts);
  const double eps = spec.attack.eps_tr;
  if (out.converged)
    out = detail::walk(0.0, eps, out, [&](double e, const V3& s) { return iso_run(top, e, s, spec, opts); }, false);
  if (out.converged)
    out = detail::walk(top, spec.ridge, out, [&](double r, const V3& s) { return iso_run(r, eps, s, spec, opts); },
                       true);
  return out;
}

// ---- general spectrum, nine variables -----------------------------------------

using V9 = std::array<double, 9>;
enum Idx { kAlpha = 0, kTau1, kW, kMu, kTau2, kBeta, kGamma, kEta, kTau3 };
constexpr std::array<Domain, 9> kGenDomains = {Domain::positive, Domain::positive,    Domain::nonnegative,
                                               Domain::free,     Domain::positive,    Domain::positive,
                                               Domain::nonnegative, Domain::free,     Domain::positive};

// rho = k a with a = p H + q V, k = c / (c + 2B), c = tau2 L / alpha.
struct RidgeStats {
  double e2 = 0;    // E rho^2
  double le2 = 0;   // E L rho^2
  double e_lv = 0;  // E L V rho / Ct
  double e_sh = 0;  // E sqrt(L) H rho
  double psi = 0;   // E min_rho B rho^2 + (c/2)(rho - a)^2
};

RidgeStats ridge_block(const V9& v, const ExperimentSpec& spec) {
  const double alpha = v[kAlpha], tau2 = v[kTau2], beta = v[kBeta], gamma = v[kGamma], eta = v[kEta],
               tau3 = v[kTau3];
  const double B = spec.attack.eps_tr * gamma / (2 * tau3) + spec.ridge;
  const bool gmm = spec.model.kind == ModelKind::gmm;
  const double zt2 = spec.model.zeta_tilde * spec.model.zeta_tilde;
  const double z2 = spec.model.zeta * spec.model.zeta;
  RidgeStats s;
  for (const auto& c : spec.pi_dist.components()) {
    const double L = c.lambda;
    const double ct = gmm ? zt2 * L : z2;
    const double p = alpha * beta / (tau2 * std::sqrt(spec.delta * L));
    const double q = alpha * eta / (tau2 * ct);
    const double cc = tau2 * L / alpha;
    const double k = cc / (cc + 2 * B);
    const double v2 = c.t_normal ? 1.0 : c.v * c.v;
    const double ea2 = p * p + q * q * v2;
    const double w = c.weight;
    s.e2 += w * k * k * ea2;
    s.le2 += w * L * k * k * ea2;
    s.e_lv += w * L * k * q * v2 / ct;
    s.e_sh += w * std::sqrt(L) * k * p;
    s.psi += w * B * cc / (2 * B + cc) * ea2;
  }
  return s;
}

LossMoments gen_moments(const V9& v, const ExperimentSpec& spec) {
  return loss_moments(spec.loss, spec.model, v[kAlpha], v[kMu], v[kW], v[kTau1] / v[kBeta]);
}

double gen_update(int i, const V9& v, const LossMoments& lm, const RidgeStats& rs, const ExperimentSpec& spec) {
  const double alpha = v[kAlpha], tau1 = v[kTau1], mu = v[kMu], tau2 = v[kTau2], beta = v[kBeta];
  const double c = spec.model.signal_scale();
  switch (i) {
    case kEta: return mu * tau2 * c * c / alpha - lm.zd;
    case kMu: return rs.e_lv;
    case kGamma: return -lm.d;
    case kBeta: return std::sqrt(lm.d2);
    case kTau1: return rs.e_sh / std::sqrt(spec.delta);
    case kAlpha: return tau1 * tau2 / beta + lm.gp;
    case kTau3: return std::sqrt(rs.e2);
    case kW: return spec.attack.eps_tr * v[kTau3];
    case kTau2: return tau2 * std::sqrt(rs.le2 / (alpha * alpha + mu * mu * c * c));
  }
  return v[i];
}

V9 gen_residual(const V9& v, const ExperimentSpec& spec) {
  detail::check_finite(v, "q=2 residual");
  const LossMoments lm = gen_moments(v, spec);
  const RidgeStats rs = ridge_block(v, spec);
  V9 r;
  for (int i = 0; i < 9; ++i) r[i] = gen_update(i, v, lm, rs, spec) - v[i];
  return r;
}

void gen_sweep(V9& v, const ExperimentSpec& spec, double omega) {
  auto relax = [&](int i, const LossMoments& lm, const RidgeStats& rs) {
    const double fresh = gen_update(i, v, lm, rs, spec);
    v[i] = detail::project(kGenDomains[i], (1 - omega) * v[i] + omega * fresh);
  };
  LossMoments lm = gen_moments(v, spec);
  RidgeStats rs = ridge_block(v, spec);
  relax(kEta, lm, rs);
  rs = ridge_block(v, spec);
  relax(kMu, lm, rs);
  lm = gen_moments(v, spec);
  relax(kGamma, lm, rs);
  relax(kBeta, lm, rs);
  rs = ridge_block(v, spec);
  relax(kTau1, lm, rs);
  lm = gen_moments(v, spec);
  relax(kAlpha, lm, rs);
  rs = ridge_block(v, spec);
  relax(kTau3, lm, rs);
  relax(kW, lm, rs);
  rs = ridge_block(v, spec);
  relax(kTau2, lm, rs);
  for (double x : v) {
    if (std::abs(x) >= detail::kUpper) throw DomainEscape("q=2 solver: iterate diverged");
  }
}

V9 to_v9(const SaddlePoint& p) {
  const auto a = p.vars();
  V9 v;
  for (int i = 0; i < 8; ++i) v[i] = a[i];
  v[kTau3] = std::isfinite(p.tau3) ? p.tau3 : 1.0;
  return v;
}

}  // namespace

double L2IsoSolution::beta(double delta) const { return alpha / (kappa * std::sqrt(delta)); }
double L2IsoSolution::tau(double delta) const { return kappa * beta(delta); }

SaddlePoint L2IsoSolution::to_saddle_point(const ExperimentSpec& spec) const {
  SaddlePoint p;
  const double rho = std::hypot(alpha, mu);
  p.alpha = alpha;
  p.mu = mu;
  p.beta = beta(spec.delta);
  p.tau1 = tau(spec.delta);
  p.w = spec.attack.eps_tr * rho;
  p.u = rho;
  p.tau2 = kNaN;
  p.eta = kNaN;
  p.gamma = -iso_moments(alpha, mu, kappa, spec).d;
  p.residual = residual;
  p.iterations = iterations;
  p.converged = converged;
  p.restarts_agree = restarts_agree;
  p.restarts_failed = restarts_failed;
  return p;
}

double objective_l2_iso(double alpha, double mu, double tau, double beta, const ExperimentSpec& spec) {
  if (!(alpha > 0) || !(tau > 0) || !(beta > 0)) throw DomainEscape("objective evaluated outside the domain");
  const double rho = std::hypot(alpha, mu);
  const LossMoments m = loss_moments(spec.loss, spec.model, alpha, mu, spec.attack.eps_tr * rho, tau / beta);
  return beta * tau / 2 - alpha * beta / std::sqrt(spec.delta) + spec.ridge * (alpha * alpha + mu * mu) + m.env;
}

std::array<double, 3> residual_l2_iso(double alpha, double mu, double kappa, const ExperimentSpec& spec) {
  return iso_residual({alpha, mu, kappa}, spec);
}

L2IsoSolution solve_l2_iso(const ExperimentSpec& spec, const SolverOptions& opts) {
  spec.validate();
  if (spec.attack.q != AttackNorm::l2) throw std::invalid_argument("solve_l2_iso: q must be 2");
  if (!spec.pi_dist.is_isotropic()) throw std::invalid_argument("solve_l2_iso: covariance must be isotropic");

  detail::FixedPointOutcome<3> out;
  int spent = 0;
  const auto& w = opts.warm_start;
  if (w && std::isfinite(w->alpha) && std::isfinite(w->tau1) && std::isfinite(w->beta)) {
    out = iso_newton({w->alpha, w->mu, w->tau1 / w->beta}, spec, opts);
    spent = out.iterations;
  }
  if (!out.converged) {
    out = iso_homotopy(spec, opts);
    spent += out.iterations;
  }
  if (!out.converged) throw NonConvergence("solve_l2_iso: Newton stalled at residual " + std::to_string(out.residual));
  if (spent > opts.max_iter)
    throw NonConvergence("solve_l2_iso: " + std::to_string(spent) + " iterations exceed max_iter");

  L2IsoSolution sol;
  sol.alpha = out.v[0];
  sol.mu = out.v[1];
  sol.kappa = out.v[2];
  sol.residual = out.residual;
  sol.iterations = spent;
  sol.converged = true;

  const auto verdict = detail::restart_probe(out.v, kIsoDomains, opts, [&](const V3& s) {
    auto o = iso_newton(s, spec, opts);
    if (!o.converged) {
      o = detail::ridge_continuation(spec.ridge, s, [&](double r, const V3& x) {
        return iso_run(r, spec.attack.eps_tr, x, spec, opts);
      });
    }
    return o;
  });
  sol.restarts_agree = verdict.agree;
  sol.restarts_failed = verdict.failed;
  return sol;
}

double l2_rational_term(const SpectralJointDistribution& dist, ModelKind kind, double num, double den) {
  double s = 0;
  for (const auto& c : dist.components()) {
    const double v2 = c.t_normal ? 1.0 : c.v * c.v;
    const double lt = kind == ModelKind::gmm ? 1.0 / c.lambda : c.lambda;
    s += c.weight * (num + v2 * lt) / (den + c.lambda);
  }
  return s;
}

double objective_l2_general(const SaddlePoint& point, const ExperimentSpec& spec) {
  const V9 v = to_v9(point);
  const double alpha = v[kAlpha], tau1 = v[kTau1], w = v[kW], mu = v[kMu], tau2 = v[kTau2], beta = v[kBeta],
               gamma = v[kGamma], eta = v[kEta], tau3 = v[kTau3];
  if (!(alpha > 0) || !(tau1 > 0) || !(tau2 > 0) || !(beta > 0) || !(tau3 > 0))
    throw DomainEscape("objective evaluated outside the positive orthant");
  const double c2 = std::pow(spec.model.signal_scale(), 2);
  const double eps = spec.attack.eps_tr;
  const double f = -gamma * w - mu * mu * tau2 * c2 / (2 * alpha) - alpha * beta * beta / (2 * spec.delta * tau2) -
                   alpha * tau2 / 2 + beta * tau1 / 2 + eta * mu - eta * eta * alpha / (2 * tau2 * c2) +
                   eps * gamma * tau3 / 2;
  return f + gen_moments(v, spec).env + ridge_block(v, spec).psi;
}

std::array<double, 9> residual_l2_general(const SaddlePoint& point, const ExperimentSpec& spec) {
  return gen_residual(to_v9(point), spec);
}

detail::FixedPointOutcome<9> gen_solve_from(const V9& start, const ExperimentSpec& spec, const SolverOptions& opts) {
  SolverOptions stage_opts = opts;
  stage_opts.max_iter = std::min(opts.max_iter, 400);
  return detail::staged_solve(start, spec.ridge, spec.attack.eps_tr, [&](double ridge, double eps, const V9& s) {
    ExperimentSpec stage = spec;
    stage.ridge = ridge;
    stage.attack.eps_tr = eps;
    return detail::run_fixed_point(
        s, [&](V9& v) { gen_sweep(v, stage, opts.damping); }, [&](const V9& v) { return gen_residual(v, stage); },
        kGenDomains, stage_opts, "solve_l2_general");
  });
}

SaddlePoint solve_l2_general(const ExperimentSpec& spec, const SolverOptions& opts) {
  spec.validate();
  if (spec.attack.q != AttackNorm::l2) throw std::invalid_argument("solve_l2_general: q must be 2");

  SaddlePoint init;
  if (opts.warm_start) init = *opts.warm_start;
  else init.w = spec.attack.eps_tr;
  V9 start = to_v9(init);
  for (int i = 0; i < 9; ++i) start[i] = detail::project(kGenDomains[i], start[i]);
  const auto out = gen_solve_from(start, spec, opts);
  if (!out.converged || out.iterations > opts.max_iter) {
    throw NonConvergence(fmt::format("solve_l2_general: no convergence ({} iterations of {}, residual {:.3g})",
                                     out.iterations, opts.max_iter, out.residual));
  }
  SaddlePoint sp;
  std::array<double, 8> a;
  for (int i = 0; i < 8; ++i) a[i] = out.v[i];
  sp.set_vars(a);
  sp.tau3 = out.v[kTau3];
  sp.u = out.v[kTau3];
  sp.residual = out.residual;
  sp.step = out.step;
  sp.iterations = out.iterations;
  sp.converged = true;

  const auto verdict =
      detail::restart_probe(out.v, kGenDomains, opts, [&](const V9& s) { return gen_solve_from(s, spec, opts); });
  sp.restarts_agree = verdict.agree;
  sp.restarts_failed = verdict.failed;
  return sp;
}

}  // namespace advasym
