#include <fmt/format.h>

#include <cmath>
#include <optional>
#include <random>

#include "advasym/gaussian_moments.hpp"
#include "advasym/theory_solver.hpp"
#include "theory_internal.hpp"

namespace advasym {

namespace {

using V8 = std::array<double, 8>;
enum Idx { kAlpha = 0, kTau1, kW, kMu, kTau2, kBeta, kGamma, kEta };

using detail::Domain;
constexpr std::array<Domain, 8> kDomains = {Domain::positive,    Domain::positive, Domain::nonnegative,
                                            Domain::free,        Domain::positive, Domain::positive,
                                            Domain::nonnegative, Domain::free};

// Which of the two scalar problems is being solved. The isotropic one keeps
// the ridge outside the l1 envelope (r alpha^2 + r mu^2); the diagonal one
// carries it inside as the l2^2 part of the composite penalty.
enum class Form { iso, diag };

// Expectations over (H, T, L) of rho = argmin A|rho| + B rho^2 + (c/2)(rho - a)^2
// with a = p H + q T, c = tau2 L / alpha.
struct L1Stats {
  double e_abs = 0;   // E|rho|
  double e2 = 0;      // E rho^2
  double le2 = 0;     // E L rho^2
  double e_t = 0;     // E T rho
  double e_lt = 0;    // E L T rho / Ct
  double e_h = 0;     // E H rho
  double e_sh = 0;    // E sqrt(L) H rho
  double e_r2 = 0;    // E (a - rho)^2
  double e_hr = 0;    // E H (a - rho)
  double e_tr = 0;    // E T (a - rho)
  double psi = 0;     // E of the minimized value
};

L1Stats l1_block(const V8& v, const ExperimentSpec& spec, Form form) {
  const double alpha = v[kAlpha], tau2 = v[kTau2], beta = v[kBeta], gamma = v[kGamma], eta = v[kEta];
  const double A = spec.attack.eps_tr * gamma;
  const double B = form == Form::diag ? spec.ridge : 0.0;
  const bool gmm = spec.model.kind == ModelKind::gmm;
  const double zt2 = spec.model.zeta_tilde * spec.model.zeta_tilde;
  const double z2 = spec.model.zeta * spec.model.zeta;
  L1Stats s;
  for (const auto& c : spec.pi_dist.components()) {
    const double L = form == Form::iso ? 1.0 : c.lambda;
    const double ct = form == Form::iso ? 1.0 : (gmm ? zt2 * L : z2);
    const double p = alpha * beta / (tau2 * std::sqrt(spec.delta * L));
    const double q = alpha * eta / (tau2 * ct);
    const double cc = tau2 * L / alpha;
    const double t = A / cc;
    const double k = cc / (cc + 2 * B);

    double e_h, e_t, et2, ea2, eta_;
    SoftMoments sm;
    if (c.t_normal) {
      sm = soft_moments(0.0, std::sqrt(p * p + q * q), t);
      e_h = p * k * sm.p_out;
      e_t = q * k * sm.p_out;
      et2 = 1.0;
      ea2 = p * p + q * q;
      eta_ = q;
    } else {
      sm = soft_moments(q * c.t, p, t);
      e_h = p * k * sm.p_out;
      e_t = c.t * k * sm.e;
      et2 = c.t * c.t;
      ea2 = p * p + q * q * et2;
      eta_ = q * et2;
    }
    const double e_abs = k * sm.e_abs;
    const double e2 = k * k * sm.e2;
    const double e_ar = k * (sm.e2 + t * sm.e_abs);
    const double r2 = ea2 - 2 * e_ar + e2;

    const double w = c.weight;
    s.e_abs += w * e_abs;
    s.e2 += w * e2;
    s.le2 += w * L * e2;
    s.e_t += w * e_t;
    s.e_lt += w * L * e_t / ct;
    s.e_h += w * e_h;
    s.e_sh += w * std::sqrt(L) * e_h;
    s.e_r2 += w * r2;
    s.e_hr += w * (p - e_h);
    s.e_tr += w * (eta_ - e_t);
    s.psi += w * (A * e_abs + B * e2 + 0.5 * cc * r2);
  }
  return s;
}

LossMoments loss_block(const V8& v, const ExperimentSpec& spec) {
  return loss_moments(spec.loss, spec.model, v[kAlpha], v[kMu], v[kW], v[kTau1] / v[kBeta]);
}

double signal_c(const ExperimentSpec& spec, Form form) {
  return form == Form::iso ? 1.0 : spec.model.signal_scale();
}

// Fresh value of coordinate i from the stationarity equations, given the
// current moment blocks.
double update_one(int i, const V8& v, const LossMoments& lm, const L1Stats& l1, const ExperimentSpec& spec,
                  Form form) {
  const double alpha = v[kAlpha], tau1 = v[kTau1], w = v[kW], mu = v[kMu], tau2 = v[kTau2], beta = v[kBeta],
               eta = v[kEta];
  const double lam = spec.ridge;
  const double delta = spec.delta;
  const double c = signal_c(spec, form);
  switch (i) {
    case kEta:
      if (form == Form::iso)
        return (beta / tau1) * (w * lm.ez + lm.zp) - 2 * lam * mu + mu * tau2 / alpha - lm.ez2 * beta * mu / tau1;
      return mu * tau2 * c * c / alpha - lm.zd;
    case kMu: return form == Form::iso ? l1.e_t : l1.e_lt;
    case kGamma: return -lm.d;
    case kBeta: return std::sqrt(lm.d2);
    case kTau1: return (form == Form::iso ? l1.e_h : l1.e_sh) / std::sqrt(delta);
    case kAlpha:
      if (form == Form::iso) return (tau1 * tau2 + beta * lm.gp) / (beta + 2 * lam * tau1);
      return tau1 * tau2 / beta + lm.gp;
    case kW: return spec.attack.eps_tr * l1.e_abs;
    case kTau2: {
      if (form == Form::iso) {
        const double r = tau2 / alpha;
        const double x = beta * beta / delta + eta * eta + r * r * l1.e_r2 -
                         2 * beta / std::sqrt(delta) * r * l1.e_hr - 2 * eta * r * l1.e_tr;
        return std::sqrt(std::max(0.0, alpha * alpha / (alpha * alpha + mu * mu) * x));
      }
      return tau2 * std::sqrt(l1.le2 / (alpha * alpha + mu * mu * c * c));
    }
  }
  return v[i];
}

V8 residual(const V8& v, const ExperimentSpec& spec, Form form) {
  detail::check_finite(v, "q=inf residual");
  const LossMoments lm = loss_block(v, spec);
  const L1Stats l1 = l1_block(v, spec, form);
  V8 r;
  for (int i = 0; i < 8; ++i) r[i] = update_one(i, v, lm, l1, spec, form) - v[i];
  return r;
}

void sweep(V8& v, const ExperimentSpec& spec, Form form, double omega) {
  auto relax = [&](int i, const LossMoments& lm, const L1Stats& l1) {
    const double fresh = update_one(i, v, lm, l1, spec, form);
    v[i] = detail::project(kDomains[i], (1 - omega) * v[i] + omega * fresh);
  };
  LossMoments lm = loss_block(v, spec);
  L1Stats l1 = l1_block(v, spec, form);
  relax(kEta, lm, l1);
  l1 = l1_block(v, spec, form);
  relax(kMu, lm, l1);
  lm = loss_block(v, spec);
  relax(kGamma, lm, l1);
  relax(kBeta, lm, l1);
  l1 = l1_block(v, spec, form);
  relax(kTau1, lm, l1);
  lm = loss_block(v, spec);
  relax(kAlpha, lm, l1);
  l1 = l1_block(v, spec, form);
  relax(kW, lm, l1);
  relax(kTau2, lm, l1);
  for (double x : v) {
    if (std::abs(x) >= detail::kUpper) throw DomainEscape("q=inf solver: iterate diverged");
  }
}

double objective(const SaddlePoint& point, const ExperimentSpec& spec, Form form) {
  const V8 v = point.vars();
  if (!(v[kAlpha] > 0) || !(v[kTau1] > 0) || !(v[kTau2] > 0) || !(v[kBeta] > 0))
    throw DomainEscape("objective evaluated outside the positive orthant");
  const double alpha = v[kAlpha], tau1 = v[kTau1], w = v[kW], mu = v[kMu], tau2 = v[kTau2], beta = v[kBeta],
               gamma = v[kGamma], eta = v[kEta];
  const double c2 = std::pow(signal_c(spec, form), 2);
  double f = -gamma * w - mu * mu * tau2 * c2 / (2 * alpha) - alpha * beta * beta / (2 * spec.delta * tau2) -
             alpha * tau2 / 2 + beta * tau1 / 2 + eta * mu - eta * eta * alpha / (2 * tau2 * c2);
  if (form == Form::iso) f += spec.ridge * (alpha * alpha + mu * mu);
  f += loss_block(v, spec).env;
  f += l1_block(v, spec, form).psi;
  return f;
}

SaddlePoint initial_point(const ExperimentSpec& spec, const SolverOptions& opts) {
  if (opts.warm_start) return *opts.warm_start;
  SaddlePoint p;
  p.w = spec.attack.eps_tr;
  return p;
}

SaddlePoint solve(const ExperimentSpec& spec, const SolverOptions& opts, Form form, const char* who);

std::optional<V8> isotropic_seed(const ExperimentSpec& spec, const SolverOptions& opts) {
  ExperimentSpec iso = spec;
  iso.pi_dist = SpectralJointDistribution::isotropic();
  iso.model.zeta = iso.model.zeta_tilde = 1.0;
  SolverOptions o = opts;
  o.restarts = 0;
  try {
    const SaddlePoint p = solve(iso, o, Form::iso, "solve_linf_diag");
    V8 v = p.vars();
    v[kTau2] = detail::project(kDomains[kTau2], p.tau2 - 2 * spec.ridge * p.alpha);
    return v;
  } catch (const std::runtime_error&) {
    return std::nullopt;
  }
}

detail::FixedPointOutcome<8> solve_from(const V8& start, const ExperimentSpec& spec, const SolverOptions& opts,
                                        Form form, const char* who) {
  SolverOptions stage_opts = opts;
  stage_opts.max_iter = std::min(opts.max_iter, 400);
  return detail::staged_solve(start, spec.ridge, spec.attack.eps_tr, [&](double ridge, double eps, const V8& s) {
    ExperimentSpec stage = spec;
    stage.ridge = ridge;
    stage.attack.eps_tr = eps;
    return detail::run_fixed_point(
        s, [&](V8& v) { sweep(v, stage, form, opts.damping); },
        [&](const V8& v) { return residual(v, stage, form); }, kDomains, stage_opts, who);
  });
}

SaddlePoint solve(const ExperimentSpec& spec, const SolverOptions& opts, Form form, const char* who) {
  spec.validate();
  V8 start = initial_point(spec, opts).vars();
  for (int i = 0; i < 8; ++i) start[i] = detail::project(kDomains[i], start[i]);
  detail::FixedPointOutcome<8> out;
  int spent = 0;
  if (form == Form::diag && !opts.warm_start) {
    // the sweeps of the diagonal form are poor at large ridge from a cold
    // start; the isotropic solution (which differs in tau2 by 2 lambda alpha
    // when L = 1) is a much better seed
    if (const auto seed = isotropic_seed(spec, opts)) {
      out = solve_from(*seed, spec, opts, form, who);
      spent = out.iterations;
    }
  }
  if (!out.converged) {
    out = solve_from(start, spec, opts, form, who);
    out.iterations += spent;
  }
  if (!out.converged || out.iterations > opts.max_iter) {
    throw NonConvergence(fmt::format("{}: no convergence ({} iterations of {}, residual {:.3g})", who,
                                     out.iterations, opts.max_iter, out.residual));
  }

  SaddlePoint sp;
  sp.set_vars(out.v);
  sp.residual = out.residual;
  sp.step = out.step;
  sp.iterations = out.iterations;
  sp.converged = true;
  sp.u = l1_block(out.v, spec, form).e_abs;

  const auto verdict = detail::restart_probe(out.v, kDomains, opts,
                                             [&](const V8& s) { return solve_from(s, spec, opts, form, who); });
  sp.restarts_agree = verdict.agree;
  sp.restarts_failed = verdict.failed;
  return sp;
}

void require_diagonal_atoms(const ExperimentSpec& spec) {
  for (const auto& c : spec.pi_dist.components()) {
    if (!c.t_normal && std::abs(c.t - c.v) > 1e-12 * std::max(1.0, std::abs(c.t)))
      throw std::invalid_argument("q=inf needs a diagonal covariance: atoms must have v == t");
  }
}

}  // namespace

double objective_linf_iso(const SaddlePoint& point, const ExperimentSpec& spec) {
  return objective(point, spec, Form::iso);
}

double objective_linf_diag(const SaddlePoint& point, const ExperimentSpec& spec) {
  return objective(point, spec, Form::diag);
}

std::array<double, 8> residual_linf_iso(const SaddlePoint& point, const ExperimentSpec& spec) {
  return residual(point.vars(), spec, Form::iso);
}

std::array<double, 8> residual_linf_diag(const SaddlePoint& point, const ExperimentSpec& spec) {
  return residual(point.vars(), spec, Form::diag);
}

SaddlePoint solve_linf_fixed_point(const ExperimentSpec& spec, const SolverOptions& opts) {
  if (spec.attack.q != AttackNorm::linf) throw std::invalid_argument("solve_linf_fixed_point: q must be inf");
  if (!spec.pi_dist.is_isotropic()) throw std::invalid_argument("solve_linf_fixed_point: covariance must be isotropic");
  if (spec.model.zeta != 1.0 || spec.model.zeta_tilde != 1.0)
    throw std::invalid_argument("solve_linf_fixed_point: isotropic problem needs zeta = zeta_tilde = 1");
  return solve(spec, opts, Form::iso, "solve_linf_fixed_point");
}

SaddlePoint solve_linf_diag(const ExperimentSpec& spec, const SolverOptions& opts) {
  if (spec.attack.q != AttackNorm::linf) throw std::invalid_argument("solve_linf_diag: q must be inf");
  require_diagonal_atoms(spec);
  return solve(spec, opts, Form::diag, "solve_linf_diag");
}

}  // namespace advasym
