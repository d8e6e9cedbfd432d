#include "advasym/error_formulas.hpp"

#include <cmath>
#include <stdexcept>

namespace advasym {

double adv_error_from_stats(const ModelSpec& model, const KeyStats& s, double eps_prime) {
  if (s.alpha == 0.0 && s.mu == 0.0) throw std::invalid_argument("key statistics define no direction");
  if (s.alpha < 0 || s.u < 0) throw std::invalid_argument("key statistics u and alpha must be non-negative");
  if (eps_prime < 0) throw std::invalid_argument("eps' must be non-negative");
  const double c = eps_prime > 0 ? s.u * eps_prime : 0.0;

  if (model.kind == ModelKind::gmm) {
    const double zt = model.zeta_tilde;
    return normal_sf((s.mu * zt * zt - c) / std::hypot(s.mu * zt, s.alpha));
  }

  // condition on S; the Gaussian part is a closed-form tail
  const double mz = s.mu * model.zeta;
  double breaks[3] = {0.0, 0.0, 0.0};
  int nb = 1;
  if (mz != 0.0) {
    breaks[nb++] = c / mz;
    breaks[nb++] = -c / mz;
  }
  double p = 0;
  NormalPanels::for_each(std::span<const double>(breaks, nb), [&](double sv, double ws) {
    const double pp = model.link.prob_plus(model.zeta * sv);
    for (int sgn : {1, -1}) {
      const double prob = sgn > 0 ? pp : 1.0 - pp;
      if (prob == 0.0) continue;
      const double gap = c - mz * sv * sgn;  // error iff alpha G < gap
      const double e = s.alpha > 0 ? normal_cdf(gap / s.alpha) : (gap > 0 ? 1.0 : 0.0);
      p += ws * prob * e;
    }
  });
  return std::clamp(p, 0.0, 1.0);
}

double std_error_from_stats(const ModelSpec& model, const KeyStats& stats) {
  return adv_error_from_stats(model, stats, 0.0);
}

KeyStats theory_key_stats(const SaddlePoint& point, const ExperimentSpec& spec, std::optional<double> u_fallback) {
  KeyStats k;
  k.mu = point.mu;
  k.alpha = point.alpha;
  if (spec.attack.eps_tr > 0) k.u = point.w / spec.attack.eps_tr;
  else if (std::isfinite(point.u)) k.u = point.u;
  else if (u_fallback) k.u = *u_fallback;
  else k.u = kNaN;
  return k;
}

double adv_error_theory(const SaddlePoint& point, const ExperimentSpec& spec, double eps_ts,
                        std::optional<double> u_fallback) {
  KeyStats k = theory_key_stats(point, spec, u_fallback);
  if (eps_ts > 0 && !std::isfinite(k.u))
    throw std::invalid_argument("adversarial error at eps_tr = 0 needs the dual-norm statistic u");
  if (eps_ts == 0) k.u = 0;
  return adv_error_from_stats(spec.model, k, eps_ts);
}

double std_error_theory(const SaddlePoint& point, const ExperimentSpec& spec) {
  return adv_error_theory(point, spec, 0.0);
}

namespace {

// E (|T| - e)_+^2 for T ~ N(0,1)
double gaussian_shrunk_sq(double e) { return 2 * ((1 + e * e) * normal_sf(e) - e * normal_pdf(e)); }

}  // namespace

double bayes_adv_error_gmm(double theta_star_norm, double eps_ts, AttackNorm q) {
  if (theta_star_norm < 0 || eps_ts < 0) throw std::invalid_argument("bayes error needs non-negative inputs");
  if (q == AttackNorm::l2) return normal_sf(std::max(theta_star_norm - eps_ts, 0.0));
  if (theta_star_norm == 0) return 0.5;
  const double s = theta_star_norm;
  return normal_sf(s * std::sqrt(gaussian_shrunk_sq(eps_ts / s)));
}

double bayes_adv_error_gmm(const SpectralJointDistribution& dist, double eps_ts, AttackNorm q) {
  if (q == AttackNorm::l2) return bayes_adv_error_gmm(1.0, eps_ts, q);
  double d2 = 0;
  for (const auto& c : dist.components()) {
    if (c.t_normal) d2 += c.weight * gaussian_shrunk_sq(eps_ts);
    else d2 += c.weight * std::pow(std::max(std::abs(c.t) - eps_ts, 0.0), 2);
  }
  return normal_sf(std::sqrt(d2));
}

std::pair<double, double> large_sample_limit(double eps_tr) {
  if (!(eps_tr >= 0) || eps_tr >= 1) throw std::invalid_argument("large-sample limit needs 0 <= eps_tr < 1");
  return {0.0, 1.0 - eps_tr};
}

}  // namespace advasym
