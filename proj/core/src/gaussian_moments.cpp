#include "advasym/gaussian_moments.hpp"

#include <cmath>
#include <numbers>
#include <span>

namespace advasym {

namespace {

// phi(t) / Phi(t), with the asymptotic series far in the left tail
double inverse_mills(double t) {
  if (t > -30) return normal_pdf(t) / normal_cdf(t);
  const double x = -t, x2 = x * x;
  return x / (1 - 1 / x2 + 3 / (x2 * x2) - 15 / (x2 * x2 * x2));
}

// GLM with the sign link: Z = zeta |S|, so x + w = mu zeta |S| + alpha G is
// skew-normal. Integrating over y = x + w with the conditional means of |S|
// and G given y (a normal truncated to S > 0) collapses the 2-D integral.
LossMoments glm_sign_moments(LossKind loss, const ModelSpec& model, double alpha, double mu, double w,
                             double kappa) {
  const double zeta = model.zeta;
  const double lam = mu * zeta;
  const double om = std::hypot(lam, alpha);
  const double kap = lam / alpha;
  double kinks[2];
  const int nk = prox_kinks(loss, kappa, kinks);
  // the truncation factor Phi(kap z) turns over on a scale 1/|kap|
  double zb[NormalPanels::kMaxBreaks];
  int nb = 0;
  for (int i = 0; i < nk; ++i) zb[nb++] = (kinks[i] + w) / om;
  zb[nb++] = 0.0;
  if (std::abs(kap) > 0.5) {
    for (double j : {0.5, 1.5, 4.0, 9.0}) {
      zb[nb++] = j / std::abs(kap);
      zb[nb++] = -j / std::abs(kap);
    }
  }
  LossMoments r;
  NormalPanels::for_each(std::span<const double>(zb, nb), [&](double z, double wz) {
    const double t = kap * z;
    const double cdf = normal_cdf(t);
    if (cdf == 0.0) return;
    const double wt = 2 * wz * cdf;
    const double mills = inverse_mills(t);
    const double es = (lam * z + alpha * mills) / om;
    const double eg = (alpha * z - lam * mills) / om;
    const ProxEval pe = prox_eval(loss, om * z - w, kappa);
    r.env += wt * pe.env;
    r.d += wt * pe.d_x;
    r.d2 += wt * pe.d_x * pe.d_x;
    r.gd += wt * eg * pe.d_x;
    r.zd += wt * zeta * es * pe.d_x;
    r.gp += wt * eg * pe.prox;
    r.zp += wt * zeta * es * pe.prox;
  });
  r.ez = zeta * std::sqrt(2 / std::numbers::pi);
  r.ez2 = zeta * zeta;
  return r;
}

}  // namespace

LossMoments loss_moments(LossKind loss, const ModelSpec& model, double alpha, double mu, double w, double kappa) {
  double kinks[2];
  const int nk = prox_kinks(loss, kappa, kinks);
  const std::span<const double> breaks(kinks, nk);
  LossMoments r;

  if (model.kind == ModelKind::gmm) {
    const double zt = model.zeta_tilde;
    const double mean = mu * zt * zt - w;
    const double sd = std::sqrt(alpha * alpha + mu * mu * zt * zt);
    double wd = 0, p = 0, wp = 0;
    NormalPanels::for_each_scaled(mean, sd, breaks, [&](double x, double wt, double z) {
      const ProxEval pe = prox_eval(loss, x, kappa);
      r.env += wt * pe.env;
      r.d += wt * pe.d_x;
      r.d2 += wt * pe.d_x * pe.d_x;
      wd += wt * z * pe.d_x;
      p += wt * pe.prox;
      wp += wt * z * pe.prox;
    });
    const double ga = sd > 0 ? alpha / sd : 0.0;
    const double sa = sd > 0 ? mu * zt / sd : 0.0;
    r.gd = ga * wd;
    r.gp = ga * wp;
    r.zd = zt * zt * r.d + zt * sa * wd;
    r.zp = zt * zt * p + zt * sa * wp;
    r.ez = zt * zt;
    r.ez2 = zt * zt + zt * zt * zt * zt;
    return r;
  }

  if (model.link.kind == LinkKind::sign && alpha > 0) return glm_sign_moments(loss, model, alpha, mu, w, kappa);
  return loss_moments_nested(loss, model, alpha, mu, w, kappa);
}

LossMoments loss_moments_nested(LossKind loss, const ModelSpec& model, double alpha, double mu, double w,
                                double kappa) {
  if (model.kind == ModelKind::gmm) return loss_moments(loss, model, alpha, mu, w, kappa);
  double kinks[2];
  const int nk = prox_kinks(loss, kappa, kinks);
  const std::span<const double> breaks(kinks, nk);
  LossMoments r;
  const double zeta = model.zeta;
  const double zero = 0.0;
  NormalPanels::for_each(std::span<const double>(&zero, 1), [&](double s, double ws) {
    const double pp = model.link.prob_plus(zeta * s);
    for (int sgn : {1, -1}) {
      const double prob = sgn > 0 ? pp : 1.0 - pp;
      if (prob == 0.0) continue;
      const double zv = zeta * s * sgn;
      const double outer = ws * prob;
      NormalPanels::for_each_scaled(mu * zv - w, alpha, breaks, [&](double x, double wt, double g) {
        const ProxEval pe = prox_eval(loss, x, kappa);
        const double c = outer * wt;
        r.env += c * pe.env;
        r.d += c * pe.d_x;
        r.d2 += c * pe.d_x * pe.d_x;
        r.gd += c * g * pe.d_x;
        r.zd += c * zv * pe.d_x;
        r.gp += c * g * pe.prox;
        r.zp += c * zv * pe.prox;
        r.ez += c * zv;
        r.ez2 += c * zv * zv;
      });
    }
  });
  return r;
}

SoftMoments soft_moments(double m, double s, double t) {
  SoftMoments r;
  if (!(s > 0)) {
    const double v = soft_threshold(m, t);
    r.e = v;
    r.e_abs = std::abs(v);
    r.e2 = v * v;
    r.p_out = std::abs(m) > t ? 1.0 : 0.0;
    return r;
  }
  const double u1 = (t - m) / s;
  const double u2 = (-t - m) / s;
  const double pp = normal_sf(u1);
  const double pm = normal_cdf(u2);
  const double f1 = normal_pdf(u1);
  const double f2 = normal_pdf(u2);
  const double a = m - t;
  const double b = m + t;
  const double e1p = a * pp + s * f1;
  const double e1m = b * pm - s * f2;
  const double e2p = (a * a + s * s) * pp + s * a * f1;
  const double e2m = (b * b + s * s) * pm - s * b * f2;
  r.e = e1p + e1m;
  r.e_abs = e1p - e1m;
  r.e2 = e2p + e2m;
  r.p_out = pp + pm;
  return r;
}

}  // namespace advasym
