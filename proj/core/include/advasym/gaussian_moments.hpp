#pragma once

#include "advasym/distributions.hpp"
#include "advasym/losses_prox.hpp"

namespace advasym {

// Expectations over x = alpha G + mu Z - w of the loss prox P = prox_L(x; kappa)
// and the envelope slope D = (x - P) / kappa, with Z the model's margin
// variable (GMM: zt S + zt^2, GLM: zeta S psi(zeta S)).
struct LossMoments {
  double env = 0;  // E M_L(x; kappa)
  double d = 0;    // E D
  double d2 = 0;   // E D^2
  double gd = 0;   // E G D
  double zd = 0;   // E Z D
  double gp = 0;   // E G P
  double zp = 0;   // E Z P
  double ez = 0;   // E Z
  double ez2 = 0;  // E Z^2
};

LossMoments loss_moments(LossKind loss, const ModelSpec& model, double alpha, double mu, double w, double kappa);
// Plain nested quadrature over (S, G) for the GLM; loss_moments takes a
// one-dimensional route for the sign link.
LossMoments loss_moments_nested(LossKind loss, const ModelSpec& model, double alpha, double mu, double w,
                                double kappa);

// Moments of soft(X, t) for X ~ N(m, s^2), in closed form.
struct SoftMoments {
  double e = 0;      // E soft
  double e_abs = 0;  // E |soft|
  double e2 = 0;     // E soft^2
  double p_out = 0;  // P(|X| > t)
};

SoftMoments soft_moments(double m, double s, double t);

}  // namespace advasym
