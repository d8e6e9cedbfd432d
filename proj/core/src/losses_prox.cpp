#include "advasym/losses_prox.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace advasym {

LossKind parse_loss(std::string_view name) {
  if (name == "hinge") return LossKind::hinge;
  if (name == "logistic") return LossKind::logistic;
  if (name == "exponential" || name == "exp") return LossKind::exponential;
  throw std::invalid_argument("unknown loss: " + std::string(name));
}

std::string_view loss_name(LossKind kind) {
  switch (kind) {
    case LossKind::hinge: return "hinge";
    case LossKind::logistic: return "logistic";
    case LossKind::exponential: return "exponential";
  }
  return "?";
}

namespace {

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// h(v) = v + kappa L'(v) - x, strictly increasing for the smooth losses
double stationarity(LossKind kind, double v, double x, double kappa) {
  return v + kappa * loss_deriv(kind, v) - x;
}

double stationarity_slope(LossKind kind, double v, double kappa) {
  if (kind == LossKind::logistic) {
    const double s = sigmoid(v);
    return 1.0 + kappa * s * (1.0 - s);
  }
  return 1.0 + kappa * std::exp(-v);
}

double smooth_prox(LossKind kind, double x, double kappa) {
  // L' < 0 so the root lies to the right of x
  double lo = x;
  double step = kappa > 0 ? std::min(kappa, 1.0) : 1.0;
  double hi = x + step;
  while (stationarity(kind, hi, x, kappa) < 0) {
    lo = hi;
    step *= 2;
    hi = x + step;
  }
  const double tol = std::max(1e-13, 4 * std::numeric_limits<double>::epsilon() * (std::abs(x) + std::abs(hi)));
  double v = 0.5 * (lo + hi);
  if (kind == LossKind::logistic) v = std::min(std::max(x + kappa * sigmoid(-x), lo), hi);
  for (int it = 0; it < 200; ++it) {
    const double h = stationarity(kind, v, x, kappa);
    if (std::abs(h) <= tol) return v;
    if (h > 0) hi = v; else lo = v;
    double next = v - h / stationarity_slope(kind, v, kappa);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (hi - lo <= tol) return next;
    v = next;
  }
  return v;
}

}  // namespace

double loss_eval(LossKind kind, double t) {
  switch (kind) {
    case LossKind::hinge: return std::max(1.0 - t, 0.0);
    case LossKind::logistic:
      return t > 0 ? std::log1p(std::exp(-t)) : -t + std::log1p(std::exp(t));
    case LossKind::exponential: return std::exp(-t);
  }
  return 0.0;
}

double loss_deriv(LossKind kind, double t) {
  switch (kind) {
    case LossKind::hinge: return t < 1.0 ? -1.0 : 0.0;
    case LossKind::logistic: return -sigmoid(-t);
    case LossKind::exponential: return -std::exp(-t);
  }
  return 0.0;
}

double prox(LossKind kind, EnvelopeQuery q) {
  if (!(q.kappa > 0)) throw std::invalid_argument("prox: kappa must be positive");
  if (kind == LossKind::hinge) {
    if (q.x > 1.0) return q.x;
    if (q.x >= 1.0 - q.kappa) return 1.0;
    return q.x + q.kappa;
  }
  return smooth_prox(kind, q.x, q.kappa);
}

ProxEval prox_eval(LossKind kind, double x, double kappa) {
  const double v = prox(kind, {x, kappa});
  const double r = x - v;
  return {v, r * r / (2 * kappa) + loss_eval(kind, v), r / kappa};
}

double moreau_env(LossKind kind, EnvelopeQuery q) { return prox_eval(kind, q.x, q.kappa).env; }

EnvelopeGrad moreau_env_grad(LossKind kind, EnvelopeQuery q) {
  const double r = q.x - prox(kind, q);
  return {r / q.kappa, -r * r / (2 * q.kappa * q.kappa)};
}

int prox_kinks(LossKind kind, double kappa, double out[2]) {
  if (kind != LossKind::hinge) return 0;
  out[0] = 1.0 - kappa;
  out[1] = 1.0;
  return 2;
}

double soft_threshold(double x, double kappa) {
  if (x > kappa) return x - kappa;
  if (x < -kappa) return x + kappa;
  return 0.0;
}

double prox_l1_l2sq(double x, double kappa, CompositePenalty penalty) {
  if (!(kappa > 0)) throw std::invalid_argument("prox_l1_l2sq: kappa must be positive");
  if (penalty.c < 0) throw std::invalid_argument("prox_l1_l2sq: negative quadratic coefficient");
  return soft_threshold(x, kappa) / (1.0 + 2.0 * penalty.c * kappa);
}

double env_l1_l2sq(double x, double kappa, CompositePenalty penalty) {
  const double v = prox_l1_l2sq(x, kappa, penalty);
  return (x - v) * (x - v) / (2 * kappa) + std::abs(v) + penalty.c * v * v;
}

EnvelopeGrad env_l1_l2sq_grad(double x, double kappa, CompositePenalty penalty) {
  const double r = x - prox_l1_l2sq(x, kappa, penalty);
  return {r / kappa, -r * r / (2 * kappa * kappa)};
}

}  // namespace advasym
