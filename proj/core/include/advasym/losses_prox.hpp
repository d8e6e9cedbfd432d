#pragma once

#include <string_view>

namespace advasym {

enum class LossKind { hinge, logistic, exponential };

LossKind parse_loss(std::string_view name);
std::string_view loss_name(LossKind kind);

struct EnvelopeQuery {
  double x;
  double kappa;
};

struct EnvelopeGrad {
  double d_x;
  double d_kappa;
};

// prox, envelope and d/dx of the envelope from one prox solve
struct ProxEval {
  double prox;
  double env;
  double d_x;
};

double loss_eval(LossKind kind, double t);
// derivative for the smooth losses, right derivative for the hinge
double loss_deriv(LossKind kind, double t);

double prox(LossKind kind, EnvelopeQuery q);
double moreau_env(LossKind kind, EnvelopeQuery q);
EnvelopeGrad moreau_env_grad(LossKind kind, EnvelopeQuery q);
ProxEval prox_eval(LossKind kind, double x, double kappa);

// Points where x -> prox(x; kappa) is not differentiable. Returns the count.
int prox_kinks(LossKind kind, double kappa, double out[2]);

struct CompositePenalty {
  double c = 0.0;
};

double soft_threshold(double x, double kappa);

// argmin_v (x-v)^2/(2 kappa) + |v| + c v^2
double prox_l1_l2sq(double x, double kappa, CompositePenalty penalty);
double env_l1_l2sq(double x, double kappa, CompositePenalty penalty);
EnvelopeGrad env_l1_l2sq_grad(double x, double kappa, CompositePenalty penalty);

}  // namespace advasym
