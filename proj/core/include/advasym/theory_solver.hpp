#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>

#include "advasym/distributions.hpp"
#include "advasym/losses_prox.hpp"

namespace advasym {

enum class AttackNorm { l2, linf };

AttackNorm parse_attack_norm(std::string_view q);
std::string_view attack_norm_name(AttackNorm q);  // "2" or "inf"

struct AttackGeometry {
  AttackNorm q = AttackNorm::linf;
  double eps_tr = 0.0;  // O(1) constant; the q=inf penalty scales it by 1/sqrt(n)
  double eps_ts = 0.0;

  // dual exponent of q
  double p() const { return q == AttackNorm::linf ? 1.0 : 2.0; }
};

struct ExperimentSpec {
  ModelSpec model{};
  AttackGeometry attack{};
  LossKind loss = LossKind::hinge;
  double delta = 1.0;
  double ridge = 1e-4;
  SpectralJointDistribution pi_dist = SpectralJointDistribution::isotropic();

  void validate() const;
  // copies zeta / zeta_tilde implied by pi_dist into the model
  ExperimentSpec with_derived_zeta() const;
};

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct SaddlePoint {
  double alpha = 1.0;
  double tau1 = 1.0;
  double w = 0.0;
  double mu = 0.5;
  double tau2 = 1.0;
  double beta = 1.0;
  double gamma = 0.5;
  double eta = 0.5;
  double tau3 = kNaN;  // only the l2 general problem

  // diagnostics
  double u = kNaN;  // limit of the dual-norm statistic ||theta||_p
  double residual = kNaN;
  double step = kNaN;
  int iterations = 0;
  bool converged = false;
  bool restarts_agree = true;
  int restarts_failed = 0;  // jittered restarts that did not converge

  std::array<double, 8> vars() const { return {alpha, tau1, w, mu, tau2, beta, gamma, eta}; }
  void set_vars(const std::array<double, 8>& v);
};

struct SolverOptions {
  double tol = 1e-8;
  double step_tol = 1e-9;
  int max_iter = 5000;  // total over every homotopy stage
  double damping = 0.7;  // weight of the fresh update in each relaxation step
  int restarts = 5;
  double restart_tol = 1e-6;  // relative, sup over the variables
  std::uint64_t restart_seed = 12345;
  bool newton_polish = true;
  std::optional<SaddlePoint> warm_start;
};

class NonConvergence : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DomainEscape : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// --- q = inf -----------------------------------------------------------------

double objective_linf_iso(const SaddlePoint& point, const ExperimentSpec& spec);
double objective_linf_diag(const SaddlePoint& point, const ExperimentSpec& spec);

// update(v) - v for the eight published equations (isotropic) and for the
// stationarity system of the diagonal problem; order (alpha,tau1,w,mu,tau2,beta,gamma,eta)
std::array<double, 8> residual_linf_iso(const SaddlePoint& point, const ExperimentSpec& spec);
std::array<double, 8> residual_linf_diag(const SaddlePoint& point, const ExperimentSpec& spec);

SaddlePoint solve_linf_fixed_point(const ExperimentSpec& spec, const SolverOptions& opts = {});
SaddlePoint solve_linf_diag(const ExperimentSpec& spec, const SolverOptions& opts = {});

// --- q = 2 -------------------------------------------------------------------

struct L2IsoSolution {
  double alpha = kNaN;
  double mu = kNaN;
  double kappa = kNaN;  // tau / beta
  double residual = kNaN;
  int iterations = 0;
  bool converged = false;
  bool restarts_agree = true;
  int restarts_failed = 0;

  double beta(double delta) const;
  double tau(double delta) const;
  SaddlePoint to_saddle_point(const ExperimentSpec& spec) const;
};

double objective_l2_iso(double alpha, double mu, double tau, double beta, const ExperimentSpec& spec);
std::array<double, 3> residual_l2_iso(double alpha, double mu, double kappa, const ExperimentSpec& spec);
L2IsoSolution solve_l2_iso(const ExperimentSpec& spec, const SolverOptions& opts = {});

double objective_l2_general(const SaddlePoint& point, const ExperimentSpec& spec);
// order (alpha,tau1,w,mu,tau2,beta,gamma,eta,tau3)
std::array<double, 9> residual_l2_general(const SaddlePoint& point, const ExperimentSpec& spec);
SaddlePoint solve_l2_general(const ExperimentSpec& spec, const SolverOptions& opts = {});

// E[(num + V^2 Lt) / (den + L)] with Lt = 1/L (GMM) or L (GLM)
double l2_rational_term(const SpectralJointDistribution& dist, ModelKind kind, double num, double den);

// Dispatches on q and on the covariance; the result always carries alpha, mu, w, u.
SaddlePoint solve_theory(const ExperimentSpec& spec, const SolverOptions& opts = {});

// Refuses ridge-free specs whose pilot data are (l_q, eps)-separable.
void check_ridge_free(const ExperimentSpec& spec, int pilot_n = 100, std::uint64_t seed = 7);

}  // namespace advasym
