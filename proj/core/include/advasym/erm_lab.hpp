#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

#include "advasym/error_formulas.hpp"
#include "advasym/theory_solver.hpp"

namespace advasym {

enum class NoiseFamily { gaussian, rademacher };

NoiseFamily parse_noise(std::string_view name);
std::string_view noise_name(NoiseFamily noise);

struct Dataset {
  Eigen::MatrixXd features;    // m x n
  Eigen::VectorXd labels;      // +-1
  Eigen::VectorXd theta_star;  // unit norm
  Eigen::VectorXd sigma_diag;  // diagonal covariance
  ModelSpec model;             // zeta / zeta_tilde of this instance
  NoiseFamily noise = NoiseFamily::gaussian;
  std::uint64_t seed = 0;

  int n() const { return static_cast<int>(features.cols()); }
  int m() const { return static_cast<int>(features.rows()); }
};

// Training set with m = round(delta n).
Dataset generate(const ExperimentSpec& spec, int n, std::uint64_t seed, NoiseFamily noise = NoiseFamily::gaussian);
// Fresh samples from the same (theta*, Sigma) as `like`.
Dataset generate_like(const Dataset& like, int m, std::uint64_t seed);

// eps as configured; for q = inf the 1/sqrt(n) factor is applied here
double effective_eps(AttackNorm q, double eps, int n);
double dual_norm(AttackNorm q, const Eigen::VectorXd& theta);

// (1/m) sum L(y <x, theta> - eps_eff ||theta||_p) + ridge ||theta||^2
double robust_objective(const Eigen::VectorXd& theta, const Dataset& data, const AttackGeometry& attack, LossKind loss,
                        double ridge);

struct InnerMax {
  Eigen::VectorXd delta;  // worst-case perturbation
  double margin = 0;      // attacked margin y <x + delta, theta>
  double value = 0;       // loss at the attacked margin
  double search_best = 0;  // largest loss among the random feasible draws
};

// Closed-form worst case of L(y <x + delta, theta>) over the eps-ball, checked
// against `draws` random feasible perturbations.
InnerMax inner_max_oracle(const Eigen::VectorXd& theta, const Eigen::VectorXd& x, double y, const AttackGeometry& attack,
                          LossKind loss, std::uint64_t seed = 1, int draws = 10000);

class Diverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class TrainMethod { smoothed_newton, subgradient };

struct TrainerOptions {
  TrainMethod method = TrainMethod::smoothed_newton;
  // smoothed Newton: softplus hinge and smoothed dual norm, both of width s,
  // s shrinking geometrically from s_start to s_end
  double s_start = 1e-1;
  double s_end = 1e-7;
  double s_factor = 0.3;
  int newton_iters = 60;
  // subgradient: step c / sqrt(t), best iterate kept
  double step_c = 0.5;
  int max_epochs = 20000;
  double tol = 1e-9;  // gradient norm at the final smoothing level
};

struct TrainResult {
  Eigen::VectorXd theta;
  double objective = 0;
  double initial_objective = 0;
  double grad_norm = 0;
  int iterations = 0;
  bool converged = false;
};

TrainResult train(const Dataset& data, const ExperimentSpec& spec, const TrainerOptions& opts = {},
                  const Eigen::VectorXd* warm = nullptr);

// u = ||theta||_p (scaled by 1/sqrt(n) for q = inf), mu and alpha from the
// projection of Sigma^{1/2} theta on the signal direction.
KeyStats key_stats(const Eigen::VectorXd& theta, const Dataset& data, AttackNorm q);

// Monte Carlo adversarial and standard error on n_test fresh samples.
ErrorReport empirical_adv_error(const Eigen::VectorXd& theta, const Dataset& train_data, AttackNorm q, double eps_ts,
                                int n_test, std::uint64_t seed);
// Same on a given test set.
ErrorReport empirical_adv_error(const Eigen::VectorXd& theta, const Dataset& test_data, AttackNorm q, double eps_ts);

// Heuristic: trains robust hinge ERM with a shrinking ridge and reports whether
// some estimator attains positive robust margin on every sample.
bool separability_probe(const Dataset& data, const AttackGeometry& attack);

// rows: features..., label
void write_dataset_csv(const Dataset& data, const std::string& path);

}  // namespace advasym
