#pragma once

#include <cstdint>
#include <optional>
#include <utility>

#include "advasym/distributions.hpp"
#include "advasym/theory_solver.hpp"

namespace advasym {

// (u, mu, alpha): dual-norm size, aligned and orthogonal components of an estimator.
struct KeyStats {
  double u = 0;
  double mu = 0;
  double alpha = 0;

  double sigma() const { return mu > 0 ? alpha / mu : kNaN; }
};

enum class ErrorSource { theory, empirical };

struct ErrorReport {
  double adv_error = kNaN;
  double std_error = kNaN;
  ErrorSource source = ErrorSource::theory;
  double adv_stderr = 0;  // empirical only
  double std_stderr = 0;
  std::uint64_t spec_hash = 0;
  std::uint64_t seed = 0;
  int trials = 0;
};

// P(margin - u eps' < 0) for an estimator with the given key statistics.
// eps' carries the training normalization (the O(1) constant for q = inf).
double adv_error_from_stats(const ModelSpec& model, const KeyStats& stats, double eps_prime);
double std_error_from_stats(const ModelSpec& model, const KeyStats& stats);

// Key statistics implied by a saddle point. u is w / eps_tr when eps_tr > 0;
// at eps_tr = 0 the saddle point's own u is used, or u_fallback if given
// (e.g. measured from simulations).
KeyStats theory_key_stats(const SaddlePoint& point, const ExperimentSpec& spec,
                          std::optional<double> u_fallback = std::nullopt);

double adv_error_theory(const SaddlePoint& point, const ExperimentSpec& spec, double eps_ts,
                        std::optional<double> u_fallback = std::nullopt);
double std_error_theory(const SaddlePoint& point, const ExperimentSpec& spec);

// Bayes-optimal robust error of the isotropic GMM with ||theta*|| = theta_star_norm.
// For q = inf the signal entries are taken standard normal (sqrt(n) theta*_i ~ T).
double bayes_adv_error_gmm(double theta_star_norm, double eps_ts, AttackNorm q);
// Same with a non-Gaussian law of T (atoms are used through E (|T| - eps)_+^2).
double bayes_adv_error_gmm(const SpectralJointDistribution& dist, double eps_ts, AttackNorm q);

// (alpha, mu) of the exponential-loss GMM estimator as delta -> inf, ridge -> 0.
std::pair<double, double> large_sample_limit(double eps_tr);

}  // namespace advasym
