#include <cmath>

#include "advasym/erm_lab.hpp"
#include "advasym/theory_solver.hpp"

namespace advasym {

AttackNorm parse_attack_norm(std::string_view q) {
  if (q == "2" || q == "l2") return AttackNorm::l2;
  if (q == "inf" || q == "linf" || q == "infinity") return AttackNorm::linf;
  throw std::invalid_argument("unknown attack norm: " + std::string(q));
}

std::string_view attack_norm_name(AttackNorm q) { return q == AttackNorm::l2 ? "2" : "inf"; }

void ExperimentSpec::validate() const {
  if (!(delta > 0) || !std::isfinite(delta)) throw std::invalid_argument("delta must be positive");
  if (!(ridge >= 0) || !std::isfinite(ridge)) throw std::invalid_argument("ridge must be non-negative");
  if (!(attack.eps_tr >= 0) || !(attack.eps_ts >= 0)) throw std::invalid_argument("attack budgets must be non-negative");
  if (!(model.prior >= 0 && model.prior <= 1)) throw std::invalid_argument("prior must lie in [0, 1]");
  if (!(model.zeta > 0) || !(model.zeta_tilde > 0)) throw std::invalid_argument("zeta and zeta_tilde must be positive");
  if (!(pi_dist.min_lambda() > 0)) throw std::invalid_argument("eigenvalues must be positive");
}

ExperimentSpec ExperimentSpec::with_derived_zeta() const {
  ExperimentSpec s = *this;
  s.model.zeta = pi_dist.zeta();
  s.model.zeta_tilde = pi_dist.zeta_tilde();
  return s;
}

void SaddlePoint::set_vars(const std::array<double, 8>& v) {
  alpha = v[0];
  tau1 = v[1];
  w = v[2];
  mu = v[3];
  tau2 = v[4];
  beta = v[5];
  gamma = v[6];
  eta = v[7];
}

SaddlePoint solve_theory(const ExperimentSpec& raw, const SolverOptions& opts) {
  const ExperimentSpec spec = raw.with_derived_zeta();
  spec.validate();
  if (spec.ridge == 0) check_ridge_free(spec);
  const bool iso = spec.pi_dist.is_isotropic();
  if (spec.attack.q == AttackNorm::linf) return iso ? solve_linf_fixed_point(spec, opts) : solve_linf_diag(spec, opts);
  if (iso) return solve_l2_iso(spec, opts).to_saddle_point(spec);
  return solve_l2_general(spec, opts);
}

void check_ridge_free(const ExperimentSpec& spec, int pilot_n, std::uint64_t seed) {
  if (spec.ridge > 0) return;
  const Dataset pilot = generate(spec, pilot_n, seed);
  if (separability_probe(pilot, spec.attack)) {
    throw std::invalid_argument("ridge = 0 on robustly separable data: the unregularized estimator is unbounded");
  }
}

}  // namespace advasym
