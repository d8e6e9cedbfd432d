#include "advasym/erm_lab.hpp"

#include <fmt/format.h>
#include <fmt/os.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

namespace advasym {

NoiseFamily parse_noise(std::string_view name) {
  if (name == "gaussian") return NoiseFamily::gaussian;
  if (name == "rademacher") return NoiseFamily::rademacher;
  throw std::invalid_argument("unknown noise family: " + std::string(name));
}

std::string_view noise_name(NoiseFamily noise) { return noise == NoiseFamily::gaussian ? "gaussian" : "rademacher"; }

namespace {

// Largest-remainder split of n coordinates over the component weights.
std::vector<int> stratified_counts(const std::vector<SpectralJointDistribution::Component>& comps, int n) {
  std::vector<int> counts(comps.size());
  std::vector<std::pair<double, std::size_t>> rem;
  int used = 0;
  for (std::size_t i = 0; i < comps.size(); ++i) {
    const double exact = comps[i].weight * n;
    counts[i] = static_cast<int>(std::floor(exact));
    used += counts[i];
    rem.emplace_back(exact - counts[i], i);
  }
  std::stable_sort(rem.begin(), rem.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  for (int k = 0; used < n; ++k, ++used) ++counts[rem[k % rem.size()].second];
  return counts;
}

void fill_samples(Dataset& d, int m, std::mt19937_64& rng, double prior) {
  const int n = static_cast<int>(d.theta_star.size());
  std::normal_distribution<double> gauss;
  std::bernoulli_distribution coin(0.5);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  auto noise = [&] {
    if (d.noise == NoiseFamily::rademacher) return coin(rng) ? 1.0 : -1.0;
    return gauss(rng);
  };
  const Eigen::VectorXd root = d.sigma_diag.cwiseSqrt();
  d.features.resize(m, n);
  d.labels.resize(m);
  for (int i = 0; i < m; ++i) {
    if (d.model.kind == ModelKind::gmm) {
      const double y = unif(rng) < prior ? 1.0 : -1.0;
      for (int j = 0; j < n; ++j) d.features(i, j) = y * d.theta_star[j] + root[j] * noise();
      d.labels[i] = y;
    } else {
      for (int j = 0; j < n; ++j) d.features(i, j) = root[j] * noise();
      const double z = d.features.row(i).dot(d.theta_star);
      double y;
      if (d.model.link.kind == LinkKind::sign) y = z >= 0 ? 1.0 : -1.0;
      else y = unif(rng) < d.model.link.prob_plus(z) ? 1.0 : -1.0;
      d.labels[i] = y;
    }
  }
}

}  // namespace

Dataset generate(const ExperimentSpec& spec, int n, std::uint64_t seed, NoiseFamily noise) {
  spec.validate();
  if (n < 2) throw std::invalid_argument("generate: n must be at least 2");
  const int m = static_cast<int>(std::lround(spec.delta * n));
  if (m < 1) throw std::invalid_argument("generate: delta * n rounds to zero samples");

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss;
  Dataset d;
  d.model = spec.model;
  d.noise = noise;
  d.seed = seed;
  d.theta_star.resize(n);
  d.sigma_diag.resize(n);
  const auto& comps = spec.pi_dist.components();
  const auto counts = stratified_counts(comps, n);
  int j = 0;
  for (std::size_t c = 0; c < comps.size(); ++c) {
    for (int k = 0; k < counts[c]; ++k, ++j) {
      d.sigma_diag[j] = comps[c].lambda;
      d.theta_star[j] = comps[c].t_normal ? gauss(rng) : comps[c].t;
    }
  }
  const double norm = d.theta_star.norm();
  if (!(norm > 0)) throw std::invalid_argument("generate: signal vector is zero");
  d.theta_star /= norm;
  d.model.zeta = (d.sigma_diag.cwiseSqrt().cwiseProduct(d.theta_star)).norm();
  d.model.zeta_tilde = (d.theta_star.cwiseQuotient(d.sigma_diag.cwiseSqrt())).norm();
  fill_samples(d, m, rng, spec.model.prior);
  return d;
}

Dataset generate_like(const Dataset& like, int m, std::uint64_t seed) {
  if (m < 1) throw std::invalid_argument("generate_like: m must be positive");
  std::mt19937_64 rng(seed);
  Dataset d;
  d.theta_star = like.theta_star;
  d.sigma_diag = like.sigma_diag;
  d.model = like.model;
  d.noise = like.noise;
  d.seed = seed;
  fill_samples(d, m, rng, like.model.prior);
  return d;
}

double effective_eps(AttackNorm q, double eps, int n) {
  return q == AttackNorm::linf ? eps / std::sqrt(static_cast<double>(n)) : eps;
}

double dual_norm(AttackNorm q, const Eigen::VectorXd& theta) {
  return q == AttackNorm::linf ? theta.lpNorm<1>() : theta.norm();
}

double robust_objective(const Eigen::VectorXd& theta, const Dataset& data, const AttackGeometry& attack, LossKind loss,
                        double ridge) {
  const double pen = effective_eps(attack.q, attack.eps_tr, data.n()) * dual_norm(attack.q, theta);
  const Eigen::VectorXd z = data.labels.cwiseProduct(data.features * theta);
  double s = 0;
  for (Eigen::Index i = 0; i < z.size(); ++i) s += loss_eval(loss, z[i] - pen);
  return s / static_cast<double>(z.size()) + ridge * theta.squaredNorm();
}

InnerMax inner_max_oracle(const Eigen::VectorXd& theta, const Eigen::VectorXd& x, double y, const AttackGeometry& attack,
                          LossKind loss, std::uint64_t seed, int draws) {
  const int n = static_cast<int>(theta.size());
  if (theta.isZero(0.0)) throw std::invalid_argument("inner_max_oracle: theta must be non-zero");
  const double e = effective_eps(attack.q, attack.eps_tr, n);
  InnerMax r;
  if (attack.q == AttackNorm::linf) {
    r.delta = theta.unaryExpr([&](double t) { return t > 0 ? -e * y : (t < 0 ? e * y : 0.0); });
  } else {
    r.delta = -e * y * theta / theta.norm();
  }
  r.margin = y * (x + r.delta).dot(theta);
  r.value = loss_eval(loss, r.margin);

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  std::normal_distribution<double> gauss;
  Eigen::VectorXd d(n);
  r.search_best = -std::numeric_limits<double>::infinity();
  for (int k = 0; k < draws; ++k) {
    if (attack.q == AttackNorm::linf) {
      // alternate interior points and random vertices of the box
      for (int j = 0; j < n; ++j) d[j] = e * (k % 2 == 0 ? unif(rng) : (unif(rng) < 0 ? -1.0 : 1.0));
    } else {
      for (int j = 0; j < n; ++j) d[j] = gauss(rng);
      const double radius = k % 2 == 0 ? e : e * std::pow(0.5 * (unif(rng) + 1.0), 1.0 / n);
      d *= radius / d.norm();
    }
    r.search_best = std::max(r.search_best, loss_eval(loss, y * (x + d).dot(theta)));
  }
  return r;
}

namespace {

struct Curv {
  double v, d1, d2;
};

Curv smoothed_loss(LossKind loss, double z, double s) {
  switch (loss) {
    case LossKind::hinge: {
      // s log(1 + exp((1 - z) / s)): curvature everywhere, unlike the Moreau
      // smoothing, so Newton does not cycle on samples entering the band
      const double u = (1 - z) / s;
      const double sp = u > 0 ? u + std::log1p(std::exp(-u)) : std::log1p(std::exp(u));
      const double sg = u > 0 ? 1 / (1 + std::exp(-u)) : std::exp(u) / (1 + std::exp(u));
      return {s * sp, -sg, sg * (1 - sg) / s};
    }
    case LossKind::logistic: {
      const double v = z > 0 ? std::log1p(std::exp(-z)) : -z + std::log1p(std::exp(z));
      const double sp = z > 0 ? 1 / (1 + std::exp(-z)) : std::exp(z) / (1 + std::exp(z));  // sigmoid(z)
      return {v, -(1 - sp), sp * (1 - sp)};
    }
    case LossKind::exponential: {
      const double v = std::exp(-z);
      return {v, -v, v};
    }
  }
  return {0, 0, 0};
}

// Smoothed dual norm sum sqrt(t^2 + s^2) - s (q = inf) or sqrt(|t|^2 + s^2) - s (q = 2).
struct SmoothNorm {
  double value = 0;
  Eigen::VectorXd grad;
  Eigen::VectorXd hdiag;  // q = inf
  double r = 0;           // q = 2
};

SmoothNorm smoothed_norm(AttackNorm q, const Eigen::VectorXd& theta, double s, bool with_curvature) {
  SmoothNorm out;
  if (q == AttackNorm::linf) {
    const Eigen::ArrayXd root = (theta.array().square() + s * s).sqrt();
    out.value = (root - s).sum();
    out.grad = (theta.array() / root).matrix();
    if (with_curvature) out.hdiag = (s * s / root.cube()).matrix();
  } else {
    out.r = std::sqrt(theta.squaredNorm() + s * s);
    out.value = out.r - s;
    out.grad = theta / out.r;
  }
  return out;
}

class SmoothedProblem {
 public:
  SmoothedProblem(const Dataset& data, const ExperimentSpec& spec)
      : loss_(spec.loss),
        q_(spec.attack.q),
        e_(effective_eps(spec.attack.q, spec.attack.eps_tr, data.n())),
        ridge_(spec.ridge),
        xy_(data.labels.asDiagonal() * data.features) {}

  double value(const Eigen::VectorXd& theta, double s) const {
    const double pen = e_ > 0 ? e_ * smoothed_norm(q_, theta, s, false).value : 0.0;
    const Eigen::VectorXd z = xy_ * theta;
    double acc = 0;
    for (Eigen::Index i = 0; i < z.size(); ++i) acc += smoothed_loss(loss_, z[i] - pen, s).v;
    return acc / static_cast<double>(z.size()) + ridge_ * theta.squaredNorm();
  }

  // gradient and Hessian of value()
  double derivatives(const Eigen::VectorXd& theta, double s, Eigen::VectorXd& grad, Eigen::MatrixXd& hess) const {
    const Eigen::Index m = xy_.rows(), n = xy_.cols();
    SmoothNorm nrm;
    double pen = 0;
    if (e_ > 0) {
      nrm = smoothed_norm(q_, theta, s, true);
      pen = e_ * nrm.value;
    }
    const Eigen::VectorXd z = xy_ * theta;
    Eigen::VectorXd c(m);
    std::vector<Eigen::Index> band;
    std::vector<double> dd;
    double f = 0, csum = 0, dsum = 0;
    // samples far from the smoothed hinge's kink carry no usable curvature
    const double floor = loss_ == LossKind::hinge ? 1e-10 / s : 0.0;
    for (Eigen::Index i = 0; i < m; ++i) {
      const Curv k = smoothed_loss(loss_, z[i] - pen, s);
      f += k.v;
      c[i] = k.d1 / static_cast<double>(m);
      csum += c[i];
      if (k.d2 > floor) {
        band.push_back(i);
        dd.push_back(k.d2 / static_cast<double>(m));
        dsum += dd.back();
      }
    }
    f = f / static_cast<double>(m) + ridge_ * theta.squaredNorm();

    grad = xy_.transpose() * c + 2 * ridge_ * theta;
    if (e_ > 0) grad -= e_ * csum * nrm.grad;

    hess.setZero(n, n);
    Eigen::VectorXd b = Eigen::VectorXd::Zero(n);
    if (!band.empty()) {
      Eigen::MatrixXd rows(static_cast<Eigen::Index>(band.size()), n);
      for (std::size_t k = 0; k < band.size(); ++k) {
        rows.row(static_cast<Eigen::Index>(k)) = std::sqrt(dd[k]) * xy_.row(band[k]);
        b += dd[k] * xy_.row(band[k]).transpose();
      }
      hess.selfadjointView<Eigen::Lower>().rankUpdate(rows.transpose());
      hess.triangularView<Eigen::StrictlyUpper>() = hess.transpose();
    }
    hess.diagonal().array() += 2 * ridge_;
    if (e_ > 0) {
      hess -= e_ * (nrm.grad * b.transpose() + b * nrm.grad.transpose());
      hess += e_ * e_ * dsum * nrm.grad * nrm.grad.transpose();
      // -L' >= 0 times the curvature of the norm
      if (q_ == AttackNorm::linf) {
        hess.diagonal() += -e_ * csum * nrm.hdiag;
      } else {
        const double w = -e_ * csum / nrm.r;
        hess.diagonal().array() += w;
        hess -= w * nrm.grad * nrm.grad.transpose();
      }
    }
    return f;
  }

 private:
  LossKind loss_;
  AttackNorm q_;
  double e_;
  double ridge_;
  Eigen::MatrixXd xy_;
};

TrainResult train_newton(const Dataset& data, const ExperimentSpec& spec, const TrainerOptions& opts,
                         Eigen::VectorXd theta) {
  const SmoothedProblem prob(data, spec);
  TrainResult res;
  const bool smooth_loss = spec.loss != LossKind::hinge;
  const bool needs_smoothing = !smooth_loss || spec.attack.eps_tr > 0;
  std::vector<double> levels;
  if (needs_smoothing) {
    for (double s = opts.s_start; s > opts.s_end * (1 + 1e-12); s *= opts.s_factor) levels.push_back(s);
    levels.push_back(opts.s_end);
  } else {
    levels.push_back(opts.s_end);
  }

  Eigen::VectorXd grad;
  Eigen::MatrixXd hess;
  double gnorm = 0;
  // Levenberg-Marquardt shift: at small s the Hessian is close to singular
  // away from the margin and raw Newton steps overshoot
  double shift = 0;
  // once the objective stops resolving, accepted steps can raise the gradient;
  // the final level keeps its best iterate
  Eigen::VectorXd best;
  double best_g = std::numeric_limits<double>::infinity();
  for (double s : levels) {
    const bool last = s == levels.back();
    shift = 0;
    for (int it = 0; it < opts.newton_iters; ++it) {
      const double f = prob.derivatives(theta, s, grad, hess);
      if (!std::isfinite(f)) throw Diverged("train: objective is not finite");
      gnorm = grad.norm();
      ++res.iterations;
      if (last && gnorm < best_g) {
        best_g = gnorm;
        best = theta;
      }
      if (gnorm <= opts.tol) break;
      // Marquardt scaling: the norm's 1/s curvature on near-zero coordinates
      // would swamp an isotropic shift
      hess.diagonal().array() *= 1 + shift;
      Eigen::LDLT<Eigen::MatrixXd> ldlt(hess);
      Eigen::VectorXd dir = ldlt.solve(-grad);
      if (ldlt.info() != Eigen::Success || !dir.allFinite() || grad.dot(dir) >= 0) dir = -grad;
      const double slope = grad.dot(dir);
      if (-slope < 1e-28) break;
      double t = 1.0;
      bool moved = false;
      // below the objective's rounding floor Armijo cannot see progress, so the
      // step is judged by the gradient instead
      const bool unresolved = -slope < 1e-12 * std::max(std::abs(f), 1.0);
      Eigen::VectorXd cg;
      Eigen::MatrixXd ch;
      for (int ls = 0; ls < 60; ++ls, t *= 0.5) {
        const Eigen::VectorXd cand = theta + t * dir;
        const bool ok = unresolved ? (prob.derivatives(cand, s, cg, ch), cg.norm() < gnorm)
                                   : prob.value(cand, s) <= f + 1e-4 * t * slope;
        if (ok) {
          moved = true;
          theta = cand;
          break;
        }
      }
      if (!moved) break;
      if (t == 1.0) shift = shift < 1e-9 ? 0.0 : shift * 0.1;
      else if (t < 0.1) shift = std::min(std::max(10 * shift, 1e-6), 1e3);
    }
  }
  if (best_g < gnorm) {
    theta = std::move(best);
    gnorm = best_g;
  }
  res.theta = std::move(theta);
  res.grad_norm = gnorm;
  res.converged = gnorm <= std::max(opts.tol, 1e-6);
  return res;
}

TrainResult train_subgradient(const Dataset& data, const ExperimentSpec& spec, const TrainerOptions& opts,
                              Eigen::VectorXd theta) {
  const double e = effective_eps(spec.attack.q, spec.attack.eps_tr, data.n());
  const Eigen::MatrixXd xy = data.labels.asDiagonal() * data.features;
  const double m = static_cast<double>(data.m());
  TrainResult res;
  Eigen::VectorXd best = theta;
  double best_f = robust_objective(theta, data, spec.attack, spec.loss, spec.ridge);
  const double f0 = best_f;
  int worse = 0;
  double prev = best_f;
  for (int t = 1; t <= opts.max_epochs; ++t) {
    Eigen::VectorXd dn;
    if (spec.attack.q == AttackNorm::linf) dn = theta.unaryExpr([](double v) { return double((v > 0) - (v < 0)); });
    else dn = theta.norm() > 0 ? Eigen::VectorXd(theta / theta.norm()) : Eigen::VectorXd::Zero(theta.size());
    const double pen = e * dual_norm(spec.attack.q, theta);
    const Eigen::VectorXd z = xy * theta;
    Eigen::VectorXd c(z.size());
    for (Eigen::Index i = 0; i < z.size(); ++i) c[i] = loss_deriv(spec.loss, z[i] - pen) / m;
    Eigen::VectorXd g = xy.transpose() * c - e * c.sum() * dn + 2 * spec.ridge * theta;
    const double gn = g.norm();
    res.iterations = t;
    res.grad_norm = gn;
    if (gn <= opts.tol) {
      res.converged = true;
      break;
    }
    theta -= opts.step_c / std::sqrt(static_cast<double>(t)) * g / std::max(1.0, gn);
    const double f = robust_objective(theta, data, spec.attack, spec.loss, spec.ridge);
    if (!std::isfinite(f)) throw Diverged("train: objective is not finite");
    if (f < best_f) {
      best_f = f;
      best = theta;
    }
    worse = f > prev ? worse + 1 : 0;
    prev = f;
    if (worse > 1000 && f > 10 * f0 + 1) throw Diverged("train: objective increased persistently");
  }
  res.theta = best;
  return res;
}

}  // namespace

TrainResult train(const Dataset& data, const ExperimentSpec& spec, const TrainerOptions& opts,
                  const Eigen::VectorXd* warm) {
  Eigen::VectorXd theta = warm ? *warm : Eigen::VectorXd::Zero(data.n());
  if (theta.size() != data.n()) throw std::invalid_argument("train: warm start has the wrong dimension");
  const double f0 = robust_objective(theta, data, spec.attack, spec.loss, spec.ridge);
  TrainResult r = opts.method == TrainMethod::smoothed_newton ? train_newton(data, spec, opts, theta)
                                                              : train_subgradient(data, spec, opts, theta);
  r.initial_objective = f0;
  r.objective = robust_objective(r.theta, data, spec.attack, spec.loss, spec.ridge);
  if (!std::isfinite(r.objective)) throw Diverged("train: final objective is not finite");
  return r;
}

KeyStats key_stats(const Eigen::VectorXd& theta, const Dataset& data, AttackNorm q) {
  const Eigen::VectorXd root = data.sigma_diag.cwiseSqrt();
  const Eigen::VectorXd dir = data.model.kind == ModelKind::gmm ? Eigen::VectorXd(data.theta_star.cwiseQuotient(root))
                                                                : Eigen::VectorXd(data.theta_star.cwiseProduct(root));
  const Eigen::VectorXd v = root.cwiseProduct(theta);
  KeyStats k;
  k.u = q == AttackNorm::linf ? theta.lpNorm<1>() / std::sqrt(static_cast<double>(data.n())) : theta.norm();
  k.mu = dir.dot(v) / dir.squaredNorm();
  k.alpha = (v - k.mu * dir).norm();
  return k;
}

ErrorReport empirical_adv_error(const Eigen::VectorXd& theta, const Dataset& test, AttackNorm q, double eps_ts) {
  const double pen = effective_eps(q, eps_ts, test.n()) * dual_norm(q, theta);
  const Eigen::VectorXd z = test.labels.cwiseProduct(test.features * theta);
  const double m = static_cast<double>(z.size());
  double adv = 0, stdv = 0;
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    adv += z[i] - pen < 0 ? 1.0 : 0.0;
    stdv += z[i] < 0 ? 1.0 : 0.0;
  }
  ErrorReport r;
  r.source = ErrorSource::empirical;
  r.adv_error = adv / m;
  r.std_error = stdv / m;
  r.adv_stderr = std::sqrt(r.adv_error * (1 - r.adv_error) / m);
  r.std_stderr = std::sqrt(r.std_error * (1 - r.std_error) / m);
  r.seed = test.seed;
  r.trials = 1;
  return r;
}

ErrorReport empirical_adv_error(const Eigen::VectorXd& theta, const Dataset& train_data, AttackNorm q, double eps_ts,
                                int n_test, std::uint64_t seed) {
  if (n_test < 1) throw std::invalid_argument("empirical_adv_error: n_test must be positive");
  return empirical_adv_error(theta, generate_like(train_data, n_test, seed), q, eps_ts);
}

bool separability_probe(const Dataset& data, const AttackGeometry& attack) {
  ExperimentSpec spec;
  spec.model = data.model;
  spec.attack = attack;
  spec.loss = LossKind::hinge;
  spec.delta = static_cast<double>(data.m()) / data.n();
  const double e = effective_eps(attack.q, attack.eps_tr, data.n());
  const Eigen::MatrixXd xy = data.labels.asDiagonal() * data.features;
  TrainerOptions opts;
  opts.s_end = 1e-8;
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(data.n());
  for (double ridge : {1e-2, 1e-4, 1e-6, 1e-8}) {
    spec.ridge = ridge;
    theta = train(data, spec, opts, &theta).theta;
    const double norm = theta.norm();
    if (!(norm > 0)) continue;
    // robust margins are positively homogeneous, so a strictly positive
    // minimum margin can be scaled up to drive the hinge loss to zero
    const double worst = (xy * theta).minCoeff() - e * dual_norm(attack.q, theta);
    if (worst > 1e-12 * norm) return true;
  }
  return false;
}

void write_dataset_csv(const Dataset& data, const std::string& path) {
  auto out = fmt::output_file(path);
  for (int j = 0; j < data.n(); ++j) out.print("x{},", j);
  out.print("y\n");
  for (int i = 0; i < data.m(); ++i) {
    for (int j = 0; j < data.n(); ++j) out.print("{:.17g},", data.features(i, j));
    out.print("{:g}\n", data.labels[i]);
  }
}

}  // namespace advasym
