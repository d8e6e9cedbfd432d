#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "advasym/erm_lab.hpp"

using namespace advasym;

namespace {

ExperimentSpec spec_of(ModelKind kind, AttackNorm q, LossKind loss, double delta, double eps, double ridge = 1e-4) {
  ExperimentSpec s;
  s.model.kind = kind;
  s.attack = {q, eps, eps};
  s.loss = loss;
  s.delta = delta;
  s.ridge = ridge;
  return s;
}

Dataset tiny(std::initializer_list<std::pair<double, double>> xy) {
  Dataset d;
  d.features.resize(static_cast<Eigen::Index>(xy.size()), 1);
  d.labels.resize(static_cast<Eigen::Index>(xy.size()));
  Eigen::Index i = 0;
  for (auto [x, y] : xy) {
    d.features(i, 0) = x;
    d.labels[i++] = y;
  }
  d.theta_star = Eigen::VectorXd::Ones(1);
  d.sigma_diag = Eigen::VectorXd::Ones(1);
  return d;
}

}  // namespace

TEST_CASE("generated GMM data") {
  const ExperimentSpec s = spec_of(ModelKind::gmm, AttackNorm::linf, LossKind::hinge, 2.0, 0.0);
  const Dataset d = generate(s, 200, 42);
  CHECK(d.m() == 400);
  CHECK(d.n() == 200);
  CHECK(d.theta_star.norm() == doctest::Approx(1.0).epsilon(1e-14));
  for (Eigen::Index i = 0; i < d.labels.size(); ++i) CHECK(std::abs(d.labels[i]) == 1.0);
  const double plus = (d.labels.array() > 0).count() / 400.0;
  CHECK(std::abs(plus - 0.5) < 4 * 0.5 / std::sqrt(400.0));
  // same seed, same data
  CHECK(generate(s, 200, 42).features == d.features);
  CHECK(generate(s, 200, 43).features != d.features);
  CHECK_THROWS_AS(generate(s, 1, 1), std::invalid_argument);
}

TEST_CASE("sign-link GLM labels are deterministic") {
  const ExperimentSpec s = spec_of(ModelKind::glm, AttackNorm::l2, LossKind::logistic, 1.5, 0.0);
  const Dataset d = generate(s, 50, 1);
  const Eigen::VectorXd z = d.features * d.theta_star;
  for (Eigen::Index i = 0; i < z.size(); ++i) CHECK(d.labels[i] == (z[i] >= 0 ? 1.0 : -1.0));
}

TEST_CASE("rademacher noise coordinates are +-1") {
  const ExperimentSpec s = spec_of(ModelKind::gmm, AttackNorm::linf, LossKind::hinge, 1.0, 0.0);
  const Dataset d = generate(s, 40, 3, NoiseFamily::rademacher);
  const Eigen::MatrixXd noise = d.features - d.labels * d.theta_star.transpose();
  CHECK((noise.array().abs() - 1.0).abs().maxCoeff() <= 1e-14);
  CHECK(parse_noise(noise_name(NoiseFamily::rademacher)) == NoiseFamily::rademacher);
}

TEST_CASE("diagonal covariance follows the spectrum") {
  ExperimentSpec s = spec_of(ModelKind::gmm, AttackNorm::linf, LossKind::hinge, 1.0, 0.0);
  s.pi_dist = SpectralJointDistribution::product_normal({{0.5, 0.5}, {2.0, 0.5}});
  const Dataset d = generate(s, 100, 5);
  CHECK((d.sigma_diag.array() == 0.5).count() == 50);
  CHECK((d.sigma_diag.array() == 2.0).count() == 50);
  CHECK(d.model.zeta == doctest::Approx((d.sigma_diag.cwiseSqrt().cwiseProduct(d.theta_star)).norm()));
}

TEST_CASE("robust objective") {
  const ExperimentSpec s = spec_of(ModelKind::gmm, AttackNorm::linf, LossKind::hinge, 1.0, 0.3);
  const Dataset d = generate(s, 30, 2);
  CHECK(robust_objective(Eigen::VectorXd::Zero(30), d, s.attack, LossKind::hinge, 0.0) == 1.0);

  std::mt19937_64 rng(4);
  std::normal_distribution<double> g;
  Eigen::VectorXd theta(30);
  for (auto& t : theta) t = g(rng);
  // eps = 0: plain regularized ERM, summed by hand
  AttackGeometry none{AttackNorm::linf, 0.0, 0.0};
  double plain = 0;
  for (int i = 0; i < d.m(); ++i) plain += std::log1p(std::exp(-d.labels[i] * d.features.row(i).dot(theta)));
  plain = plain / d.m() + 0.1 * theta.squaredNorm();
  CHECK(robust_objective(theta, d, none, LossKind::logistic, 0.1) == doctest::Approx(plain).epsilon(1e-13));
}

TEST_CASE("robust objective equals the inner maximization sample by sample") {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> g;
  std::uniform_real_distribution<double> ue(0.0, 2.0);
  for (AttackNorm q : {AttackNorm::linf, AttackNorm::l2}) {
    for (int rep = 0; rep < 50; ++rep) {
      const ExperimentSpec s = spec_of(ModelKind::gmm, q, LossKind::logistic, 0.5, ue(rng));
      const Dataset d = generate(s, 12, rep);
      Eigen::VectorXd theta(12);
      for (auto& t : theta) t = g(rng);
      double sum = 0;
      for (int i = 0; i < d.m(); ++i) {
        const InnerMax im = inner_max_oracle(theta, d.features.row(i).transpose(), d.labels[i], s.attack, s.loss, rep, 200);
        sum += im.value;
        CHECK(im.search_best <= im.value + 1e-12);
      }
      const double want = sum / d.m() + s.ridge * theta.squaredNorm();
      CHECK(robust_objective(theta, d, s.attack, s.loss, s.ridge) == doctest::Approx(want).epsilon(1e-12));
    }
  }
}

TEST_CASE("inner maximization closed forms") {
  const int n = 16;
  const Eigen::VectorXd theta = Eigen::VectorXd::Constant(n, 0.5);
  const Eigen::VectorXd x = Eigen::VectorXd::LinSpaced(n, -1, 1);
  const AttackGeometry linf{AttackNorm::linf, 0.8, 0.8};
  const InnerMax a = inner_max_oracle(theta, x, 1.0, linf, LossKind::hinge, 1, 100);
  CHECK((a.delta.array() + 0.8 / std::sqrt(double(n))).abs().maxCoeff() <= 1e-15);
  const AttackGeometry l2{AttackNorm::l2, 0.8, 0.8};
  const InnerMax b = inner_max_oracle(theta, x, -1.0, l2, LossKind::hinge, 1, 100);
  CHECK(b.margin == doctest::Approx(-x.dot(theta) - 0.8 * theta.norm()).epsilon(1e-14));
  CHECK_THROWS_AS(inner_max_oracle(Eigen::VectorXd::Zero(n), x, 1.0, l2, LossKind::hinge), std::invalid_argument);
}

TEST_CASE("key statistics") {
  const ExperimentSpec s = spec_of(ModelKind::glm, AttackNorm::l2, LossKind::hinge, 1.0, 0.0);
  const Dataset d = generate(s, 40, 6);
  const KeyStats k = key_stats(d.theta_star, d, AttackNorm::l2);
  CHECK(k.mu == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(k.alpha == doctest::Approx(0.0).scale(1).epsilon(1e-14));
  CHECK(k.u == doctest::Approx(1.0).epsilon(1e-14));
  const KeyStats k1 = key_stats(d.theta_star, d, AttackNorm::linf);
  CHECK(k1.u == doctest::Approx(d.theta_star.lpNorm<1>() / std::sqrt(40.0)).epsilon(1e-14));

  std::mt19937_64 rng(1);
  std::normal_distribution<double> g;
  Eigen::VectorXd theta(40);
  for (auto& t : theta) t = g(rng);
  Eigen::VectorXd orth = theta - theta.dot(d.theta_star) * d.theta_star;
  const KeyStats ko = key_stats(orth, d, AttackNorm::l2);
  CHECK(ko.mu == doctest::Approx(0.0).scale(1).epsilon(1e-13));
  CHECK(ko.alpha == doctest::Approx(orth.norm()).epsilon(1e-13));
  const KeyStats kr = key_stats(theta, d, AttackNorm::l2);
  CHECK(kr.mu * kr.mu + kr.alpha * kr.alpha == doctest::Approx(theta.squaredNorm()).epsilon(1e-12));
}

TEST_CASE("empirical errors") {
  ExperimentSpec s = spec_of(ModelKind::glm, AttackNorm::l2, LossKind::hinge, 1.0, 0.0);
  const Dataset d = generate(s, 30, 2);
  const ErrorReport perfect = empirical_adv_error(d.theta_star, d, AttackNorm::l2, 0.0, 3000, 9);
  CHECK(perfect.std_error == 0.0);
  CHECK(perfect.adv_error == 0.0);
  const ErrorReport flipped = empirical_adv_error(d.theta_star, d, AttackNorm::l2, 1e6, 3000, 9);
  CHECK(flipped.adv_error == 1.0);
  CHECK_THROWS_AS(empirical_adv_error(d.theta_star, d, AttackNorm::l2, 0.0, 0, 9), std::invalid_argument);
}

TEST_CASE("trained estimators: population formula within three binomial standard errors") {
  int outside = 0, total = 0;
  for (int rep = 0; rep < 6; ++rep) {
    const AttackNorm q = rep % 2 ? AttackNorm::l2 : AttackNorm::linf;
    const ExperimentSpec s = spec_of(ModelKind::gmm, q, LossKind::logistic, 1.0 + rep, 0.3);
    const Dataset d = generate(s, 60, 100 + rep);
    const TrainResult fit = train(d, s);
    const KeyStats k = key_stats(fit.theta, d, q);
    const ErrorReport rep3000 = empirical_adv_error(fit.theta, d, q, 0.4, 3000, 500 + rep);
    const double pop = adv_error_from_stats(d.model, k, 0.4);
    ++total;
    if (std::abs(rep3000.adv_error - pop) > 3 * std::sqrt(pop * (1 - pop) / 3000)) ++outside;
  }
  CHECK(outside == 0);
  CHECK(total == 6);
}

TEST_CASE("training") {
  SUBCASE("a heavy ridge shrinks towards zero") {
    const ExperimentSpec s = spec_of(ModelKind::gmm, AttackNorm::l2, LossKind::hinge, 2.0, 0.0, 10.0);
    const Dataset d = generate(s, 40, 1);
    const TrainResult r = train(d, s);
    // every margin stays below the hinge, so the minimiser is linear in the data
    const Eigen::VectorXd oracle = d.features.transpose() * d.labels / (2.0 * 10.0 * static_cast<double>(d.m()));
    REQUIRE(((d.features * oracle).cwiseProduct(d.labels).array() < 1.0).all());
    CHECK((r.theta - oracle).norm() < 1e-6 * oracle.norm());
    CHECK(r.objective < 1.0);
  }
  SUBCASE("converges and descends for every loss and norm") {
    for (LossKind loss : {LossKind::hinge, LossKind::logistic, LossKind::exponential}) {
      for (AttackNorm q : {AttackNorm::linf, AttackNorm::l2}) {
        const ExperimentSpec s = spec_of(ModelKind::gmm, q, loss, 2.0, 0.5);
        const Dataset d = generate(s, 50, 7);
        const TrainResult r = train(d, s);
        CHECK(r.converged);
        CHECK(r.objective <= r.initial_objective);
      }
    }
  }
  SUBCASE("more iterations do not move a converged objective") {
    const ExperimentSpec s = spec_of(ModelKind::gmm, AttackNorm::linf, LossKind::hinge, 2.0, 0.5);
    const Dataset d = generate(s, 50, 7);
    TrainerOptions o;
    const TrainResult a = train(d, s, o);
    o.newton_iters *= 2;
    const TrainResult b = train(d, s, o);
    CHECK(std::abs(a.objective - b.objective) <= 1e-6);
  }
  SUBCASE("subgradient descent approaches the smoothed Newton optimum") {
    const ExperimentSpec s = spec_of(ModelKind::gmm, AttackNorm::l2, LossKind::logistic, 2.0, 0.3, 1e-2);
    const Dataset d = generate(s, 30, 3);
    TrainerOptions o;
    const double best = train(d, s, o).objective;
    o.method = TrainMethod::subgradient;
    const TrainResult r = train(d, s, o);
    CHECK(r.objective <= r.initial_objective);
    CHECK(r.objective - best <= 1e-3);
    CHECK(r.objective - best >= -1e-9);
  }
  SUBCASE("warm start of the wrong size is refused") {
    const ExperimentSpec s = spec_of(ModelKind::gmm, AttackNorm::l2, LossKind::logistic, 1.0, 0.0);
    const Dataset d = generate(s, 10, 3);
    const Eigen::VectorXd w = Eigen::VectorXd::Zero(3);
    CHECK_THROWS_AS(train(d, s, {}, &w), std::invalid_argument);
  }
}

TEST_CASE("trained key statistics track the solver prediction") {
  // q = 2, hinge, delta = 4, eps = 0.5, averaged over four n = 400 draws
  const ExperimentSpec s = spec_of(ModelKind::gmm, AttackNorm::l2, LossKind::hinge, 4.0, 0.5);
  const SaddlePoint p = solve_theory(s);
  KeyStats mean;
  const int trials = 4;
  for (int t = 0; t < trials; ++t) {
    const Dataset d = generate(s, 400, 1000 + t);
    const KeyStats k = key_stats(train(d, s).theta, d, AttackNorm::l2);
    mean.u += k.u / trials;
    mean.mu += k.mu / trials;
    mean.alpha += k.alpha / trials;
  }
  CHECK(std::abs(mean.alpha - p.alpha) <= 0.05);
  CHECK(std::abs(mean.mu - p.mu) <= 0.05);
  CHECK(std::abs(mean.u - p.w / s.attack.eps_tr) <= 0.05);
}

TEST_CASE("separability probe") {
  const AttackGeometry l2_0{AttackNorm::l2, 0.0, 0.0};
  CHECK_FALSE(separability_probe(tiny({{1.0, 1.0}, {1.0, -1.0}}), l2_0));
  const AttackGeometry l2_1{AttackNorm::l2, 1.0, 1.0};
  CHECK(separability_probe(tiny({{2.0, 1.0}, {-2.0, -1.0}}), l2_1));
  // separable sets are downward closed in eps
  const ExperimentSpec s = spec_of(ModelKind::gmm, AttackNorm::l2, LossKind::hinge, 0.5, 0.0);
  const Dataset d = generate(s, 40, 12);
  bool prev = true;
  for (double eps : {0.0, 0.5, 1.0, 2.0, 4.0}) {
    const bool sep = separability_probe(d, {AttackNorm::l2, eps, eps});
    CHECK((prev || !sep));
    prev = sep;
  }
  CHECK_FALSE(prev);
}
