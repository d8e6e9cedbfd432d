#include "advasym/distributions.hpp"

#include <boost/math/quadrature/gauss.hpp>

#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace advasym {

QuadratureRule QuadratureRule::gauss_hermite(int order) {
  if (order < 1) throw std::invalid_argument("quadrature order must be positive");
  // physicists' Hermite nodes by Newton on the orthonormal recurrence,
  // then rescaled to the N(0,1) weight
  const int n = order;
  std::vector<double> x(n), w(n);
  const double pim4 = 0.7511255444649425;  // pi^(-1/4)
  const int m = (n + 1) / 2;
  double z = 0;
  for (int i = 0; i < m; ++i) {
    if (i == 0) z = std::sqrt(2.0 * n + 1) - 1.85575 * std::pow(2.0 * n + 1, -0.16667);
    else if (i == 1) z -= 1.14 * std::pow(static_cast<double>(n), 0.426) / z;
    else if (i == 2) z = 1.86 * z - 0.86 * x[0];
    else if (i == 3) z = 1.91 * z - 0.91 * x[1];
    else z = 2.0 * z - x[i - 2];
    double pp = 0;
    for (int it = 0; it < 100; ++it) {
      double p1 = pim4, p2 = 0;
      for (int j = 0; j < n; ++j) {
        const double p3 = p2;
        p2 = p1;
        p1 = z * std::sqrt(2.0 / (j + 1)) * p2 - std::sqrt(static_cast<double>(j) / (j + 1)) * p3;
      }
      pp = std::sqrt(2.0 * n) * p2;
      const double z1 = z;
      z = z1 - p1 / pp;
      if (std::abs(z - z1) <= 1e-15 * std::max(1.0, std::abs(z))) break;
    }
    x[i] = z;
    x[n - 1 - i] = -z;
    w[i] = 2.0 / (pp * pp);
    w[n - 1 - i] = w[i];
  }
  if (n % 2 == 1) x[n / 2] = 0.0;
  QuadratureRule rule;
  rule.order = order;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  const double inv_sqrt_pi = 0.56418958354775628695;
  for (int i = 0; i < n; ++i) {
    rule.nodes[i] = std::sqrt(2.0) * x[n - 1 - i];
    rule.weights[i] = w[n - 1 - i] * inv_sqrt_pi;
  }
  return rule;
}

const QuadratureRule& default_rule_1d() {
  static const QuadratureRule rule = QuadratureRule::gauss_hermite(80);
  return rule;
}

const QuadratureRule& default_rule_2d() {
  static const QuadratureRule rule = QuadratureRule::gauss_hermite(60);
  return rule;
}

double expect_g1(const std::function<double(double)>& f, const QuadratureRule& rule) {
  double s = 0;
  for (int i = 0; i < rule.order; ++i) s += rule.weights[i] * f(rule.nodes[i]);
  return s;
}

double expect_g2(const std::function<double(double, double)>& f, const QuadratureRule& rule) {
  double s = 0;
  for (int i = 0; i < rule.order; ++i) {
    double inner = 0;
    for (int j = 0; j < rule.order; ++j) inner += rule.weights[j] * f(rule.nodes[i], rule.nodes[j]);
    s += rule.weights[i] * inner;
  }
  return s;
}

namespace {
using GL = boost::math::quadrature::gauss<double, 20>;
}

std::span<const double> NormalPanels::abscissa() {
  static const auto& a = GL::abscissa();
  return {a.data(), a.size()};
}

std::span<const double> NormalPanels::gl_weights() {
  static const auto& w = GL::weights();
  return {w.data(), w.size()};
}

double LinkFunction::prob_plus(double x) const {
  if (kind == LinkKind::sign) return x >= 0 ? 1.0 : 0.0;
  return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

LinkKind parse_link(std::string_view name) {
  if (name == "sign") return LinkKind::sign;
  if (name == "logistic" || name == "logistic_random") return LinkKind::logistic_random;
  throw std::invalid_argument("unknown link: " + std::string(name));
}

std::string_view link_name(LinkKind kind) { return kind == LinkKind::sign ? "sign" : "logistic"; }

ModelKind parse_model(std::string_view name) {
  if (name == "gmm") return ModelKind::gmm;
  if (name == "glm") return ModelKind::glm;
  throw std::invalid_argument("unknown model: " + std::string(name));
}

std::string_view model_name(ModelKind kind) { return kind == ModelKind::gmm ? "gmm" : "glm"; }

double expect_Z(double alpha, double mu, const ModelSpec& model, const std::function<double(double)>& f) {
  if (alpha < 0) throw std::invalid_argument("expect_Z: alpha must be non-negative");
  double total = 0;
  if (model.kind == ModelKind::gmm) {
    const double zt2 = model.zeta_tilde * model.zeta_tilde;
    const double sd = std::sqrt(alpha * alpha + mu * mu * zt2);
    NormalPanels::for_each_scaled(mu * zt2, sd, {}, [&](double x, double w, double) { total += w * f(x); });
    return total;
  }
  const double zeta = model.zeta;
  const double zero = 0.0;
  NormalPanels::for_each(std::span<const double>(&zero, 1), [&](double s, double ws) {
    const double pp = model.link.prob_plus(zeta * s);
    for (int sgn : {1, -1}) {
      const double p = sgn > 0 ? pp : 1.0 - pp;
      if (p == 0.0) continue;
      const double shift = mu * zeta * s * sgn;
      double inner = 0;
      NormalPanels::for_each_scaled(shift, alpha, {}, [&](double x, double w, double) { inner += w * f(x); });
      total += ws * p * inner;
    }
  });
  return total;
}

SpectralJointDistribution SpectralJointDistribution::isotropic() {
  SpectralJointDistribution d;
  d.kind_ = Kind::isotropic;
  d.components_ = {{1.0, 1.0, true, 0.0, 0.0}};
  return d;
}

SpectralJointDistribution SpectralJointDistribution::from_atoms(std::vector<SpectralAtom> atoms) {
  if (atoms.empty()) throw std::invalid_argument("spectral distribution needs at least one atom");
  double wsum = 0, t2 = 0, v2 = 0;
  for (const auto& a : atoms) {
    if (!(a.lambda > 0)) throw std::invalid_argument("eigenvalue atoms must be positive");
    if (a.weight < 0) throw std::invalid_argument("atom weights must be non-negative");
    wsum += a.weight;
  }
  if (!(wsum > 0)) throw std::invalid_argument("atom weights sum to zero");
  for (const auto& a : atoms) {
    t2 += a.weight / wsum * a.t * a.t;
    v2 += a.weight / wsum * a.v * a.v;
  }
  if (!(t2 > 0) || !(v2 > 0)) throw std::invalid_argument("signal atoms are identically zero");
  SpectralJointDistribution d;
  d.kind_ = Kind::atoms;
  for (const auto& a : atoms) {
    d.components_.push_back({a.lambda, a.weight / wsum, false, a.t / std::sqrt(t2), a.v / std::sqrt(v2)});
  }
  return d;
}

SpectralJointDistribution SpectralJointDistribution::product_normal(
    std::vector<std::pair<double, double>> lambda_weights) {
  if (lambda_weights.empty()) throw std::invalid_argument("spectral distribution needs at least one atom");
  double wsum = 0;
  for (const auto& [l, w] : lambda_weights) {
    if (!(l > 0)) throw std::invalid_argument("eigenvalue atoms must be positive");
    if (w < 0) throw std::invalid_argument("atom weights must be non-negative");
    wsum += w;
  }
  if (!(wsum > 0)) throw std::invalid_argument("atom weights sum to zero");
  SpectralJointDistribution d;
  d.kind_ = Kind::product;
  for (const auto& [l, w] : lambda_weights) d.components_.push_back({l, w / wsum, true, 0.0, 0.0});
  return d;
}

SpectralJointDistribution SpectralJointDistribution::load_atoms(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open atom table: " + path);
  std::vector<SpectralAtom> atoms;
  std::string line;
  while (std::getline(in, line)) {
    if (auto pos = line.find('#'); pos != std::string::npos) line.erase(pos);
    std::istringstream ls(line);
    SpectralAtom a{};
    if (!(ls >> a.t)) continue;
    if (!(ls >> a.lambda >> a.v >> a.weight)) throw std::runtime_error("malformed atom row in " + path);
    atoms.push_back(a);
  }
  return from_atoms(std::move(atoms));
}

bool SpectralJointDistribution::is_isotropic() const {
  for (const auto& c : components_) {
    if (c.lambda != 1.0 || !c.t_normal) return false;
  }
  return true;
}

double SpectralJointDistribution::min_lambda() const {
  double m = components_.front().lambda;
  for (const auto& c : components_) m = std::min(m, c.lambda);
  return m;
}

double SpectralJointDistribution::max_lambda() const {
  double m = components_.front().lambda;
  for (const auto& c : components_) m = std::max(m, c.lambda);
  return m;
}

double SpectralJointDistribution::zeta() const {
  double s = 0;
  for (const auto& c : components_) s += c.weight * c.lambda * (c.t_normal ? 1.0 : c.v * c.v);
  return std::sqrt(s);
}

double SpectralJointDistribution::zeta_tilde() const {
  double s = 0;
  for (const auto& c : components_) s += c.weight / c.lambda * (c.t_normal ? 1.0 : c.v * c.v);
  return std::sqrt(s);
}

double expect_pi(const SpectralJointDistribution& dist, const std::function<double(double, double, double)>& f,
                 const QuadratureRule& rule) {
  double s = 0;
  for (const auto& c : dist.components()) {
    if (c.t_normal) {
      double inner = 0;
      for (int i = 0; i < rule.order; ++i) inner += rule.weights[i] * f(rule.nodes[i], c.lambda, rule.nodes[i]);
      s += c.weight * inner;
    } else {
      s += c.weight * f(c.t, c.lambda, c.v);
    }
  }
  return s;
}

}  // namespace advasym
