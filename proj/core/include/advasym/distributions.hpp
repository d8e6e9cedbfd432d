#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace advasym {

inline constexpr double kInvSqrt2Pi = 0.39894228040143267794;

inline double normal_pdf(double z) { return kInvSqrt2Pi * std::exp(-0.5 * z * z); }
inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }
// Gaussian tail Q(z) = P(G > z)
inline double normal_sf(double z) { return 0.5 * std::erfc(z / std::sqrt(2.0)); }

// Gauss-Hermite rule for the standard normal weight.
struct QuadratureRule {
  int order = 0;
  std::vector<double> nodes;
  std::vector<double> weights;

  static QuadratureRule gauss_hermite(int order);
};

const QuadratureRule& default_rule_1d();  // order 80
const QuadratureRule& default_rule_2d();  // order 60, used tensorized

double expect_g1(const std::function<double(double)>& f, const QuadratureRule& rule);
double expect_g2(const std::function<double(double, double)>& f, const QuadratureRule& rule);

// Composite Gauss-Legendre panels for E f(W), W ~ N(0,1), truncated to |W| <= 12.
// Panel boundaries are placed at the requested breakpoints so that kinks and
// jumps of the integrand fall on panel edges.
class NormalPanels {
 public:
  static constexpr double kHalfWidth = 12.0;
  static constexpr int kMaxBreaks = 12;

  // visit(z, weight) for every node; breaks are in W units
  template <class F>
  static void for_each(std::span<const double> breaks, F&& visit, double panel = 3.0);

  // Same, for X = mean + sd W with breaks given in X units; visit(x, weight, z).
  template <class F>
  static void for_each_scaled(double mean, double sd, std::span<const double> x_breaks, F&& visit,
                              double panel = 3.0);

  static std::span<const double> abscissa();
  static std::span<const double> gl_weights();
};

enum class LinkKind { sign, logistic_random };

struct LinkFunction {
  LinkKind kind = LinkKind::sign;
  // P(psi(x) = +1)
  double prob_plus(double x) const;
};

LinkKind parse_link(std::string_view name);
std::string_view link_name(LinkKind kind);

enum class ModelKind { gmm, glm };

ModelKind parse_model(std::string_view name);
std::string_view model_name(ModelKind kind);

struct ModelSpec {
  ModelKind kind = ModelKind::gmm;
  LinkFunction link{};
  double prior = 0.5;
  double zeta = 1.0;
  double zeta_tilde = 1.0;

  // the constant C in the scalar objectives
  double signal_scale() const { return kind == ModelKind::gmm ? zeta_tilde : zeta; }
};

// E f(Z) for Z the margin variable of the model at (alpha, mu):
// GMM: sqrt(alpha^2 + mu^2 zt^2) G + mu zt^2, GLM: alpha G + mu zeta S psi(zeta S).
double expect_Z(double alpha, double mu, const ModelSpec& model, const std::function<double(double)>& f);

struct SpectralAtom {
  double t;
  double lambda;
  double v;
  double weight;
};

// Joint law of (T, L, V). Diagonal covariances have V = T.
class SpectralJointDistribution {
 public:
  enum class Kind { isotropic, atoms, product };

  // One mixture component: a fixed eigenvalue with T either standard normal
  // (independent of L) or a point mass.
  struct Component {
    double lambda;
    double weight;
    bool t_normal;
    double t;
    double v;
  };

  static SpectralJointDistribution isotropic();
  // Weights are normalized to sum 1; t and v columns are rescaled so E T^2 = E V^2 = 1.
  static SpectralJointDistribution from_atoms(std::vector<SpectralAtom> atoms);
  // T ~ N(0,1) independent of L, L over the given (lambda, weight) atoms, V = T.
  static SpectralJointDistribution product_normal(std::vector<std::pair<double, double>> lambda_weights);
  // whitespace separated columns t lambda v weight; '#' starts a comment
  static SpectralJointDistribution load_atoms(const std::string& path);

  Kind kind() const { return kind_; }
  const std::vector<Component>& components() const { return components_; }
  bool is_isotropic() const;
  double min_lambda() const;
  double max_lambda() const;

  // zeta^2 = E[L V^2], zeta_tilde^2 = E[V^2 / L]
  double zeta() const;
  double zeta_tilde() const;

 private:
  Kind kind_ = Kind::isotropic;
  std::vector<Component> components_;
};

double expect_pi(const SpectralJointDistribution& dist, const std::function<double(double, double, double)>& f,
                 const QuadratureRule& rule = default_rule_1d());

// ---------------------------------------------------------------------------

template <class F>
void NormalPanels::for_each(std::span<const double> breaks, F&& visit, double panel) {
  double cuts[kMaxBreaks + 2];
  int nc = 0;
  cuts[nc++] = -kHalfWidth;
  double sorted[kMaxBreaks];
  int ns = 0;
  for (double b : breaks) {
    if (ns < kMaxBreaks && b > -kHalfWidth && b < kHalfWidth) sorted[ns++] = b;
  }
  std::sort(sorted, sorted + ns);
  for (int i = 0; i < ns; ++i) cuts[nc++] = sorted[i];
  cuts[nc++] = kHalfWidth;
  const auto xs = abscissa();
  const auto ws = gl_weights();
  for (int c = 0; c + 1 < nc; ++c) {
    const double a = cuts[c];
    const double b = cuts[c + 1];
    if (b <= a) continue;
    const int pieces = std::max(1, static_cast<int>(std::ceil((b - a) / panel)));
    const double len = (b - a) / pieces;
    for (int p = 0; p < pieces; ++p) {
      const double mid = a + (p + 0.5) * len;
      const double half = 0.5 * len;
      for (std::size_t k = 0; k < xs.size(); ++k) {
        const double wk = ws[k] * half;
        if (xs[k] == 0.0) {
          visit(mid, wk * normal_pdf(mid));
        } else {
          const double z1 = mid - half * xs[k];
          const double z2 = mid + half * xs[k];
          visit(z1, wk * normal_pdf(z1));
          visit(z2, wk * normal_pdf(z2));
        }
      }
    }
  }
}

template <class F>
void NormalPanels::for_each_scaled(double mean, double sd, std::span<const double> x_breaks, F&& visit,
                                   double panel) {
  if (!(sd > 0)) {
    visit(mean, 1.0, 0.0);
    return;
  }
  double zb[kMaxBreaks];
  int n = 0;
  for (double b : x_breaks) {
    if (n < kMaxBreaks) zb[n++] = (b - mean) / sd;
  }
  for_each(std::span<const double>(zb, n), [&](double z, double w) { visit(mean + sd * z, w, z); }, panel);
}

}  // namespace advasym
