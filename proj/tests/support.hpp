#pragma once

#include <algorithm>
#include <cmath>
#include <functional>

#include "advasym/theory_solver.hpp"

namespace advasym::testing {

inline double& coord(SaddlePoint& p, int i) {
  switch (i) {
    case 0: return p.alpha;
    case 1: return p.tau1;
    case 2: return p.w;
    case 3: return p.mu;
    case 4: return p.tau2;
    case 5: return p.beta;
    case 6: return p.gamma;
    case 7: return p.eta;
    default: return p.tau3;
  }
}

// Largest central-difference partial derivative of f at p over the first nv
// coordinates. Steps are relative: some coordinates sit near 1e-3.
inline double fd_grad_max(const SaddlePoint& p, int nv, const std::function<double(const SaddlePoint&)>& f) {
  double m = 0;
  for (int i = 0; i < nv; ++i) {
    SaddlePoint a = p, b = p;
    const double h = 1e-5 * std::max(std::abs(coord(a, i)), 1e-3);
    coord(a, i) += h;
    coord(b, i) -= h;
    m = std::max(m, std::abs(f(a) - f(b)) / (2 * h));
  }
  return m;
}

// Same for the three-variable isotropic q = 2 objective in (alpha, mu, tau, beta).
inline double fd_grad_l2_iso(const L2IsoSolution& z, const ExperimentSpec& s) {
  double v[4] = {z.alpha, z.mu, z.tau(s.delta), z.beta(s.delta)};
  double m = 0;
  for (int i = 0; i < 4; ++i) {
    double a[4], b[4];
    std::copy(v, v + 4, a);
    std::copy(v, v + 4, b);
    const double h = 1e-5 * std::max(std::abs(v[i]), 1e-3);
    a[i] += h;
    b[i] -= h;
    const double fa = objective_l2_iso(a[0], a[1], a[2], a[3], s);
    const double fb = objective_l2_iso(b[0], b[1], b[2], b[3], s);
    m = std::max(m, std::abs(fa - fb) / (2 * h));
  }
  return m;
}

// sup |a - b| over the eight saddle-point coordinates, skipping `skip` (or -1)
inline double max_gap(const SaddlePoint& a, const SaddlePoint& b, int skip = -1) {
  const auto va = a.vars(), vb = b.vars();
  double m = 0;
  for (int i = 0; i < 8; ++i) {
    if (i != skip) m = std::max(m, std::abs(va[i] - vb[i]));
  }
  return m;
}

}  // namespace advasym::testing
