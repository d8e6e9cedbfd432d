#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <string>
#include <random>

#include "advasym/theory_solver.hpp"

namespace advasym::detail {

inline constexpr double kLower = 1e-10;
inline constexpr double kUpper = 1e10;

enum class Domain { positive, nonnegative, free };

template <std::size_t N>
double sup_norm(const std::array<double, N>& a) {
  double m = 0;
  for (double x : a) m = std::max(m, std::abs(x));
  return m;
}

template <std::size_t N>
void check_finite(const std::array<double, N>& v, const char* who) {
  for (double x : v) {
    if (!std::isfinite(x)) throw DomainEscape(std::string(who) + ": iterate left the finite domain");
  }
}

inline double project(Domain d, double x) {
  switch (d) {
    case Domain::positive: return std::clamp(x, kLower, kUpper);
    case Domain::nonnegative: return std::clamp(x, 0.0, kUpper);
    case Domain::free: return x;
  }
  return x;
}

// Newton on residual(v) = 0 with a central-difference Jacobian and
// backtracking on the sup-norm of the residual.
template <std::size_t N, class Residual>
bool newton_solve(std::array<double, N>& v, Residual&& residual, const std::array<Domain, N>& dom, double target,
                  int max_iter, int& iters, double& res_norm) {
  using Mat = Eigen::Matrix<double, static_cast<int>(N), static_cast<int>(N)>;
  using Vec = Eigen::Matrix<double, static_cast<int>(N), 1>;
  std::array<double, N> r = residual(v);
  res_norm = sup_norm(r);
  for (int it = 0; it < max_iter && res_norm > target; ++it) {
    ++iters;
    Mat J;
    for (std::size_t j = 0; j < N; ++j) {
      const double h = 1e-6 * std::max(std::abs(v[j]), 1e-2);
      auto vp = v, vm = v;
      vp[j] += h;
      vm[j] -= h;
      if (dom[j] != Domain::free && vm[j] < 0) vm[j] = v[j];
      const auto rp = residual(vp);
      const auto rm = residual(vm);
      const double span = vp[j] - vm[j];
      for (std::size_t i = 0; i < N; ++i) J(i, j) = (rp[i] - rm[i]) / span;
    }
    Vec rv;
    for (std::size_t i = 0; i < N; ++i) rv(i) = r[i];
    const Vec dx = J.fullPivLu().solve(-rv);
    if (!dx.allFinite()) return false;
    double t = 1.0;
    for (std::size_t j = 0; j < N; ++j) {
      if (dom[j] == Domain::positive && v[j] + t * dx(j) < 0.5 * v[j]) t = std::min(t, 0.5 * v[j] / -dx(j));
      if (dom[j] == Domain::nonnegative && v[j] + t * dx(j) < 0) t = std::min(t, v[j] > 0 ? v[j] / -dx(j) : 0.0);
    }
    bool accepted = false;
    for (int ls = 0; ls < 30 && t > 1e-8; ++ls, t *= 0.5) {
      std::array<double, N> trial;
      for (std::size_t j = 0; j < N; ++j) trial[j] = project(dom[j], v[j] + t * dx(j));
      std::array<double, N> rt;
      try {
        rt = residual(trial);
      } catch (const DomainEscape&) {
        continue;
      }
      const double nt = sup_norm(rt);
      if (std::isfinite(nt) && nt < res_norm) {
        v = trial;
        r = rt;
        res_norm = nt;
        accepted = true;
        break;
      }
    }
    if (!accepted) return false;
  }
  return res_norm <= target;
}

template <std::size_t N>
struct FixedPointOutcome {
  std::array<double, N> v{};
  double residual = 0;
  double step = 0;
  int iterations = 0;
  bool converged = false;
};

// Damped Gauss-Seidel sweeps until both the step and the residual are small.
// Once the residual is moderate a Newton polish on the same residual is tried.
template <std::size_t N, class Sweep, class Residual>
FixedPointOutcome<N> run_fixed_point(std::array<double, N> v, Sweep&& sweep, Residual&& residual,
                                     const std::array<Domain, N>& dom, const SolverOptions& opts, const char* who) {
  FixedPointOutcome<N> out;
  int it = 0;
  int next_newton = 0;
  double res = sup_norm(residual(v));
  double step = std::numeric_limits<double>::infinity();
  auto one_sweep = [&] {
    const auto prev = v;
    sweep(v);
    ++it;
    check_finite(v, who);
    step = 0;
    for (std::size_t i = 0; i < N; ++i) step = std::max(step, std::abs(v[i] - prev[i]));
    res = sup_norm(residual(v));
  };
  auto best = v;
  double best_res = res;
  while (it < opts.max_iter) {
    try {
      one_sweep();
    } catch (const DomainEscape&) {
      // the relaxed sweep left the domain; continue from the best point with Newton only
      v = best;
      res = best_res;
      next_newton = it;
      ++it;
    }
    if (res < best_res) {
      best = v;
      best_res = res;
    }
    if (step <= opts.step_tol && res <= opts.tol) {
      out.converged = true;
      break;
    }
    // Newton from the best point seen so far, periodically; sweeps alone can
    // cycle when the fixed-point map is not contractive
    if (opts.newton_polish && it >= next_newton) {
      next_newton = it + (best_res < 1e-3 ? 10 : 25);
      auto trial = best;
      int nit = 0;
      double nres = 0;
      bool ok = false;
      try {
        ok = newton_solve(trial, residual, dom, std::max(1e-13, 1e-3 * opts.tol), 40, nit, nres);
      } catch (const DomainEscape&) {
        nres = best_res;
      }
      it += nit;
      if (nres < best_res) {
        v = trial;
        res = nres;
        best = v;
        best_res = nres;
      }
      if (ok) {
        one_sweep();
        if (step <= opts.step_tol && res <= opts.tol) {
          out.converged = true;
          break;
        }
      }
    }
  }
  if (!out.converged) {
    v = best;
    res = best_res;
  }
  out.v = v;
  out.residual = res;
  out.step = step;
  out.iterations = it;
  return out;
}

// Walks a scalar parameter from `from` to `to` with warm starts, given a
// solution at `from`. run(value, start) returns a FixedPointOutcome.
// Geometric walks shrink towards the target (a zero target is reached from
// 1e-9); arithmetic walks move in steps of at most max_step. Failed stages
// shorten the step until it is negligible.
template <std::size_t N, class Run>
FixedPointOutcome<N> walk(double from, double to, FixedPointOutcome<N> out, Run&& run, bool geometric,
                          double max_step = 0.1) {
  double cur = from;
  double factor = 0.5;
  double step = max_step;
  int total = out.iterations;
  while (out.converged && cur != to) {
    double next;
    if (geometric) {
      next = cur * factor;
      if (next <= std::max(to, 1e-9)) next = to;
    } else {
      next = to > cur ? std::min(to, cur + step) : std::max(to, cur - step);
    }
    auto o = run(next, out.v);
    total += o.iterations;
    if (o.converged) {
      out = o;
      cur = next;
      factor = std::max(0.1, factor * factor);
      step = std::min(max_step, 2 * step);
    } else {
      factor = std::sqrt(factor);
      step *= 0.5;
      if (factor > 0.99 || step < 1e-4 * max_step) {
        out.converged = false;
        break;
      }
    }
  }
  out.iterations = total;
  return out;
}

// Homotopy in the ridge: solve at a large ridge, then walk down to the target.
template <std::size_t N, class Run>
FixedPointOutcome<N> ridge_continuation(double target, const std::array<double, N>& start, Run&& run) {
  const double top = std::max(target, 0.1);
  auto out = run(top, start);
  if (!out.converged) return out;
  return walk(top, target, out, run, true);
}

// Direct run at the target. Failing that, for each of two large ridges:
// solve there (at eps, else at eps = 0 and walk eps up) and walk the ridge
// down. run_at(ridge, eps, start) returns a FixedPointOutcome.
template <std::size_t N, class RunAt>
FixedPointOutcome<N> staged_solve(const std::array<double, N>& start, double ridge, double eps, RunAt&& run_at) {
  using V = std::array<double, N>;
  auto by_ridge = [&](double r, const V& s) { return run_at(r, eps, s); };
  auto out = run_at(ridge, eps, start);
  int spent = out.iterations;
  for (double top : {std::max(ridge, 0.1), std::max(10 * ridge, 1.0)}) {
    if (out.converged) break;
    out = run_at(top, eps, start);
    if (!out.converged && eps > 0) {
      spent += out.iterations;
      out = run_at(top, 0.0, start);
      if (out.converged) out = walk(0.0, eps, out, [&](double e, const V& s) { return run_at(top, e, s); }, false);
    }
    if (out.converged) out = walk(top, ridge, out, by_ridge, true);
    spent += out.iterations;
  }
  out.iterations = spent;
  return out;
}

// sup over coordinates of |a - b| / max(1, |b|)
template <std::size_t N>
double rel_gap(const std::array<double, N>& a, const std::array<double, N>& b) {
  double m = 0;
  for (std::size_t i = 0; i < N; ++i) m = std::max(m, std::abs(a[i] - b[i]) / std::max(1.0, std::abs(b[i])));
  return m;
}

// Multiplicative jitter used by the uniqueness probe.
template <std::size_t N>
std::array<double, N> jitter(const std::array<double, N>& v, const std::array<Domain, N>& dom, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  std::array<double, N> out = v;
  for (std::size_t i = 0; i < N; ++i) {
    if (dom[i] == Domain::free) out[i] = v[i] + u(rng) * std::max(0.5, std::abs(v[i]));
    else out[i] = project(dom[i], std::max(v[i], 1e-3) * std::exp(u(rng)));
  }
  return out;
}

struct RestartVerdict {
  bool agree = true;
  int failed = 0;
};

// Re-solves from jittered copies of the solution. Restarts that do not
// converge are counted; only a converged restart that lands elsewhere
// counts as disagreement.
template <std::size_t N, class Solve>
RestartVerdict restart_probe(const std::array<double, N>& sol, const std::array<Domain, N>& dom,
                             const SolverOptions& opts, Solve&& solve_from) {
  RestartVerdict verdict;
  std::mt19937_64 rng(opts.restart_seed);
  for (int k = 0; k < opts.restarts && verdict.agree; ++k) {
    try {
      const auto o = solve_from(jitter(sol, dom, rng));
      if (!o.converged) ++verdict.failed;
      else if (rel_gap(o.v, sol) > opts.restart_tol) verdict.agree = false;
    } catch (const std::runtime_error&) {
      ++verdict.failed;
    }
  }
  return verdict;
}

}  // namespace advasym::detail
