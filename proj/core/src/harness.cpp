#include "advasym/harness.hpp"

#include <fmt/format.h>
#include <fmt/os.h>

#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <ostream>
#include <random>
#include <thread>

namespace advasym {

namespace {

// Runs task(i) for i in [0, count) on a bounded pool. The exception of the
// lowest failing index is rethrown, so failures do not depend on scheduling.
template <class Task>
void parallel_for(std::size_t count, int workers, Task&& task) {
  if (workers <= 0) workers = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  workers = static_cast<int>(std::min<std::size_t>(workers, std::max<std::size_t>(count, 1)));
  std::atomic<std::size_t> next{0};
  std::mutex mu;
  std::size_t failed_at = count;
  std::exception_ptr failure;
  auto body = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < count;) {
      try {
        task(i);
      } catch (...) {
        std::lock_guard lock(mu);
        if (i < failed_at) {
          failed_at = i;
          failure = std::current_exception();
        }
      }
    }
  };
  if (workers == 1) {
    body();
  } else {
    std::vector<std::jthread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(body);
  }
  if (failure) std::rethrow_exception(failure);
}

std::uint64_t stream_seed(std::uint64_t master, std::uint32_t cell, std::uint32_t trial, std::uint32_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(master), static_cast<std::uint32_t>(master >> 32), cell, trial, stream};
  std::uint32_t out[2];
  seq.generate(out, out + 2);
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

ResultRow blank_row(const SweepConfig& cfg, double delta, double eps_tr, double eps_ts) {
  ResultRow r;
  r.model = std::string(model_name(cfg.base.model.kind));
  r.q = std::string(attack_norm_name(cfg.base.attack.q));
  r.loss = std::string(loss_name(cfg.base.loss));
  r.delta = delta;
  r.eps_tr = eps_tr;
  r.eps_ts = eps_ts;
  r.lambda = cfg.base.ridge;
  r.seed = cfg.seed;
  if (cfg.base.model.kind == ModelKind::gmm) r.bayes_adv = bayes_adv_error_gmm(cfg.base.pi_dist, eps_ts, cfg.base.attack.q);
  return r;
}

ExperimentSpec cell_spec(const SweepConfig& cfg, double delta, double eps_tr) {
  ExperimentSpec s = cfg.base.with_derived_zeta();
  s.delta = delta;
  s.attack.eps_tr = eps_tr;
  s.attack.eps_ts = 0;
  return s;
}

std::size_t row_index(const SweepConfig& cfg, std::size_t d, std::size_t e, std::size_t t) {
  return (d * cfg.eps_tr.size() + e) * cfg.eps_ts.size() + t;
}

std::string field(double v) { return std::isnan(v) ? std::string() : fmt::format("{:.10g}", v); }

}  // namespace

std::uint64_t spec_hash(const SweepConfig& cfg) {
  const auto& b = cfg.base;
  std::string text = fmt::format("model={} link={} prior={:a} q={} loss={} ridge={:a}", model_name(b.model.kind),
                                 link_name(b.model.link.kind), b.model.prior, attack_norm_name(b.attack.q),
                                 loss_name(b.loss), b.ridge);
  for (const auto& c : b.pi_dist.components()) {
    text += fmt::format(" pi({:a},{:a},{},{:a},{:a})", c.lambda, c.weight, c.t_normal, c.t, c.v);
  }
  auto axis = [&](const char* name, const std::vector<double>& v) {
    text += fmt::format(" {}=", name);
    for (double x : v) text += fmt::format("{:a},", x);
  };
  axis("delta", cfg.delta);
  axis("eps_tr", cfg.eps_tr);
  axis("eps_ts", cfg.eps_ts);
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  return h;
}

SweepResult run_theory(const SweepConfig& cfg) {
  cfg.validate();
  SweepResult out;
  out.spec_hash = spec_hash(cfg);
  out.rows.resize(cfg.delta.size() * cfg.eps_tr.size() * cfg.eps_ts.size());
  // one warm-started chain along delta per eps_tr
  parallel_for(cfg.eps_tr.size(), cfg.workers, [&](std::size_t e) {
    std::optional<SaddlePoint> prev;
    for (std::size_t d = 0; d < cfg.delta.size(); ++d) {
      const ExperimentSpec spec = cell_spec(cfg, cfg.delta[d], cfg.eps_tr[e]);
      SaddlePoint sp;
      try {
        SolverOptions opts = cfg.solver;
        opts.warm_start = prev;
        try {
          sp = solve_theory(spec, opts);
        } catch (const NonConvergence&) {
          if (!prev) throw;
          opts.warm_start.reset();
          sp = solve_theory(spec, opts);
        }
      } catch (const NonConvergence& err) {
        throw NonConvergence(fmt::format("theory cell delta={:g} eps_tr={:g}: {}", cfg.delta[d], cfg.eps_tr[e], err.what()));
      }
      prev = sp;
      const double std_err = std_error_theory(sp, spec);
      for (std::size_t t = 0; t < cfg.eps_ts.size(); ++t) {
        ResultRow r = blank_row(cfg, cfg.delta[d], cfg.eps_tr[e], cfg.eps_ts[t]);
        r.alpha = sp.alpha;
        r.mu = sp.mu;
        r.w = sp.w;
        r.theory_adv = adv_error_theory(sp, spec, cfg.eps_ts[t]);
        r.theory_std = std_err;
        r.solver_residual = sp.residual;
        r.solver_iters = sp.iterations;
        out.rows[row_index(cfg, d, e, t)] = r;
      }
    }
  });
  return out;
}

SweepResult run_empirical(const SweepConfig& cfg) {
  cfg.validate();
  const std::size_t nd = cfg.delta.size(), ne = cfg.eps_tr.size(), nt = cfg.eps_ts.size();
  const std::size_t trials = static_cast<std::size_t>(cfg.trials);
  struct Outcome {
    bool diverged = false;
    std::vector<double> adv, std_err;
  };
  std::vector<Outcome> outcomes(nd * ne * trials);
  parallel_for(outcomes.size(), cfg.workers, [&](std::size_t i) {
    const std::size_t k = i % trials, e = (i / trials) % ne, d = i / (trials * ne);
    const ExperimentSpec spec = cell_spec(cfg, cfg.delta[d], cfg.eps_tr[e]);
    // the data depend on (seed, delta, trial) only: eps_tr cells share training sets
    const auto cell = static_cast<std::uint32_t>(d);
    const auto trial = static_cast<std::uint32_t>(k);
    const Dataset data = generate(spec, cfg.n, stream_seed(cfg.seed, cell, trial, 0), cfg.noise);
    Outcome& o = outcomes[i];
    TrainResult fit;
    try {
      fit = train(data, spec, cfg.trainer);
    } catch (const Diverged&) {
      o.diverged = true;
      return;
    }
    const Dataset test = generate_like(data, cfg.n_test, stream_seed(cfg.seed, cell, trial, 1));
    for (std::size_t t = 0; t < nt; ++t) {
      const ErrorReport rep = empirical_adv_error(fit.theta, test, spec.attack.q, cfg.eps_ts[t]);
      o.adv.push_back(rep.adv_error);
      o.std_err.push_back(rep.std_error);
    }
  });

  SweepResult out;
  out.spec_hash = spec_hash(cfg);
  out.rows.resize(nd * ne * nt);
  for (std::size_t d = 0; d < nd; ++d) {
    for (std::size_t e = 0; e < ne; ++e) {
      for (std::size_t t = 0; t < nt; ++t) {
        ResultRow r = blank_row(cfg, cfg.delta[d], cfg.eps_tr[e], cfg.eps_ts[t]);
        double sa = 0, sa2 = 0, ss = 0, ss2 = 0;
        int kept = 0;
        for (std::size_t k = 0; k < trials; ++k) {
          const Outcome& o = outcomes[(d * ne + e) * trials + k];
          if (o.diverged) {
            ++r.diverged;
            continue;
          }
          ++kept;
          sa += o.adv[t];
          sa2 += o.adv[t] * o.adv[t];
          ss += o.std_err[t];
          ss2 += o.std_err[t] * o.std_err[t];
        }
        r.trials = kept;
        if (kept > 0) {
          r.emp_adv_mean = sa / kept;
          r.emp_std_mean = ss / kept;
          auto stderr_of = [&](double s, double s2) {
            if (kept < 2) return 0.0;
            const double var = std::max(0.0, (s2 - s * s / kept) / (kept - 1));
            return std::sqrt(var / kept);
          };
          r.emp_adv_stderr = stderr_of(sa, sa2);
          r.emp_std_stderr = stderr_of(ss, ss2);
        }
        out.rows[row_index(cfg, d, e, t)] = r;
      }
    }
  }
  return out;
}

SweepResult run_bayes(const SweepConfig& cfg) {
  cfg.validate();
  if (cfg.base.model.kind != ModelKind::gmm) throw std::invalid_argument("bayes: only the GMM has a closed-form Bayes error");
  SweepResult out;
  out.spec_hash = spec_hash(cfg);
  for (double d : cfg.delta) {
    for (double e : cfg.eps_tr) {
      for (double t : cfg.eps_ts) out.rows.push_back(blank_row(cfg, d, e, t));
    }
  }
  return out;
}

SweepResult join(const SweepResult& theory, const SweepResult& empirical, CompareSummary& summary, double tolerance) {
  if (theory.spec_hash != empirical.spec_hash) {
    throw std::invalid_argument(fmt::format("compare: spec hashes differ ({:016x} vs {:016x})", theory.spec_hash,
                                            empirical.spec_hash));
  }
  if (theory.rows.size() != empirical.rows.size()) throw std::invalid_argument("compare: grids differ");
  summary = {};
  SweepResult out = theory;
  for (std::size_t i = 0; i < out.rows.size(); ++i) {
    ResultRow& r = out.rows[i];
    const ResultRow& m = empirical.rows[i];
    if (r.delta != m.delta || r.eps_tr != m.eps_tr || r.eps_ts != m.eps_ts) {
      throw std::invalid_argument("compare: grid cells differ");
    }
    r.emp_adv_mean = m.emp_adv_mean;
    r.emp_adv_stderr = m.emp_adv_stderr;
    r.emp_std_mean = m.emp_std_mean;
    r.emp_std_stderr = m.emp_std_stderr;
    r.trials = m.trials;
    r.diverged = m.diverged;
    const double ga = std::abs(r.theory_adv - r.emp_adv_mean);
    const double gs = std::abs(r.theory_std - r.emp_std_mean);
    ++summary.cells;
    // NaN gaps (every trial diverged) fail the comparisons below
    if (!(ga <= std::max(tolerance, 3 * r.emp_adv_stderr)) || !(gs <= std::max(tolerance, 3 * r.emp_std_stderr))) {
      ++summary.failures;
    }
    summary.max_adv_gap = std::isnan(ga) ? ga : std::max(summary.max_adv_gap, ga);
    summary.max_std_gap = std::isnan(gs) ? gs : std::max(summary.max_std_gap, gs);
  }
  return out;
}

SweepResult run_compare(const SweepConfig& cfg, CompareSummary& summary) {
  const SweepResult theory = run_theory(cfg);
  const SweepResult empirical = run_empirical(cfg);
  return join(theory, empirical, summary, cfg.tolerance);
}

std::string csv_header() {
  return "model,q,loss,delta,eps_tr,eps_ts,lambda,alpha_star,mu_star,w_star,theory_adv,theory_std,emp_adv_mean,"
         "emp_adv_stderr,emp_std_mean,emp_std_stderr,bayes_adv,trials,seed,solver_residual,solver_iters,diverged";
}

std::string csv_line(const ResultRow& r) {
  return fmt::format("{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}", r.model, r.q, r.loss,
                     field(r.delta), field(r.eps_tr), field(r.eps_ts), field(r.lambda), field(r.alpha), field(r.mu),
                     field(r.w), field(r.theory_adv), field(r.theory_std), field(r.emp_adv_mean),
                     field(r.emp_adv_stderr), field(r.emp_std_mean), field(r.emp_std_stderr), field(r.bayes_adv),
                     r.trials, r.seed, field(r.solver_residual), r.solver_iters, r.diverged);
}

void write_csv(std::ostream& out, const std::vector<ResultRow>& rows) {
  out << csv_header() << '\n';
  for (const auto& r : rows) out << csv_line(r) << '\n';
}

void write_csv(const std::string& path, const std::vector<ResultRow>& rows) {
  auto out = fmt::output_file(path);
  out.print("{}\n", csv_header());
  for (const auto& r : rows) out.print("{}\n", csv_line(r));
}

}  // namespace advasym
