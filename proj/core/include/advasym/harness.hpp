#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "advasym/config.hpp"

namespace advasym {

// One grid cell. Columns are written in field order.
struct ResultRow {
  std::string model;
  std::string q;
  std::string loss;
  double delta = kNaN;
  double eps_tr = kNaN;
  double eps_ts = kNaN;
  double lambda = kNaN;
  double alpha = kNaN;
  double mu = kNaN;
  double w = kNaN;
  double theory_adv = kNaN;
  double theory_std = kNaN;
  double emp_adv_mean = kNaN;
  double emp_adv_stderr = kNaN;
  double emp_std_mean = kNaN;
  double emp_std_stderr = kNaN;
  double bayes_adv = kNaN;  // GMM only
  int trials = 0;
  std::uint64_t seed = 0;
  double solver_residual = kNaN;
  int solver_iters = 0;
  int diverged = 0;  // trials excluded after Diverged
};

struct SweepResult {
  std::vector<ResultRow> rows;  // delta, then eps_tr, then eps_ts, in config order
  std::uint64_t spec_hash = 0;
};

// FNV-1a over the canonical text of everything that defines the experiment
// (not the output path or the worker count).
std::uint64_t spec_hash(const SweepConfig& cfg);

// Theory rows, warm-started along delta. Throws NonConvergence naming the cell.
SweepResult run_theory(const SweepConfig& cfg);
// Monte Carlo rows; per-trial streams come from (seed, trial), so results do
// not depend on the worker count.
SweepResult run_empirical(const SweepConfig& cfg);
SweepResult run_bayes(const SweepConfig& cfg);

struct CompareSummary {
  double max_adv_gap = 0;
  double max_std_gap = 0;
  int cells = 0;
  int failures = 0;
  bool pass() const { return failures == 0; }
};

// Joins the two sweeps cell by cell. Mismatched spec hashes or grids throw.
SweepResult join(const SweepResult& theory, const SweepResult& empirical, CompareSummary& summary, double tolerance);
SweepResult run_compare(const SweepConfig& cfg, CompareSummary& summary);

std::string csv_header();
std::string csv_line(const ResultRow& row);
void write_csv(std::ostream& out, const std::vector<ResultRow>& rows);
void write_csv(const std::string& path, const std::vector<ResultRow>& rows);

}  // namespace advasym
