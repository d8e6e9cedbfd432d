#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "advasym/erm_lab.hpp"
#include "advasym/theory_solver.hpp"

namespace advasym {

struct SweepConfig {
  ExperimentSpec base{};
  std::vector<double> delta{1.0};
  std::vector<double> eps_tr{0.0};
  std::vector<double> eps_ts{0.0};
  int trials = 20;
  int n = 200;
  int n_test = 3000;
  std::uint64_t seed = 1;
  int workers = 0;  // 0: one per hardware thread
  NoiseFamily noise = NoiseFamily::gaussian;
  double tolerance = 0.02;  // compare: |theory - empirical| <= max(tolerance, 3 stderr)
  TrainerOptions trainer{};
  SolverOptions solver{};
  std::string output;  // empty: stdout

  void validate() const;
};

// Flat key = value text, '#' comments, dotted keys, comma separated lists:
//
//   model.kind = gmm          model.link = sign      model.prior = 0.5
//   attack.q = inf            loss = hinge           train.ridge = 1e-4
//   sweep.delta = 1,2,4,8     sweep.eps_tr = 0,0.5   sweep.eps_ts = 0,0.5
//   sweep.trials = 20         sweep.n = 200          sweep.n_test = 3000
//   sweep.seed = 1            sweep.workers = 0      sweep.noise = gaussian
//   pi.kind = isotropic|product|atoms   pi.lambda = 1,4   pi.weight = 0.5,0.5   pi.file = path
//   train.method = newton|subgradient   train.s_factor   train.tol   train.step_c   train.max_epochs
//   solver.tol   solver.max_iter   solver.restarts   solver.restart_tol   solver.damping
//   compare.tolerance = 0.02  output.csv = out.csv
//
// Unknown keys are an error.
SweepConfig parse_config(std::istream& in, const std::string& origin = "<config>");
SweepConfig load_config(const std::string& path);

std::vector<double> parse_list(std::string_view text);

}  // namespace advasym
