#include <CLI11.hpp>
#include <fmt/core.h>

#include <iostream>
#include <optional>

#include "advasym/harness.hpp"

namespace {

struct Overrides {
  std::string config;
  std::string delta, eps_tr, eps_ts, out;
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
};

void add_common(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--config", o.config, "key = value config file");
  cmd->add_option("--delta", o.delta, "comma list, replaces sweep.delta");
  cmd->add_option("--eps-tr", o.eps_tr, "comma list, replaces sweep.eps_tr");
  cmd->add_option("--eps-ts", o.eps_ts, "comma list, replaces sweep.eps_ts");
  cmd->add_option("--seed", o.seed, "master seed");
  cmd->add_option("--workers", o.workers, "worker threads (0: all cores)");
  cmd->add_option("--out", o.out, "CSV path (default stdout)");
}

advasym::SweepConfig resolve(const Overrides& o) {
  advasym::SweepConfig c = o.config.empty() ? advasym::SweepConfig{} : advasym::load_config(o.config);
  if (!o.delta.empty()) c.delta = advasym::parse_list(o.delta);
  if (!o.eps_tr.empty()) c.eps_tr = advasym::parse_list(o.eps_tr);
  if (!o.eps_ts.empty()) c.eps_ts = advasym::parse_list(o.eps_ts);
  if (o.seed) c.seed = *o.seed;
  if (o.workers) c.workers = *o.workers;
  if (!o.out.empty()) c.output = o.out;
  c.validate();
  return c;
}

void emit(const advasym::SweepConfig& c, const advasym::SweepResult& r) {
  if (c.output.empty()) advasym::write_csv(std::cout, r.rows);
  else advasym::write_csv(c.output, r.rows);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Asymptotics of adversarially trained linear classifiers: theory, simulation, comparison"};
  app.require_subcommand(1);
  Overrides o;
  auto* theory = app.add_subcommand("theory", "solve the scalar saddle point over the grid");
  auto* simulate = app.add_subcommand("simulate", "train on synthetic data over the grid");
  auto* compare = app.add_subcommand("compare", "theory and simulation joined, with a tolerance check");
  auto* bayes = app.add_subcommand("bayes", "Bayes-optimal robust error over the grid (GMM)");
  for (auto* cmd : {theory, simulate, compare, bayes}) add_common(cmd, o);
  CLI11_PARSE(app, argc, argv);

  try {
    const advasym::SweepConfig cfg = resolve(o);
    if (theory->parsed()) {
      emit(cfg, advasym::run_theory(cfg));
    } else if (simulate->parsed()) {
      emit(cfg, advasym::run_empirical(cfg));
    } else if (bayes->parsed()) {
      emit(cfg, advasym::run_bayes(cfg));
    } else {
      advasym::CompareSummary s;
      emit(cfg, advasym::run_compare(cfg, s));
      fmt::print(stderr, "compare: {} cells, {} outside tolerance, max |adv gap| {:.4g}, max |std gap| {:.4g}: {}\n",
                 s.cells, s.failures, s.max_adv_gap, s.max_std_gap, s.pass() ? "pass" : "fail");
      if (!s.pass()) return 3;
    }
  } catch (const advasym::NonConvergence& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return 1;
  }
  return 0;
}
