#include "advasym/config.hpp"

#include <boost/program_options.hpp>

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <stdexcept>

namespace po = boost::program_options;

namespace advasym {

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

double parse_double(std::string_view s) {
  s = trim(s);
  double v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) throw std::invalid_argument("not a number: '" + std::string(s) + "'");
  return v;
}

TrainMethod parse_method(std::string_view s) {
  if (s == "newton" || s == "smoothed_newton") return TrainMethod::smoothed_newton;
  if (s == "subgradient") return TrainMethod::subgradient;
  throw std::invalid_argument("unknown train.method: " + std::string(s));
}

std::vector<std::pair<double, double>> zip(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size() || a.empty()) throw std::invalid_argument("pi.lambda and pi.weight need equal, non-empty lengths");
  std::vector<std::pair<double, double>> out;
  for (std::size_t i = 0; i < a.size(); ++i) out.emplace_back(a[i], b[i]);
  return out;
}

}  // namespace

std::vector<double> parse_list(std::string_view text) {
  std::vector<double> out;
  while (true) {
    const auto comma = text.find(',');
    out.push_back(parse_double(text.substr(0, comma)));
    if (comma == std::string_view::npos) break;
    text.remove_prefix(comma + 1);
  }
  return out;
}

void SweepConfig::validate() const {
  if (delta.empty() || eps_tr.empty() || eps_ts.empty()) throw std::invalid_argument("sweep axes must be non-empty");
  if (trials < 1) throw std::invalid_argument("sweep.trials must be positive");
  if (n < 2) throw std::invalid_argument("sweep.n must be at least 2");
  if (n_test < 1) throw std::invalid_argument("sweep.n_test must be positive");
  if (workers < 0) throw std::invalid_argument("sweep.workers must be non-negative");
  if (!(tolerance >= 0)) throw std::invalid_argument("compare.tolerance must be non-negative");
  for (double d : delta) {
    ExperimentSpec s = base;
    s.delta = d;
    for (double e : eps_tr) {
      s.attack.eps_tr = e;
      for (double t : eps_ts) {
        s.attack.eps_ts = t;
        s.validate();
      }
    }
  }
}

SweepConfig parse_config(std::istream& in, const std::string& origin) {
  po::options_description desc;
  const char* keys[] = {"model.kind", "model.link", "model.prior", "attack.q", "attack.eps_tr", "attack.eps_ts",
                        "loss", "train.ridge", "train.method", "train.s_factor", "train.s_end", "train.tol",
                        "train.newton_iters", "train.step_c", "train.max_epochs", "pi.kind", "pi.lambda",
                        "pi.weight", "pi.file", "sweep.delta", "sweep.eps_tr", "sweep.eps_ts", "sweep.trials",
                        "sweep.n", "sweep.n_test", "sweep.seed", "sweep.workers", "sweep.noise", "solver.tol",
                        "solver.step_tol", "solver.max_iter", "solver.restarts", "solver.restart_tol",
                        "solver.damping", "compare.tolerance", "output.csv"};
  for (const char* k : keys) desc.add_options()(k, po::value<std::string>());
  po::variables_map vm;
  try {
    po::store(po::parse_config_file(in, desc, false), vm);
  } catch (const po::error& e) {
    throw std::invalid_argument(origin + ": " + e.what());
  }
  auto has = [&](const char* k) { return vm.count(k) > 0; };
  auto str = [&](const char* k) { return std::string(trim(vm[k].as<std::string>())); };
  auto num = [&](const char* k) { return parse_double(str(k)); };
  auto integer = [&](const char* k) {
    const double v = num(k);
    if (v != std::floor(v) || std::abs(v) > 2e9) throw std::invalid_argument(std::string(k) + " must be an integer");
    return static_cast<int>(v);
  };

  SweepConfig c;
  try {
    auto& s = c.base;
    if (has("model.kind")) s.model.kind = parse_model(str("model.kind"));
    if (has("model.link")) s.model.link.kind = parse_link(str("model.link"));
    if (has("model.prior")) s.model.prior = num("model.prior");
    if (has("attack.q")) s.attack.q = parse_attack_norm(str("attack.q"));
    if (has("loss")) s.loss = parse_loss(str("loss"));
    if (has("train.ridge")) s.ridge = num("train.ridge");

    const std::string pk = has("pi.kind") ? str("pi.kind") : "isotropic";
    if (pk == "product") {
      s.pi_dist = SpectralJointDistribution::product_normal(zip(parse_list(str("pi.lambda")), parse_list(str("pi.weight"))));
    } else if (pk == "atoms") {
      if (!has("pi.file")) throw std::invalid_argument("pi.kind = atoms needs pi.file");
      s.pi_dist = SpectralJointDistribution::load_atoms(str("pi.file"));
    } else if (pk != "isotropic") {
      throw std::invalid_argument("unknown pi.kind: " + pk);
    }
    s = s.with_derived_zeta();

    // scalar attack budgets are one-point axes
    if (has("attack.eps_tr")) c.eps_tr = {num("attack.eps_tr")};
    if (has("attack.eps_ts")) c.eps_ts = {num("attack.eps_ts")};
    if (has("sweep.delta")) c.delta = parse_list(str("sweep.delta"));
    if (has("sweep.eps_tr")) c.eps_tr = parse_list(str("sweep.eps_tr"));
    if (has("sweep.eps_ts")) c.eps_ts = parse_list(str("sweep.eps_ts"));
    if (has("sweep.trials")) c.trials = integer("sweep.trials");
    if (has("sweep.n")) c.n = integer("sweep.n");
    if (has("sweep.n_test")) c.n_test = integer("sweep.n_test");
    if (has("sweep.seed")) {
      const double v = num("sweep.seed");
      if (v < 0 || v != std::floor(v)) throw std::invalid_argument("sweep.seed must be a non-negative integer");
      c.seed = static_cast<std::uint64_t>(v);
    }
    if (has("sweep.workers")) c.workers = integer("sweep.workers");
    if (has("sweep.noise")) c.noise = parse_noise(str("sweep.noise"));

    if (has("train.method")) c.trainer.method = parse_method(str("train.method"));
    if (has("train.s_factor")) c.trainer.s_factor = num("train.s_factor");
    if (has("train.s_end")) c.trainer.s_end = num("train.s_end");
    if (has("train.tol")) c.trainer.tol = num("train.tol");
    if (has("train.newton_iters")) c.trainer.newton_iters = integer("train.newton_iters");
    if (has("train.step_c")) c.trainer.step_c = num("train.step_c");
    if (has("train.max_epochs")) c.trainer.max_epochs = integer("train.max_epochs");

    if (has("solver.tol")) c.solver.tol = num("solver.tol");
    if (has("solver.step_tol")) c.solver.step_tol = num("solver.step_tol");
    if (has("solver.max_iter")) c.solver.max_iter = integer("solver.max_iter");
    if (has("solver.restarts")) c.solver.restarts = integer("solver.restarts");
    if (has("solver.restart_tol")) c.solver.restart_tol = num("solver.restart_tol");
    if (has("solver.damping")) c.solver.damping = num("solver.damping");

    if (has("compare.tolerance")) c.tolerance = num("compare.tolerance");
    if (has("output.csv")) c.output = str("output.csv");
  } catch (const std::invalid_argument& e) {
    throw std::invalid_argument(origin + ": " + e.what());
  }
  return c;
}

SweepConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open config " + path);
  return parse_config(in, path);
}

}  // namespace advasym
