#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "klmc/experiments.hpp"

namespace {

struct Overrides {
  std::optional<std::string> algorithm, target_name, dataset, mode;
  std::optional<double> gamma, h, steps_d, tau, theta0_norm;
  std::optional<long> steps, record_stride;
  std::optional<int> dim, n_chains, n_pairs, grid_points;
  std::optional<double> m, lipschitz, m2, epsilon, w2_init, t_max, h_fine;
  std::optional<std::vector<double>> lambdas, h_list;
};

klmc::json load_config(const std::string& path) {
  if (path.empty()) return klmc::json::object();
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read config file: " + path);
  return klmc::json::parse(in);
}

void apply_overrides(klmc::json& j, const Overrides& o) {
  auto set = [&](const char* section, const char* key, const auto& opt) {
    if (opt) j[section][key] = *opt;
  };
  set("sampler", "algorithm", o.algorithm);
  set("sampler", "gamma", o.gamma);
  set("sampler", "h", o.h);
  set("sampler", "steps", o.steps);
  set("sampler", "record_stride", o.record_stride);
  set("sampler", "theta0_norm", o.theta0_norm);
  set("target", "name", o.target_name);
  set("target", "dim", o.dim);
  set("target", "lambdas", o.lambdas);
  set("target", "dataset", o.dataset);
  set("target", "tau", o.tau);
  set("metrics", "n_chains", o.n_chains);
  set("tuning", "m", o.m);
  set("tuning", "M", o.lipschitz);
  set("tuning", "M2", o.m2);
  set("tuning", "p", o.dim);
  set("tuning", "epsilon", o.epsilon);
  set("tuning", "w2_init", o.w2_init);
  set("tuning", "grid_points", o.grid_points);
  set("contraction", "mode", o.mode);
  set("contraction", "t_max", o.t_max);
  set("contraction", "h_fine", o.h_fine);
  set("contraction", "n_pairs", o.n_pairs);
  set("order", "h_list", o.h_list);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Kinetic Langevin sampling toolkit"};
  app.require_subcommand(1);

  std::string config_path, out_prefix;
  std::optional<std::uint64_t> seed;
  int threads = 1;
  app.add_option("--config", config_path, "JSON configuration file");
  app.add_option("--seed", seed, "RNG seed (default: OS entropy, recorded in the report)");
  app.add_option("--out", out_prefix, "output directory prefix");
  app.add_option("--threads", threads, "worker threads for chain fan-out");

  Overrides o;
  auto add_common = [&](CLI::App* sub) {
    sub->fallthrough();
    sub->add_option("--algorithm", o.algorithm, "lmc|klmc|klmc2|exact_gaussian|fine_grid");
    sub->add_option("--gamma", o.gamma, "friction (default sqrt(m+M))");
    sub->add_option("--step", o.h, "step size");
    sub->add_option("--steps", o.steps, "iteration count");
    sub->add_option("--record-stride", o.record_stride, "snapshot thinning stride");
    sub->add_option("--chains", o.n_chains, "number of independent chains");
    sub->add_option("--target", o.target_name, "gaussian|diagonal_quadratic|logistic");
    sub->add_option("--dim", o.dim, "target dimension (gaussian)");
    sub->add_option("--lambdas", o.lambdas, "curvatures (diagonal_quadratic)");
    sub->add_option("--dataset", o.dataset, "CSV path (logistic)");
    sub->add_option("--tau", o.tau, "ridge strength (logistic)");
    sub->add_option("--theta0-norm", o.theta0_norm, "start at theta0_norm * e_1");
  };

  auto* sample = app.add_subcommand("sample", "run chains and dump trajectories");
  add_common(sample);
  auto* converge = app.add_subcommand("converge", "W2-to-target trace with error-bound overlay");
  add_common(converge);
  auto* order = app.add_subcommand("order", "stationary bias vs step size");
  add_common(order);
  order->add_option("--h-list", o.h_list, "step sizes to scan");
  auto* contraction = app.add_subcommand("contraction", "coupled-decay rate vs prediction");
  add_common(contraction);
  contraction->add_option("--mode", o.mode, "ode|stochastic");
  contraction->add_option("--tmax", o.t_max, "time horizon");
  contraction->add_option("--h-fine", o.h_fine, "fine integration step (stochastic)");
  contraction->add_option("--pairs", o.n_pairs, "coupled pairs (stochastic)");
  auto* tune = app.add_subcommand("tune", "closed-form step size and iteration budget");
  auto* regions = app.add_subcommand("regions", "LMC vs KLMC preference map");
  for (auto* sub : {tune, regions}) {
    sub->fallthrough();
    sub->add_option("--m", o.m, "strong convexity");
    sub->add_option("--M", o.lipschitz, "gradient Lipschitz constant");
    sub->add_option("--M2", o.m2, "Hessian Lipschitz constant");
    sub->add_option("--p", o.dim, "dimension");
    sub->add_option("--eps", o.epsilon, "target W2 accuracy (relative to sqrt(p/m))");
    sub->add_option("--w2-init", o.w2_init, "initial W2 distance");
  }
  regions->add_option("--grid-points", o.grid_points, "grid resolution per axis");

  CLI11_PARSE(app, argc, argv);

  try {
    klmc::json j = load_config(config_path);
    j["experiment"] = app.get_subcommands().front()->get_name();
    if (seed) j["seed"] = *seed;
    if (!out_prefix.empty()) j["out"] = out_prefix;
    if (threads > 1) j["threads"] = threads;
    apply_overrides(j, o);

    const klmc::ExperimentConfig cfg = klmc::parse_config(j);
    bool fatal = false;
    for (const auto& msg : klmc::validate(cfg)) {
      std::cerr << msg << "\n";
      fatal = fatal || msg.rfind("error:", 0) == 0;
    }
    if (fatal) return 2;

    const klmc::ExperimentResult result = klmc::run(cfg);
    for (const auto& f : result.files) std::cout << "wrote " << f.string() << "\n";
    if (result.report.contains("summary"))
      std::cout << result.report["summary"].dump(2) << "\n";
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
