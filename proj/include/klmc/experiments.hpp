#pragma once

#include <atomic>
#include <cinttypes>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "klmc/coupling.hpp"
#include "klmc/lyapunov.hpp"
#include "klmc/metrics.hpp"
#include "klmc/sampler.hpp"
#include "klmc/target.hpp"
#include "klmc/tuning.hpp"

namespace klmc {

using nlohmann::json;

struct ExperimentConfig {
  std::string experiment = "sample";

  // target
  std::string target_name = "gaussian";  // gaussian | diagonal_quadratic | logistic
  int dim = 2;
  std::vector<double> lambdas;           // diagonal_quadratic
  std::string dataset;                   // logistic CSV path
  double tau = 1.0;

  // sampler
  Algorithm algorithm = Algorithm::KLMC;
  double gamma = 0.0;  // 0 -> sqrt(m+M)
  double u = 1.0;
  double h = 0.01;
  long steps = 1000;
  long record_stride = 1;
  double substep = 1e-3;
  std::vector<double> theta0;
  double theta0_norm = 0.0;  // theta0 = norm * e_1 when theta0 not given
  int n_chains = 1;

  // tuning inputs (tune / regions)
  double m = 1.0, lipschitz = 1.0, m2 = 0.0;
  double epsilon = 0.1;
  double w2_init = 10.0;
  int grid_points = 41;

  // contraction
  std::string mode = "ode";  // ode | stochastic
  double t_max = 0.0;        // 0 -> 20 / beta_predicted
  double h_fine = 1e-3;
  int n_pairs = 16;

  // order
  std::vector<double> h_list = {0.2, 0.1, 0.05, 0.025};

  std::optional<std::uint64_t> seed;
  std::string out_prefix = "out";
  int threads = 1;

  json echo;  // raw configuration as parsed, for the report
};

inline Algorithm parse_algorithm(const std::string& s) {
  if (s == "lmc") return Algorithm::LMC;
  if (s == "klmc") return Algorithm::KLMC;
  if (s == "klmc2") return Algorithm::KLMC2;
  if (s == "exact_gaussian") return Algorithm::EXACT_GAUSSIAN;
  if (s == "fine_grid") return Algorithm::FINE_GRID;
  throw std::invalid_argument("unknown algorithm: " + s);
}

inline ExperimentConfig parse_config(const json& j) {
  ExperimentConfig c;
  c.echo = j;
  if (j.contains("experiment")) c.experiment = j.at("experiment").get<std::string>();
  if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("out")) c.out_prefix = j.at("out").get<std::string>();
  if (j.contains("threads")) c.threads = j.at("threads").get<int>();
  if (j.contains("target")) {
    const json& t = j.at("target");
    if (t.contains("name")) c.target_name = t.at("name").get<std::string>();
    if (t.contains("dim")) c.dim = t.at("dim").get<int>();
    if (t.contains("lambdas")) c.lambdas = t.at("lambdas").get<std::vector<double>>();
    if (t.contains("dataset")) c.dataset = t.at("dataset").get<std::string>();
    if (t.contains("tau")) c.tau = t.at("tau").get<double>();
  }
  if (j.contains("sampler")) {
    const json& s = j.at("sampler");
    if (s.contains("algorithm")) c.algorithm = parse_algorithm(s.at("algorithm").get<std::string>());
    if (s.contains("gamma")) c.gamma = s.at("gamma").get<double>();
    if (s.contains("u")) c.u = s.at("u").get<double>();
    if (s.contains("h")) c.h = s.at("h").get<double>();
    if (s.contains("steps")) c.steps = s.at("steps").get<long>();
    if (s.contains("record_stride")) c.record_stride = s.at("record_stride").get<long>();
    if (s.contains("substep")) c.substep = s.at("substep").get<double>();
    if (s.contains("theta0")) c.theta0 = s.at("theta0").get<std::vector<double>>();
    if (s.contains("theta0_norm")) c.theta0_norm = s.at("theta0_norm").get<double>();
  }
  if (j.contains("metrics")) {
    const json& m = j.at("metrics");
    if (m.contains("n_chains")) c.n_chains = m.at("n_chains").get<int>();
  }
  if (j.contains("tuning")) {
    const json& t = j.at("tuning");
    if (t.contains("m")) c.m = t.at("m").get<double>();
    if (t.contains("M")) c.lipschitz = t.at("M").get<double>();
    if (t.contains("M2")) c.m2 = t.at("M2").get<double>();
    if (t.contains("p")) c.dim = t.at("p").get<int>();
    if (t.contains("epsilon")) c.epsilon = t.at("epsilon").get<double>();
    if (t.contains("w2_init")) c.w2_init = t.at("w2_init").get<double>();
    if (t.contains("grid_points")) c.grid_points = t.at("grid_points").get<int>();
  }
  if (j.contains("contraction")) {
    const json& t = j.at("contraction");
    if (t.contains("mode")) c.mode = t.at("mode").get<std::string>();
    if (t.contains("t_max")) c.t_max = t.at("t_max").get<double>();
    if (t.contains("h_fine")) c.h_fine = t.at("h_fine").get<double>();
    if (t.contains("n_pairs")) c.n_pairs = t.at("n_pairs").get<int>();
  }
  if (j.contains("order")) {
    const json& t = j.at("order");
    if (t.contains("h_list")) c.h_list = t.at("h_list").get<std::vector<double>>();
  }
  return c;
}

inline std::unique_ptr<TargetModel> build_target(const ExperimentConfig& c) {
  if (c.target_name == "gaussian") {
    return std::make_unique<DiagonalQuadraticTarget>(
        DiagonalQuadraticTarget::standard_gaussian(c.dim));
  }
  if (c.target_name == "diagonal_quadratic") {
    Eigen::VectorXd l(static_cast<Eigen::Index>(c.lambdas.size()));
    for (std::size_t i = 0; i < c.lambdas.size(); ++i) l(static_cast<Eigen::Index>(i)) = c.lambdas[i];
    return std::make_unique<DiagonalQuadraticTarget>(std::move(l));
  }
  if (c.target_name == "logistic")
    return std::make_unique<LogisticRegressionTarget>(load_logistic_csv(c.dataset, c.tau));
  throw std::invalid_argument("unknown target: " + c.target_name);
}

/// Errors make the config unrunnable; entries prefixed "warning:" flag
/// violated error-bound hypotheses but do not block the run. Never mutates the
/// config; empty result means runnable without caveats.
inline std::vector<std::string> validate(const ExperimentConfig& c) {
  std::vector<std::string> out;
  static const std::vector<std::string> known = {"sample", "converge", "order",
                                                 "contraction", "tune", "regions"};
  bool ok = false;
  for (const auto& k : known) ok = ok || k == c.experiment;
  if (!ok) out.push_back("error: unknown experiment '" + c.experiment + "'");
  if (c.target_name == "logistic" && !std::filesystem::exists(c.dataset))
    out.push_back("error: dataset path does not exist: " + c.dataset);
  if (c.target_name == "diagonal_quadratic" && c.lambdas.empty())
    out.push_back("error: diagonal_quadratic target needs lambdas");
  if (!(c.h > 0.0)) out.push_back("error: h must be positive");
  if (c.steps < 0) out.push_back("error: steps must be >= 0");
  if (c.n_chains < 1) out.push_back("error: n_chains must be >= 1");

  if (out.empty() && (c.experiment == "sample" || c.experiment == "converge")) {
    try {
      auto model = build_target(c);
      SamplerConfig sc;
      sc.algorithm = c.algorithm;
      sc.gamma = c.gamma > 0.0 ? c.gamma
                               : optimal_gamma(model->strong_convexity(), model->grad_lipschitz());
      sc.u = c.u;
      sc.h = c.h;
      for (const auto& w : sampler_warnings(sc, *model)) out.push_back("warning: " + w);
    } catch (const std::exception& e) {
      out.push_back(std::string("error: ") + e.what());
    }
  }
  return out;
}

namespace detail {

inline std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header)
      : out_(path) {
    if (!out_) throw std::runtime_error("cannot open for writing: " + path.string());
    for (std::size_t i = 0; i < header.size(); ++i)
      out_ << (i ? "," : "") << header[i];
    out_ << "\n";
  }

  void row(const std::vector<double>& values) {
    for (std::size_t i = 0; i < values.size(); ++i)
      out_ << (i ? "," : "") << fmt_double(values[i]);
    out_ << "\n";
  }

  void raw_row(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i)
      out_ << (i ? "," : "") << cells[i];
    out_ << "\n";
  }

 private:
  std::ofstream out_;
};

/// Parallel map over chain indices with a deterministic result order.
template <class F>
void for_each_chain(int n_chains, int threads, F&& body) {
  if (threads <= 1) {
    for (int c = 0; c < n_chains; ++c) body(c);
    return;
  }
  std::vector<std::thread> pool;
  std::atomic<int> next{0};
  const int workers = std::min(threads, n_chains);
  for (int w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (int c = next.fetch_add(1); c < n_chains; c = next.fetch_add(1)) body(c);
    });
  for (auto& t : pool) t.join();
}

inline double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  const double n = static_cast<double>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double lx = std::log(x[i]);
    const double ly = std::log(y[i]);
    sx += lx; sy += ly; sxx += lx * lx; sxy += lx * ly;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

}  // namespace detail

struct ExperimentResult {
  json report;
  std::vector<std::filesystem::path> files;
};

/// Executes the experiment, writes <prefix>/report.json and the per-experiment
/// CSV traces. Throws before touching the filesystem if validation errors.
inline ExperimentResult run(const ExperimentConfig& cfg) {
  for (const auto& msg : validate(cfg))
    if (msg.rfind("error:", 0) == 0) throw std::invalid_argument(msg);

  ExperimentConfig c = cfg;  // resolved copy (seed, gamma defaults)
  if (!c.seed) c.seed = std::random_device{}();

  const std::filesystem::path prefix(c.out_prefix);
  std::filesystem::create_directories(prefix);

  ExperimentResult result;
  json& report = result.report;
  report["config"] = c.echo;
  report["seed"] = *c.seed;
  report["experiment"] = c.experiment;
  {
    char run_id[32];
    std::snprintf(run_id, sizeof run_id, "%016" PRIx64,
                  splitmix64(*c.seed ^ std::hash<std::string>{}(c.echo.dump())));
    report["run_id"] = run_id;
  }
  json warn = json::array();
  for (const auto& msg : validate(cfg)) warn.push_back(msg);
  report["warnings"] = warn;

  auto resolve_theta0 = [&](const TargetModel& model) {
    Eigen::VectorXd theta0;
    if (!c.theta0.empty()) {
      theta0.resize(static_cast<Eigen::Index>(c.theta0.size()));
      for (std::size_t i = 0; i < c.theta0.size(); ++i)
        theta0(static_cast<Eigen::Index>(i)) = c.theta0[i];
    } else if (c.theta0_norm != 0.0) {
      theta0 = Eigen::VectorXd::Zero(model.dim());
      theta0(0) = c.theta0_norm;
    }
    return theta0;
  };
  auto resolve_gamma = [&](const TargetModel& model) {
    return c.gamma > 0.0 ? c.gamma
                         : optimal_gamma(model.strong_convexity(), model.grad_lipschitz());
  };

  if (c.experiment == "sample") {
    auto model = build_target(c);
    const double gamma = resolve_gamma(*model);
    const Eigen::VectorXd theta0 = resolve_theta0(*model);
    MomentAccumulator merged;
    std::vector<MomentAccumulator> per_chain(static_cast<std::size_t>(c.n_chains));
    std::vector<Trajectory> trajs(static_cast<std::size_t>(c.n_chains));
    detail::for_each_chain(c.n_chains, c.threads, [&](int chain) {
      SamplerConfig sc;
      sc.algorithm = c.algorithm;
      sc.gamma = gamma;
      sc.u = c.u;
      sc.h = c.h;
      sc.steps = c.steps;
      sc.seed = *c.seed;
      sc.stream = static_cast<std::uint64_t>(chain);
      sc.theta0 = theta0;
      sc.record_stride = c.record_stride;
      sc.substep = c.substep;
      trajs[static_cast<std::size_t>(chain)] = run_chain(sc, *model);
      auto& acc = per_chain[static_cast<std::size_t>(chain)];
      for (const auto& s : trajs[static_cast<std::size_t>(chain)].states) acc.add(s.theta);
    });
    for (const auto& acc : per_chain) merged.merge(acc);
    const Eigen::Index p = model->dim();
    for (int chain = 0; chain < c.n_chains; ++chain) {
      std::vector<std::string> header = {"step"};
      for (Eigen::Index i = 0; i < p; ++i) header.push_back("theta_" + std::to_string(i + 1));
      for (Eigen::Index i = 0; i < p; ++i) header.push_back("v_" + std::to_string(i + 1));
      const auto path = prefix / ("trajectory_" + std::to_string(chain) + ".csv");
      detail::CsvWriter csv(path, header);
      const auto& traj = trajs[static_cast<std::size_t>(chain)];
      for (std::size_t s = 0; s < traj.states.size(); ++s) {
        std::vector<double> row = {static_cast<double>(traj.step_index[s])};
        for (Eigen::Index i = 0; i < p; ++i) row.push_back(traj.states[s].theta(i));
        for (Eigen::Index i = 0; i < p; ++i) row.push_back(traj.states[s].v(i));
        csv.row(row);
      }
      result.files.push_back(path);
    }
    json summary;
    summary["n_snapshots"] = merged.count();
    summary["mean"] = std::vector<double>(merged.mean().data(), merged.mean().data() + p);
    const Eigen::MatrixXd cov = merged.covariance();
    summary["cov_diag"] = [&] {
      std::vector<double> d(static_cast<std::size_t>(p));
      for (Eigen::Index i = 0; i < p; ++i) d[static_cast<std::size_t>(i)] = cov(i, i);
      return d;
    }();
    report["summary"] = summary;
  } else if (c.experiment == "converge") {
    auto model_base = build_target(c);
    const auto* quad = dynamic_cast<const DiagonalQuadraticTarget*>(model_base.get());
    if (quad == nullptr)
      throw std::invalid_argument("converge experiment needs a (diagonal) quadratic target");
    const double gamma = resolve_gamma(*quad);
    const Eigen::VectorXd theta0 = resolve_theta0(*quad);
    Eigen::VectorXd t0 = theta0.size() ? theta0 : Eigen::VectorXd::Zero(quad->dim());

    std::vector<Trajectory> trajs(static_cast<std::size_t>(c.n_chains));
    detail::for_each_chain(c.n_chains, c.threads, [&](int chain) {
      SamplerConfig sc;
      sc.algorithm = c.algorithm;
      sc.gamma = gamma;
      sc.h = c.h;
      sc.steps = c.steps;
      sc.seed = *c.seed;
      sc.stream = static_cast<std::uint64_t>(chain);
      sc.theta0 = t0;
      sc.record_stride = c.record_stride;
      trajs[static_cast<std::size_t>(chain)] = run_chain(sc, *quad);
    });

    // W2(nu_0, pi) for the point-mass start
    GaussianSummary init_summary;
    init_summary.mean = t0;
    init_summary.cov = Eigen::MatrixXd::Zero(quad->dim(), quad->dim());
    const double w2_init = gaussian_w2(init_summary, target_gaussian_summary(*quad));
    const ConvexityConstants cc = constants(*quad);

    const KernelCoefficients kc = make_kernel_coefficients(gamma, c.h);
    const std::size_t n_rec = trajs.front().step_index.size();
    const auto path = prefix / "trace.csv";
    detail::CsvWriter csv(path, {"k", "w2_plugin", "w2_se", "bound_total", "bound_transient",
                                 "bound_bias", "w2_oracle"});
    double terminal_w2 = 0.0, terminal_se = 0.0;
    for (std::size_t s = 0; s < n_rec; ++s) {
      const long k = trajs.front().step_index[s];
      // plug-in law at step k: pool each chain's snapshots over the trailing
      // window (k/2, k], so the estimator noise shrinks as the chain settles
      std::vector<MomentAccumulator> per_chain(static_cast<std::size_t>(c.n_chains));
      for (int chain = 0; chain < c.n_chains; ++chain)
        for (std::size_t r = 0; r <= s; ++r)
          if (2 * trajs.front().step_index[r] > k || r == s)
            per_chain[static_cast<std::size_t>(chain)].add(
                trajs[static_cast<std::size_t>(chain)].states[r].theta);
      const PluginW2Estimate est = plugin_w2_with_se(per_chain, *quad);
      const BoundValue b = klmc_w2_bound(k, c.h, gamma, cc.m, cc.lipschitz, quad->dim(), w2_init);
      const double oracle =
          c.algorithm == Algorithm::KLMC || c.algorithm == Algorithm::KLMC2
              ? transient_w2(c.algorithm, quad->lambdas(), kc, t0, k)
              : std::numeric_limits<double>::quiet_NaN();
      csv.row({static_cast<double>(k), est.w2, est.jackknife_se, b.total(), b.transient,
               b.bias, oracle});
      terminal_w2 = est.w2;
      terminal_se = est.jackknife_se;
    }
    result.files.push_back(path);
    json summary;
    summary["w2_init"] = w2_init;
    summary["terminal_w2"] = terminal_w2;
    summary["terminal_se"] = terminal_se;
    if (c.algorithm == Algorithm::KLMC || c.algorithm == Algorithm::KLMC2)
      summary["stationary_bias_oracle"] = stationary_w2_bias(c.algorithm, quad->lambdas(), kc);
    summary["bound_floor"] = cc.lipschitz * c.h * std::sqrt(2.0 * quad->dim()) / cc.m;
    report["summary"] = summary;
  } else if (c.experiment == "order") {
    auto model_base = build_target(c);
    const auto* quad = dynamic_cast<const DiagonalQuadraticTarget*>(model_base.get());
    if (quad == nullptr)
      throw std::invalid_argument("order experiment needs a (diagonal) quadratic target");
    const double gamma = resolve_gamma(*quad);
    const ConvexityConstants cc = constants(*quad);
    const double pd = static_cast<double>(quad->dim());
    const auto path = prefix / "order.csv";
    detail::CsvWriter csv(path, {"h", "bias_klmc", "bound_klmc", "bias_klmc2", "bound_klmc2"});
    std::vector<double> hs, b1, b2;
    for (double h : c.h_list) {
      const KernelCoefficients kc = make_kernel_coefficients(gamma, h);
      const double bias_klmc = stationary_w2_bias(Algorithm::KLMC, quad->lambdas(), kc);
      const double bias_klmc2 = stationary_w2_bias(Algorithm::KLMC2, quad->lambdas(), kc);
      csv.row({h, bias_klmc, cc.lipschitz * h * std::sqrt(2.0 * pd) / cc.m, bias_klmc2,
               h * h * cc.lipschitz * std::sqrt(2.0 * cc.lipschitz * pd) / cc.m});
      hs.push_back(h);
      b1.push_back(bias_klmc);
      b2.push_back(bias_klmc2);
    }
    result.files.push_back(path);
    json summary;
    summary["slope_klmc"] = detail::loglog_slope(hs, b1);
    summary["slope_klmc2"] = detail::loglog_slope(hs, b2);
    report["summary"] = summary;
  } else if (c.experiment == "contraction") {
    auto model = build_target(c);
    const ConvexityConstants cc = constants(*model);
    const double gamma = resolve_gamma(*model);
    const ContractionPrediction pred = predicted_rate(gamma, cc.m, cc.lipschitz);
    const double t_max = c.t_max > 0.0 ? c.t_max : 20.0 / pred.beta;
    DecayTrace trace;
    DecayFit fit;
    if (c.mode == "ode") {
      const auto* quad = dynamic_cast<const DiagonalQuadraticTarget*>(model.get());
      if (quad == nullptr)
        throw std::invalid_argument("contraction mode 'ode' needs a quadratic target");
      fit = difference_ode_rate(quad->lambdas(), gamma, t_max, &trace);
    } else if (c.mode == "stochastic") {
      Eigen::VectorXd offset = Eigen::VectorXd::Zero(model->dim());
      offset(0) = 1.0;
      fit = coupled_stochastic_rate(*model, gamma, c.h_fine, t_max, c.n_pairs,
                                    NoiseStream(*c.seed, 0), offset, &trace);
    } else {
      throw std::invalid_argument("unknown contraction mode: " + c.mode);
    }
    const auto path = prefix / "decay.csv";
    detail::CsvWriter csv(path, {"t", "mean_sq_distance", "log_distance"});
    for (std::size_t i = 0; i < trace.t.size(); ++i)
      csv.row({trace.t[i], trace.mean_sq_distance[i], trace.log_distance[i]});
    result.files.push_back(path);
    json summary;
    summary["gamma"] = gamma;
    summary["m"] = cc.m;
    summary["M"] = cc.lipschitz;
    summary["beta_predicted"] = pred.beta;
    summary["beta_measured"] = fit.rate;
    summary["residual"] = fit.residual;
    if (fit.se > 0.0) summary["rate_se"] = fit.se;
    report["summary"] = summary;
  } else if (c.experiment == "tune") {
    json summary;
    summary["h_klmc"] = klmc_step_size(c.m, c.lipschitz, c.dim, c.epsilon);
    summary["k_klmc"] = klmc_iterations(c.m, c.lipschitz, c.dim, c.epsilon, c.w2_init);
    summary["k_klmc_simplified"] =
        klmc_iterations_simplified(c.m, c.lipschitz, c.dim, c.epsilon, c.w2_init);
    summary["k_lmc"] = lmc_iterations(c.m, c.dim, c.epsilon, c.lipschitz / c.m, c.w2_init);
    summary["gamma_opt"] = optimal_gamma(c.m, c.lipschitz);
    summary["h_cap_klmc2"] = klmc2_step_cap(c.m, c.lipschitz, c.m2, c.dim,
                                            optimal_gamma(c.m, c.lipschitz));
    report["summary"] = summary;
  } else if (c.experiment == "regions") {
    const auto path = prefix / "regions.csv";
    detail::CsvWriter csv(path, {"log10_scale", "log10_kappa", "K_lmc", "K_klmc", "winner"});
    const int n = c.grid_points;
    int lmc_cells = 0;
    for (int i = 0; i < n; ++i) {
      const double log10_scale = 8.0 * i / (n - 1);
      for (int j = 0; j < n; ++j) {
        const double log10_kappa = 4.0 * j / (n - 1);
        const RegimeDecision d = regime_classify(std::pow(10.0, log10_kappa),
                                                 std::pow(10.0, log10_scale), c.w2_init / c.epsilon);
        csv.raw_row({detail::fmt_double(log10_scale), detail::fmt_double(log10_kappa),
                     detail::fmt_double(d.k_lmc), detail::fmt_double(d.k_klmc),
                     d.winner == Winner::LMC ? "lmc" : "klmc"});
        if (d.winner == Winner::LMC) ++lmc_cells;
      }
    }
    result.files.push_back(path);
    json summary;
    summary["grid_points"] = n;
    summary["lmc_cells"] = lmc_cells;
    report["summary"] = summary;
  }

  {
    const auto report_path = prefix / "report.json";
    std::ofstream out(report_path);
    out << report.dump(2) << "\n";
    result.files.push_back(report_path);
  }
  return result;
}

}  // namespace klmc
