#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "klmc/experiments.hpp"

namespace {

namespace fs = std::filesystem;

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  REQUIRE(in);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("klmc_exp_" + name);
  fs::remove_all(dir);
  return dir;
}

}  // namespace

TEST_CASE("tune experiment writes a report with the closed-form recipe") {
  const fs::path dir = fresh_dir("tune");
  klmc::json j = {{"experiment", "tune"},
                  {"seed", 1},
                  {"out", dir.string()},
                  {"tuning", {{"m", 1.0}, {"M", 4.0}, {"p", 2}, {"epsilon", 0.1}}}};
  const auto result = klmc::run(klmc::parse_config(j));
  CHECK(fs::exists(dir / "report.json"));
  const klmc::json report = klmc::json::parse(slurp(dir / "report.json"));
  CHECK(report["summary"]["h_klmc"].get<double>() == doctest::Approx(0.011750));
  CHECK(report["summary"]["gamma_opt"].get<double>() == doctest::Approx(std::sqrt(5.0)));
  CHECK(report["seed"] == 1);
  fs::remove_all(dir);
}

TEST_CASE("invalid config fails before any file is written") {
  const fs::path dir = fresh_dir("invalid");
  klmc::json j = {{"experiment", "no_such_thing"}, {"out", dir.string()}};
  CHECK_THROWS_AS(klmc::run(klmc::parse_config(j)), std::invalid_argument);
  CHECK_FALSE(fs::exists(dir));

  klmc::json j2 = {{"experiment", "sample"},
                   {"out", dir.string()},
                   {"sampler", {{"h", -1.0}}}};
  CHECK_THROWS_AS(klmc::run(klmc::parse_config(j2)), std::invalid_argument);
  CHECK_FALSE(fs::exists(dir));
}

TEST_CASE("validate surfaces hypothesis violations as warnings") {
  klmc::json j = {{"experiment", "sample"},
                  {"target", {{"name", "gaussian"}, {"dim", 2}}},
                  {"sampler", {{"algorithm", "klmc"}, {"gamma", 0.5}, {"h", 2.0}}}};
  const auto msgs = klmc::validate(klmc::parse_config(j));
  REQUIRE(msgs.size() == 2);
  for (const auto& m : msgs) CHECK(m.rfind("warning:", 0) == 0);
  CHECK(msgs[0].find("gamma below sqrt(m+M)") != std::string::npos);
  CHECK(msgs[1].find("h exceeds") != std::string::npos);
}

TEST_CASE("sample experiment is deterministic given a seed") {
  auto run_once = [](const fs::path& dir) {
    klmc::json j = {{"experiment", "sample"},
                    {"seed", 99},
                    {"out", dir.string()},
                    {"target", {{"name", "gaussian"}, {"dim", 2}}},
                    {"sampler",
                     {{"algorithm", "klmc"}, {"gamma", 2.0}, {"h", 0.05}, {"steps", 200}}},
                    {"metrics", {{"n_chains", 3}}}};
    return klmc::run(klmc::parse_config(j));
  };
  const fs::path d1 = fresh_dir("det1"), d2 = fresh_dir("det2");
  run_once(d1);
  run_once(d2);
  for (int c = 0; c < 3; ++c) {
    const std::string name = "trajectory_" + std::to_string(c) + ".csv";
    const std::string body1 = slurp(d1 / name);
    CHECK(body1 == slurp(d2 / name));
    CHECK(body1.rfind("step,theta_1,theta_2,v_1,v_2\n", 0) == 0);
    CHECK(std::count(body1.begin(), body1.end(), '\n') == 202);  // header + 0..200
  }
  fs::remove_all(d1);
  fs::remove_all(d2);
}

TEST_CASE("threaded fan-out matches the sequential result exactly") {
  auto run_with = [](const fs::path& dir, int threads) {
    klmc::json j = {{"experiment", "sample"},
                    {"seed", 7},
                    {"out", dir.string()},
                    {"threads", threads},
                    {"target", {{"name", "gaussian"}, {"dim", 2}}},
                    {"sampler",
                     {{"algorithm", "klmc"}, {"gamma", 2.0}, {"h", 0.05}, {"steps", 100}}},
                    {"metrics", {{"n_chains", 4}}}};
    return klmc::run(klmc::parse_config(j));
  };
  const fs::path d1 = fresh_dir("seq"), d2 = fresh_dir("par");
  run_with(d1, 1);
  run_with(d2, 4);
  for (int c = 0; c < 4; ++c) {
    const std::string name = "trajectory_" + std::to_string(c) + ".csv";
    CHECK(slurp(d1 / name) == slurp(d2 / name));
  }
  fs::remove_all(d1);
  fs::remove_all(d2);
}

TEST_CASE("converge experiment emits the trace with bound columns") {
  const fs::path dir = fresh_dir("conv");
  klmc::json j = {{"experiment", "converge"},
                  {"seed", 3},
                  {"out", dir.string()},
                  {"target", {{"name", "gaussian"}, {"dim", 2}}},
                  {"sampler",
                   {{"algorithm", "klmc"},
                    {"h", 0.05},
                    {"steps", 200},
                    {"record_stride", 50},
                    {"theta0_norm", 3.0}}},
                  {"metrics", {{"n_chains", 8}}}};
  const auto result = klmc::run(klmc::parse_config(j));
  const std::string body = slurp(dir / "trace.csv");
  CHECK(body.rfind("k,w2_plugin,w2_se,bound_total,bound_transient,bound_bias,w2_oracle\n", 0) ==
        0);
  const klmc::json report = klmc::json::parse(slurp(dir / "report.json"));
  CHECK(report["summary"]["w2_init"].get<double>() ==
        doctest::Approx(std::sqrt(9.0 + 2.0)));
  CHECK(report["summary"].contains("stationary_bias_oracle"));
  fs::remove_all(dir);
}

TEST_CASE("order experiment reports the discretization slopes") {
  const fs::path dir = fresh_dir("order");
  klmc::json j = {{"experiment", "order"},
                  {"seed", 3},
                  {"out", dir.string()},
                  {"target", {{"name", "gaussian"}, {"dim", 2}}}};
  const auto result = klmc::run(klmc::parse_config(j));
  const klmc::json report = klmc::json::parse(slurp(dir / "report.json"));
  CHECK(report["summary"]["slope_klmc"].get<double>() > 0.9);
  CHECK(report["summary"]["slope_klmc2"].get<double>() > 1.8);
  const std::string body = slurp(dir / "order.csv");
  CHECK(body.rfind("h,bias_klmc,bound_klmc,bias_klmc2,bound_klmc2\n", 0) == 0);
  fs::remove_all(dir);
}

TEST_CASE("contraction experiment reports predicted and measured rates") {
  const fs::path dir = fresh_dir("contr");
  klmc::json j = {{"experiment", "contraction"},
                  {"seed", 3},
                  {"out", dir.string()},
                  {"target", {{"name", "diagonal_quadratic"}, {"lambdas", {1.0, 4.0}}}},
                  {"sampler", {{"gamma", 4.0}}},
                  {"contraction", {{"mode", "ode"}}}};
  const auto result = klmc::run(klmc::parse_config(j));
  const klmc::json report = klmc::json::parse(slurp(dir / "report.json"));
  const double predicted = report["summary"]["beta_predicted"].get<double>();
  const double measured = report["summary"]["beta_measured"].get<double>();
  CHECK(predicted == doctest::Approx(2.0 - std::sqrt(3.0)));
  CHECK(measured == doctest::Approx(predicted).epsilon(1e-3));
  const std::string body = slurp(dir / "decay.csv");
  CHECK(body.rfind("t,mean_sq_distance,log_distance\n", 0) == 0);
  fs::remove_all(dir);
}

TEST_CASE("regions experiment emits the preference grid") {
  const fs::path dir = fresh_dir("regions");
  klmc::json j = {{"experiment", "regions"},
                  {"seed", 3},
                  {"out", dir.string()},
                  {"tuning", {{"grid_points", 9}, {"w2_init", 10.0}, {"epsilon", 1.0}}}};
  const auto result = klmc::run(klmc::parse_config(j));
  const std::string body = slurp(dir / "regions.csv");
  CHECK(body.rfind("log10_scale,log10_kappa,K_lmc,K_klmc,winner\n", 0) == 0);
  CHECK(std::count(body.begin(), body.end(), '\n') == 1 + 9 * 9);
  CHECK(body.find(",lmc\n") != std::string::npos);
  CHECK(body.find(",klmc\n") != std::string::npos);
  fs::remove_all(dir);
}

TEST_CASE("missing seed falls back to os entropy and is recorded") {
  const fs::path dir = fresh_dir("entropy");
  klmc::json j = {{"experiment", "tune"}, {"out", dir.string()}};
  const auto result = klmc::run(klmc::parse_config(j));
  const klmc::json report = klmc::json::parse(slurp(dir / "report.json"));
  CHECK(report.contains("seed"));
  CHECK(report.contains("run_id"));
  fs::remove_all(dir);
}
