#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "klmc/tuning.hpp"

TEST_CASE("step size closed-form example") {
  // m=1, M=4, p=2, eps=0.1: the accuracy branch binds at 0.94*0.1/(4*2) = 0.011750
  CHECK(klmc::klmc_step_size(1.0, 4.0, 2, 0.1) == doctest::Approx(0.011750).epsilon(1e-10));
  // large eps: the stability branch binds at m/(4 M sqrt(m+M))
  CHECK(klmc::klmc_step_size(1.0, 4.0, 2, 10.0) ==
        doctest::Approx(1.0 / (16.0 * std::sqrt(5.0))).epsilon(1e-12));
}

TEST_CASE("step size and iteration monotonicity") {
  double prev_h = 0.0;
  double prev_k = 1e300;
  for (double eps : {0.01, 0.02, 0.05, 0.1, 0.2}) {
    const double h = klmc::klmc_step_size(1.0, 4.0, 2, eps);
    const double k = klmc::klmc_iterations(1.0, 4.0, 2, eps, 10.0);
    CHECK(h >= prev_h);
    CHECK(k <= prev_k);
    prev_h = h;
    prev_k = k;
  }
  // higher dimension shrinks the step, grows the budget
  CHECK(klmc::klmc_step_size(1.0, 4.0, 100, 0.1) < klmc::klmc_step_size(1.0, 4.0, 2, 0.1));
  CHECK(klmc::klmc_iterations(1.0, 4.0, 100, 0.1, 10.0) >
        klmc::klmc_iterations(1.0, 4.0, 2, 0.1, 10.0));
}

TEST_CASE("iteration count clamps when already converged") {
  CHECK(klmc::klmc_iterations(1.0, 4.0, 2, 1.0, 0.01) == 0.0);
  CHECK(klmc::klmc_iterations_simplified(1.0, 4.0, 2, 1.0, 0.01) == 0.0);
  CHECK(klmc::lmc_iterations(1.0, 2, 1.0, 4.0, 0.01) == 0.0);
}

TEST_CASE("invalid tuning arguments are rejected") {
  CHECK_THROWS_AS(klmc::klmc_step_size(0.0, 4.0, 2, 0.1), std::invalid_argument);
  CHECK_THROWS_AS(klmc::klmc_step_size(1.0, 0.5, 2, 0.1), std::invalid_argument);
  CHECK_THROWS_AS(klmc::klmc_step_size(1.0, 4.0, 0, 0.1), std::invalid_argument);
  CHECK_THROWS_AS(klmc::klmc_step_size(1.0, 4.0, 2, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(klmc::klmc2_step_cap(1.0, 4.0, -1.0, 2, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(klmc::optimal_gamma(1.0, 0.5), std::invalid_argument);
  CHECK_THROWS_AS(klmc::regime_classify(0.5, 1.0, 10.0), std::invalid_argument);
}

TEST_CASE("plugging the recipe back into the bound meets the accuracy target") {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (int trial = 0; trial < 1000; ++trial) {
    const double m = std::pow(10.0, -2.0 + 4.0 * unif(rng));
    const double M = m * std::pow(10.0, 2.0 * unif(rng));
    const int p = 1 + static_cast<int>(100.0 * unif(rng));
    const double eps_rel = std::pow(10.0, -2.0 + 1.5 * unif(rng));
    const double w2_init = std::sqrt(static_cast<double>(p) / m) * (0.5 + 10.0 * unif(rng));
    // eps is measured in units of sqrt(p/m)
    const double eps = eps_rel * std::sqrt(static_cast<double>(p) / m);
    const double h = klmc::klmc_step_size(m, M, p, eps);
    const double k = klmc::klmc_iterations(m, M, p, eps, w2_init);
    const double gamma = klmc::optimal_gamma(m, M);
    const auto b = klmc::klmc_w2_bound(static_cast<long>(k), h, gamma, m, M, p, w2_init);
    CHECK(b.total() <= eps + 1e-12);
  }
}

TEST_CASE("simplified budget dominates the exact one") {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (int trial = 0; trial < 500; ++trial) {
    const double m = std::pow(10.0, -1.0 + 2.0 * unif(rng));
    const double M = m * std::pow(10.0, 2.0 * unif(rng));
    const int p = 1 + static_cast<int>(50.0 * unif(rng));
    const double eps = std::pow(10.0, -2.0 + 1.5 * unif(rng)) *
                       std::sqrt(static_cast<double>(p) / m);
    const double w2_init = 2.0 * std::sqrt(static_cast<double>(p) / m);
    CHECK(klmc::klmc_iterations_simplified(m, M, p, eps, w2_init) + 1.0 >=
          klmc::klmc_iterations(m, M, p, eps, w2_init));
  }
}

TEST_CASE("klmc2 bound footnote tail is sharper on admissible steps") {
  const double m = 1.0, M = 4.0, m2 = 3.0;
  const int p = 10;
  const double gamma = klmc::optimal_gamma(m, M);
  const double cap = klmc::klmc2_step_cap(m, M, m2, p, gamma);
  for (double frac : {0.2, 0.5, 1.0}) {
    const double h = frac * cap;
    const auto plain = klmc::klmc2_w2_bound(100, h, gamma, m, M, m2, p, 5.0, false);
    const auto foot = klmc::klmc2_w2_bound(100, h, gamma, m, M, m2, p, 5.0, true);
    CHECK(foot.tail <= plain.tail * (1.0 + 1e-12));
    CHECK(foot.total() <= plain.total() * (1.0 + 1e-12));
  }
  // with no hessian variation the footnote tail vanishes identically
  const auto exact = klmc::klmc2_w2_bound(100, 0.01, gamma, m, M, 0.0, p, 5.0, true);
  CHECK(exact.tail == 0.0);
}

TEST_CASE("bound trace is monotone to its floor") {
  const auto trace = klmc::klmc_bound_trace(2000, 100, 0.01, std::sqrt(2.0), 1.0, 1.0, 2, 5.0);
  REQUIRE(!trace.empty());
  CHECK(trace.front().k == 0);
  CHECK(trace.back().k == 2000);
  for (std::size_t i = 1; i < trace.size(); ++i)
    CHECK(trace[i].total() <= trace[i - 1].total() * (1.0 + 1e-12));
  CHECK(trace.back().bias == doctest::Approx(0.01 * std::sqrt(4.0) / 1.0));
}

TEST_CASE("regime classification examples and boundary monotonicity") {
  // huge scale: LMC's linear-in-scale budget loses to KLMC's square root
  CHECK(klmc::regime_classify(10.0, 1e8, 10.0).winner == klmc::Winner::KLMC);
  // tiny scale, mild conditioning: LMC's lower prefactor wins
  CHECK(klmc::regime_classify(1.0, 1e-3, 10.0).winner == klmc::Winner::LMC);

  // along each kappa line the winner flips at most once as scale grows
  for (double kappa : {1.0, 10.0, 100.0, 1000.0}) {
    int flips = 0;
    klmc::Winner prev = klmc::regime_classify(kappa, 1e-3, 10.0).winner;
    for (double ls = -2.5; ls <= 9.0; ls += 0.25) {
      const klmc::Winner w = klmc::regime_classify(kappa, std::pow(10.0, ls), 10.0).winner;
      if (w != prev) ++flips;
      prev = w;
    }
    CHECK(flips <= 1);
  }
}
