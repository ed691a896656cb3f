#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace klmc {

// Closed-form tuning rules: step sizes, iteration counts, and the two-term /
// four-term W2 error bounds for KLMC and KLMC2, plus the LMC-vs-KLMC regime
// comparison.

/// One entry of a theoretical W2 bound trace, with components separated.
struct BoundValue {
  long k = 0;
  double transient = 0.0;   // sqrt(2) (1 - rho)^k W2(nu_0, pi)
  double bias_hessian = 0.0;  // 2 h^2 M2 p / m (KLMC2 only)
  double bias = 0.0;        // h-order bias floor
  double tail = 0.0;        // exponential tail term (KLMC2 only)
  double total() const { return transient + bias_hessian + bias + tail; }
};

/// h = m/(4M sqrt(m+M)) ^ 0.94 eps / (kappa sqrt(2p)).
inline double klmc_step_size(double m, double lipschitz, int p, double epsilon) {
  if (!(m > 0.0) || !(lipschitz >= m) || p <= 0 || !(epsilon > 0.0))
    throw std::invalid_argument("klmc_step_size: invalid arguments");
  const double kappa = lipschitz / m;
  const double h1 = m / (4.0 * lipschitz * std::sqrt(m + lipschitz));
  const double h2 = 0.94 * epsilon / (kappa * std::sqrt(2.0 * static_cast<double>(p)));
  return std::min(h1, h2);
}

/// Smallest integer K satisfying the sufficient-iteration rule for the KLMC
/// at gamma = sqrt(m+M) and h = klmc_step_size; clamped at zero when the
/// initial error is already below eps/24.
inline double klmc_iterations(double m, double lipschitz, int p, double epsilon,
                              double w2_init) {
  if (!(w2_init >= 0.0)) throw std::invalid_argument("klmc_iterations: w2_init must be >= 0");
  const double kappa = lipschitz / m;
  const double lg = std::log(24.0 * w2_init / epsilon);
  if (!(lg > 0.0)) return 0.0;
  const double inv_h = std::max(4.0 * lipschitz * std::sqrt(m + lipschitz) / m,
                                kappa * std::sqrt(2.0 * static_cast<double>(p)) / (0.94 * epsilon));
  return std::ceil(std::sqrt(m + lipschitz) / (0.75 * m) * inv_h * lg);
}

/// Simplified upper bound 3 kappa^{3/2} max(16 kappa, p/(m eps^2))^{1/2} log(24 W2/eps).
inline double klmc_iterations_simplified(double m, double lipschitz, int p, double epsilon,
                                         double w2_init) {
  const double kappa = lipschitz / m;
  const double lg = std::log(24.0 * w2_init / epsilon);
  if (!(lg > 0.0)) return 0.0;
  const double scale = static_cast<double>(p) / (m * epsilon * epsilon);
  return std::ceil(3.0 * std::pow(kappa, 1.5) * std::sqrt(std::max(16.0 * kappa, scale)) * lg);
}

/// LMC sufficient iterations: 2 kappa max(1, 2.18 p/(m eps^2)) log(24 W2/eps).
inline double lmc_iterations(double m, int p, double epsilon, double kappa, double w2_init) {
  const double lg = std::log(24.0 * w2_init / epsilon);
  if (!(lg > 0.0)) return 0.0;
  const double scale = static_cast<double>(p) / (m * epsilon * epsilon);
  return std::ceil(2.0 * kappa * std::max(1.0, 2.18 * scale) * lg);
}

/// KLMC2 step-size cap m/(5 gamma M) ^ m/(4 sqrt(5p) M2); with M2 = 0 the
/// second branch is vacuous.
inline double klmc2_step_cap(double m, double lipschitz, double m2, int p, double gamma) {
  if (!(m > 0.0) || !(lipschitz >= m) || !(m2 >= 0.0) || p <= 0 || !(gamma > 0.0))
    throw std::invalid_argument("klmc2_step_cap: invalid arguments");
  double cap = m / (5.0 * gamma * lipschitz);
  if (m2 > 0.0)
    cap = std::min(cap, m / (4.0 * std::sqrt(5.0 * static_cast<double>(p)) * m2));
  return cap;
}

/// Two-term KLMC bound: sqrt(2)(1 - 0.75 m h / gamma)^k W2(nu_0,pi) + M h sqrt(2p)/m.
inline BoundValue klmc_w2_bound(long k, double h, double gamma, double m,
                                     double lipschitz, int p, double w2_init) {
  BoundValue b;
  b.k = k;
  const double rho = 1.0 - 0.75 * m * h / gamma;
  b.transient = std::sqrt(2.0) * std::pow(rho, static_cast<double>(k)) * w2_init;
  b.bias = lipschitz * h * std::sqrt(2.0 * static_cast<double>(p)) / m;
  return b;
}

/// Four-term KLMC2 bound; with use_footnote the e^{-p/2} tail factor is
/// replaced by e^{-m^2/(160 M2^2 h^2)} (exactly zero when M2 = 0).
inline BoundValue klmc2_w2_bound(long k, double h, double gamma, double m,
                                      double lipschitz, double m2, int p, double w2_init,
                                      bool use_footnote = false) {
  BoundValue b;
  b.k = k;
  const double rho = 1.0 - m * h / (4.0 * gamma);
  const double pd = static_cast<double>(p);
  b.transient = std::sqrt(2.0) * std::pow(rho, static_cast<double>(k)) * w2_init;
  b.bias_hessian = 2.0 * h * h * m2 * pd / m;
  b.bias = h * h * lipschitz * std::sqrt(2.0 * lipschitz * pd) / m;
  double tail_factor;
  if (use_footnote) {
    tail_factor = m2 > 0.0 ? std::exp(-m * m / (160.0 * m2 * m2 * h * h)) : 0.0;
  } else {
    tail_factor = std::exp(-0.5 * pd);
  }
  b.tail = 8.0 * lipschitz / m * h * tail_factor;
  return b;
}

/// Full bound trace for k = 0..steps at the given stride.
inline std::vector<BoundValue> klmc_bound_trace(long steps, long stride, double h,
                                                double gamma, double m, double lipschitz,
                                                int p, double w2_init) {
  std::vector<BoundValue> trace;
  for (long k = 0; k <= steps; k += stride)
    trace.push_back(klmc_w2_bound(k, h, gamma, m, lipschitz, p, w2_init));
  if (trace.empty() || trace.back().k != steps)
    trace.push_back(klmc_w2_bound(steps, h, gamma, m, lipschitz, p, w2_init));
  return trace;
}

enum class Winner { LMC, KLMC };

struct RegimeDecision {
  double k_lmc = 0.0;
  double k_klmc = 0.0;
  Winner winner = Winner::KLMC;
};

/// Compares the simplified sufficient-iteration counts of LMC and KLMC at
/// the same (kappa, p/(m eps^2), W2(nu_0,pi)/eps).
inline RegimeDecision regime_classify(double kappa, double scale, double w2_init_over_eps) {
  if (!(kappa >= 1.0) || !(scale > 0.0) || !(w2_init_over_eps > 0.0))
    throw std::invalid_argument("regime_classify: invalid arguments");
  const double lg = std::log(24.0 * w2_init_over_eps);
  RegimeDecision d;
  if (!(lg > 0.0)) return d;  // both already converged
  d.k_klmc = std::ceil(3.0 * std::pow(kappa, 1.5) * std::sqrt(std::max(16.0 * kappa, scale)) * lg);
  d.k_lmc = std::ceil(2.0 * kappa * std::max(1.0, 2.18 * scale) * lg);
  d.winner = d.k_lmc < d.k_klmc ? Winner::LMC : Winner::KLMC;
  return d;
}

/// Friction minimizing the mixing-rate bound: gamma = sqrt(m+M), rate m/gamma.
inline double optimal_gamma(double m, double lipschitz) {
  if (!(m > 0.0) || !(lipschitz >= m))
    throw std::invalid_argument("optimal_gamma: need 0 < m <= M");
  return std::sqrt(m + lipschitz);
}

}  // namespace klmc
