#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "klmc/errors.hpp"
#include "klmc/rng.hpp"
#include "klmc/target.hpp"

namespace klmc {

// Contraction-rate laboratory for the continuous-time kinetic diffusion.
// Synchronously coupled copies share the Brownian path, so their difference
// obeys the deterministic linear system d/dt (dv, dl) = [[-g I, -H],[I, 0]]
// (dv, dl); for quadratic targets H is constant and the decay rate can be
// measured exactly and compared against the piecewise closed-form prediction.

/// Optimized contraction prediction for given (gamma, m, M).
struct ContractionPrediction {
  double gamma = 0.0, m = 0.0, lipschitz = 0.0;
  double v_opt = 0.0;   // optimizing coupling parameter in [0, gamma/2)
  double beta = 0.0;    // exponential rate
  double alpha = 0.0;   // prefactor
};

/// Rate exponent as a function of the free coupling parameter v.
inline double contraction_rate_at_v(double gamma, double m, double lipschitz, double v) {
  const double worst = std::max(v * v - m, lipschitz - (gamma - v) * (gamma - v));
  return -worst / (gamma - 2.0 * v);
}

/// Prefactor as a function of v.
inline double contraction_prefactor_at_v(double gamma, double v) {
  const double a = gamma - v;
  return std::sqrt(2.0 * (a * a + v * v)) / (gamma - 2.0 * v);
}

/// Piecewise-optimal rate over v, split by the position of gamma^2 relative
/// to (M, m+M, 3m+M). Signals NoContraction for gamma^2 <= M.
inline ContractionPrediction predicted_rate(double gamma, double m, double lipschitz) {
  if (!(gamma > 0.0) || !(m > 0.0) || !(lipschitz >= m))
    throw std::invalid_argument("predicted_rate: need gamma > 0, 0 < m <= M");
  const double g2 = gamma * gamma;
  if (g2 <= lipschitz)
    throw NoContraction("predicted_rate: no contraction for gamma^2 <= M");
  ContractionPrediction out;
  out.gamma = gamma;
  out.m = m;
  out.lipschitz = lipschitz;
  if (g2 <= m + lipschitz) {
    out.v_opt = 0.0;
    out.beta = (g2 - lipschitz) / gamma;
  } else if (g2 < 3.0 * m + lipschitz) {
    const double root = std::sqrt(2.0 * (m + lipschitz) - g2);
    out.v_opt = 0.5 * (gamma - root);
    out.beta = 0.5 * gamma - (lipschitz - m) / (2.0 * root);
  } else {
    const double root = std::sqrt(g2 - 4.0 * m);
    out.v_opt = 0.5 * (gamma - root);
    out.beta = out.v_opt;
  }
  out.alpha = contraction_prefactor_at_v(gamma, out.v_opt);
  return out;
}

/// Decay rate of the per-coordinate linear system with drift
/// [[-gamma, -lambda],[1, 0]]: minus the largest real part of its eigenvalues.
inline double eigen_rate_oracle(double gamma, double lambda) {
  if (!(lambda > 0.0)) throw std::invalid_argument("eigen_rate_oracle: lambda must be positive");
  const double disc = gamma * gamma - 4.0 * lambda;
  if (disc >= 0.0) return 0.5 * (gamma - std::sqrt(disc));
  return 0.5 * gamma;  // complex pair, real part -gamma/2
}

/// Slope of a measured log-distance decay plus fit diagnostics.
struct DecayFit {
  double rate = 0.0;       // positive decay rate (minus slope)
  double residual = 0.0;   // RMS residual of the linear fit
  double se = 0.0;         // bootstrap standard error (stochastic variant only)
};

namespace detail {

/// Least-squares slope of log_dist vs t over the final third of the horizon.
inline DecayFit fit_decay(const std::vector<double>& times, const std::vector<double>& log_dist,
                          double residual_threshold) {
  const std::size_t n = times.size();
  const std::size_t start = (2 * n) / 3;
  double st = 0.0, sy = 0.0, stt = 0.0, sty = 0.0;
  const double cnt = static_cast<double>(n - start);
  for (std::size_t i = start; i < n; ++i) {
    st += times[i];
    sy += log_dist[i];
    stt += times[i] * times[i];
    sty += times[i] * log_dist[i];
  }
  const double denom = cnt * stt - st * st;
  const double slope = (cnt * sty - st * sy) / denom;
  const double intercept = (sy - slope * st) / cnt;
  double ss = 0.0;
  for (std::size_t i = start; i < n; ++i) {
    const double r = log_dist[i] - (intercept + slope * times[i]);
    ss += r * r;
  }
  DecayFit fit;
  fit.rate = -slope;
  fit.residual = std::sqrt(ss / cnt);
  if (fit.residual > residual_threshold)
    throw PreAsymptotic("decay fit residual " + std::to_string(fit.residual) +
                        " exceeds threshold: pre-asymptotic contamination");
  return fit;
}

}  // namespace detail

/// Time series of the coupled-difference decay, exportable as CSV.
struct DecayTrace {
  std::vector<double> t;
  std::vector<double> mean_sq_distance;
  std::vector<double> log_distance;
};

/// Integrates the deterministic difference system for a diagonal quadratic
/// target (position difference seeded along the slowest curvature, velocity
/// difference zero, per the synchronous coupling V0' = V0) and fits the
/// asymptotic decay rate of |dL(t)|.
inline DecayFit difference_ode_rate(const Eigen::VectorXd& lambdas, double gamma,
                                    double t_max, DecayTrace* trace = nullptr,
                                    double residual_threshold = 1e-3) {
  const Eigen::Index p = lambdas.size();
  if (p == 0) throw std::invalid_argument("difference_ode_rate: empty target");
  Eigen::Index slow = 0;
  lambdas.minCoeff(&slow);

  Eigen::VectorXd dv = Eigen::VectorXd::Zero(p);
  Eigen::VectorXd dl = Eigen::VectorXd::Zero(p);
  dl(slow) = 1.0;

  const double dt = std::min(0.01 / gamma, t_max / 4000.0);
  const long steps = std::lround(t_max / dt);
  const long sample_every = std::max<long>(1, steps / 400);

  auto deriv = [&](const Eigen::VectorXd& v, const Eigen::VectorXd& l,
                   Eigen::VectorXd& vd, Eigen::VectorXd& ld) {
    vd = -gamma * v - lambdas.cwiseProduct(l);
    ld = v;
  };

  std::vector<double> times, log_dist;
  Eigen::VectorXd k1v(p), k1l(p), k2v(p), k2l(p), k3v(p), k3l(p), k4v(p), k4l(p);
  for (long k = 0; k < steps; ++k) {
    deriv(dv, dl, k1v, k1l);
    deriv(dv + 0.5 * dt * k1v, dl + 0.5 * dt * k1l, k2v, k2l);
    deriv(dv + 0.5 * dt * k2v, dl + 0.5 * dt * k2l, k3v, k3l);
    deriv(dv + dt * k3v, dl + dt * k3l, k4v, k4l);
    dv += (dt / 6.0) * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
    dl += (dt / 6.0) * (k1l + 2.0 * k2l + 2.0 * k3l + k4l);
    if ((k + 1) % sample_every == 0) {
      const double dist = dl.norm();
      times.push_back((k + 1) * dt);
      log_dist.push_back(std::log(std::max(dist, 1e-300)));
      if (trace != nullptr) {
        trace->t.push_back(times.back());
        trace->mean_sq_distance.push_back(dist * dist);
        trace->log_distance.push_back(log_dist.back());
      }
    }
  }
  return detail::fit_decay(times, log_dist, residual_threshold);
}

/// Runs synchronously coupled Euler-Maruyama pairs of the kinetic diffusion,
/// averages the squared position distance pathwise and fits the decay rate of
/// its square root. The bootstrap band resamples whole pairs.
inline DecayFit coupled_stochastic_rate(const TargetModel& model, double gamma,
                                        double h_fine, double t_max, int n_pairs,
                                        const NoiseStream& stream,
                                        const Eigen::VectorXd& initial_offset,
                                        DecayTrace* trace = nullptr,
                                        double residual_threshold = 0.2) {
  const Eigen::Index p = model.dim();
  if (initial_offset.size() != p)
    throw std::invalid_argument("coupled_stochastic_rate: offset dimension mismatch");
  const long steps = std::lround(t_max / h_fine);
  const long sample_every = std::max<long>(1, steps / 200);
  const std::size_t n_samples = static_cast<std::size_t>(steps / sample_every);

  Eigen::VectorXd base = Eigen::VectorXd::Zero(p);
  if (auto min = model.minimizer()) base = *min;

  std::vector<std::vector<double>> per_pair_sq(static_cast<std::size_t>(n_pairs));
  std::vector<double> times(n_samples);
  const double amp = std::sqrt(2.0 * gamma);
  const double root_h = std::sqrt(h_fine);

  for (int pair = 0; pair < n_pairs; ++pair) {
    NoiseStream pair_stream(stream.seed(), stream.stream() + static_cast<std::uint64_t>(pair));
    GaussianBlock init = pair_stream.block(0);
    Eigen::VectorXd v(p);
    for (Eigen::Index i = 0; i < p; ++i) v(i) = init.next();
    Eigen::VectorXd v2 = v;  // V0' = V0
    Eigen::VectorXd l1 = base + initial_offset;
    Eigen::VectorXd l2 = base;
    auto& sq = per_pair_sq[static_cast<std::size_t>(pair)];
    sq.reserve(n_samples);
    for (long k = 0; k < steps; ++k) {
      GaussianBlock block = pair_stream.block(static_cast<std::uint64_t>(k) + 1);
      Eigen::VectorXd dw(p);
      for (Eigen::Index i = 0; i < p; ++i) dw(i) = root_h * block.next();
      const Eigen::VectorXd g1 = model.gradient(l1);
      const Eigen::VectorXd g2 = model.gradient(l2);
      const Eigen::VectorXd v1_old = v, v2_old = v2;
      v += -(gamma * v1_old + g1) * h_fine + amp * dw;
      v2 += -(gamma * v2_old + g2) * h_fine + amp * dw;
      l1 += v1_old * h_fine;
      l2 += v2_old * h_fine;
      if ((k + 1) % sample_every == 0) {
        sq.push_back((l1 - l2).squaredNorm());
        if (pair == 0) times[sq.size() - 1] = (k + 1) * h_fine;
      }
    }
  }

  auto fit_mean = [&](const std::vector<int>& idx) {
    std::vector<double> log_dist(n_samples);
    for (std::size_t s = 0; s < n_samples; ++s) {
      double acc = 0.0;
      for (int i : idx) acc += per_pair_sq[static_cast<std::size_t>(i)][s];
      acc /= static_cast<double>(idx.size());
      log_dist[s] = 0.5 * std::log(std::max(acc, 1e-300));
    }
    return detail::fit_decay(times, log_dist, residual_threshold);
  };

  std::vector<int> all(static_cast<std::size_t>(n_pairs));
  for (int i = 0; i < n_pairs; ++i) all[static_cast<std::size_t>(i)] = i;
  DecayFit fit = fit_mean(all);

  if (trace != nullptr) {
    for (std::size_t s = 0; s < n_samples; ++s) {
      double acc = 0.0;
      for (int i = 0; i < n_pairs; ++i) acc += per_pair_sq[static_cast<std::size_t>(i)][s];
      acc /= static_cast<double>(n_pairs);
      trace->t.push_back(times[s]);
      trace->mean_sq_distance.push_back(acc);
      trace->log_distance.push_back(0.5 * std::log(std::max(acc, 1e-300)));
    }
  }

  if (n_pairs > 1) {
    const int B = 200;
    std::mt19937_64 boot(splitmix64(stream.seed() ^ 0x626f6f74ULL));
    std::uniform_int_distribution<int> pick(0, n_pairs - 1);
    std::vector<double> rates;
    rates.reserve(B);
    for (int b = 0; b < B; ++b) {
      std::vector<int> idx(static_cast<std::size_t>(n_pairs));
      for (auto& i : idx) i = pick(boot);
      try {
        rates.push_back(fit_mean(idx).rate);
      } catch (const PreAsymptotic&) {
        // skip degenerate resamples
      }
    }
    if (rates.size() > 1) {
      double mean = 0.0;
      for (double r : rates) mean += r;
      mean /= static_cast<double>(rates.size());
      double ss = 0.0;
      for (double r : rates) ss += (r - mean) * (r - mean);
      fit.se = std::sqrt(ss / static_cast<double>(rates.size() - 1));
    }
  }
  return fit;
}

/// Golden-section maximization of the rate exponent over v in [0, gamma/2);
/// cross-check that the closed-form optimizer is not beaten numerically.
inline double numeric_best_rate(double gamma, double m, double lipschitz) {
  const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = 0.0, b = 0.5 * gamma * (1.0 - 1e-9);
  double c = b - invphi * (b - a);
  double d = a + invphi * (b - a);
  auto f = [&](double v) { return contraction_rate_at_v(gamma, m, lipschitz, v); };
  for (int it = 0; it < 200; ++it) {
    if (f(c) > f(d)) b = d; else a = c;
    c = b - invphi * (b - a);
    d = a + invphi * (b - a);
  }
  return f(0.5 * (a + b));
}

}  // namespace klmc
