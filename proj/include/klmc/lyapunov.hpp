#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>

#include "klmc/kernel.hpp"
#include "klmc/sampler.hpp"

namespace klmc {

// On a diagonal quadratic target every discrete sampler here is a
// per-coordinate linear-Gaussian recursion x' = A x + noise. Its stationary
// covariance solves the discrete Lyapunov equation S = A S A' + Q, which gives
// an exact, Monte-Carlo-free oracle for the sampler's stationary bias.

/// Solves S = A S A' + Q by the Kronecker-vectorized linear system.
inline Eigen::MatrixXd discrete_lyapunov(const Eigen::MatrixXd& a, const Eigen::MatrixXd& q) {
  const Eigen::Index n = a.rows();
  if (a.cols() != n || q.rows() != n || q.cols() != n)
    throw std::invalid_argument("discrete_lyapunov: shape mismatch");
  Eigen::MatrixXd kron(n * n, n * n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      kron.block(i * n, j * n, n, n) = a(i, j) * a;
  const Eigen::MatrixXd lhs = Eigen::MatrixXd::Identity(n * n, n * n) - kron;
  const Eigen::VectorXd rhs = Eigen::Map<const Eigen::VectorXd>(q.data(), n * n);
  const Eigen::VectorXd s = lhs.partialPivLu().solve(rhs);
  Eigen::MatrixXd out = Eigen::Map<const Eigen::MatrixXd>(s.data(), n, n);
  return 0.5 * (out + out.transpose());
}

/// Deterministic part of the per-coordinate KLMC update in (v, theta) order.
inline Eigen::Matrix2d klmc_coordinate_map(double lambda, const KernelCoefficients& kc) {
  Eigen::Matrix2d a;
  a << kc.psi0, -kc.psi1 * lambda,
       kc.psi1, 1.0 - kc.psi2 * lambda;
  return a;
}

/// Per-coordinate KLMC step-noise covariance (v, theta).
inline Eigen::Matrix2d klmc_coordinate_noise(const KernelCoefficients& kc) {
  return kc.sigma_klmc;
}

/// Deterministic part of the per-coordinate KLMC2 update; H reduces to the
/// scalar curvature lambda.
inline Eigen::Matrix2d klmc2_coordinate_map(double lambda, const KernelCoefficients& kc) {
  Eigen::Matrix2d a;
  a << kc.psi0 - kc.phi2 * lambda, -kc.psi1 * lambda,
       kc.psi1 - kc.phi3 * lambda, 1.0 - kc.psi2 * lambda;
  return a;
}

/// Per-coordinate KLMC2 step-noise covariance: the 4-component noise
/// (xi1 - lambda xi3, xi2 - lambda xi4) projected to (v, theta).
inline Eigen::Matrix2d klmc2_coordinate_noise(double lambda, const KernelCoefficients& kc) {
  Eigen::Matrix<double, 2, 4> b;
  b << 1.0, 0.0, -lambda, 0.0,
       0.0, 1.0, 0.0, -lambda;
  return b * kc.sigma_klmc2 * b.transpose();
}

inline Eigen::Matrix2d coordinate_map(Algorithm alg, double lambda,
                                      const KernelCoefficients& kc) {
  switch (alg) {
    case Algorithm::KLMC: return klmc_coordinate_map(lambda, kc);
    case Algorithm::KLMC2: return klmc2_coordinate_map(lambda, kc);
    default: throw std::invalid_argument("coordinate_map: KLMC or KLMC2 only");
  }
}

inline Eigen::Matrix2d coordinate_noise(Algorithm alg, double lambda,
                                        const KernelCoefficients& kc) {
  switch (alg) {
    case Algorithm::KLMC: return klmc_coordinate_noise(kc);
    case Algorithm::KLMC2: return klmc2_coordinate_noise(lambda, kc);
    default: throw std::invalid_argument("coordinate_noise: KLMC or KLMC2 only");
  }
}

/// Stationary (v, theta) covariance of the chain on one coordinate.
inline Eigen::Matrix2d stationary_coordinate_cov(Algorithm alg, double lambda,
                                                 const KernelCoefficients& kc) {
  return discrete_lyapunov(coordinate_map(alg, lambda, kc), coordinate_noise(alg, lambda, kc));
}

/// Exact W2 between the chain's Gaussian stationary position law and the
/// target N(0, diag(1/lambda)): both laws are centered and diagonal, so the
/// distance reduces to the per-coordinate sqrt-variance mismatch.
inline double stationary_w2_bias(Algorithm alg, const Eigen::VectorXd& lambdas,
                                 const KernelCoefficients& kc) {
  double sq = 0.0;
  for (Eigen::Index i = 0; i < lambdas.size(); ++i) {
    const Eigen::Matrix2d s = stationary_coordinate_cov(alg, lambdas(i), kc);
    const double d = std::sqrt(s(1, 1)) - std::sqrt(1.0 / lambdas(i));
    sq += d * d;
  }
  return std::sqrt(sq);
}

/// Per-coordinate mean/covariance after k steps from a deterministic start:
/// mean evolves by A^k, covariance by the Lyapunov recursion.
struct CoordinateMoments {
  Eigen::Vector2d mean;  // (v, theta)
  Eigen::Matrix2d cov;
};

inline CoordinateMoments propagate_coordinate_moments(Algorithm alg, double lambda,
                                                      const KernelCoefficients& kc,
                                                      const CoordinateMoments& init,
                                                      long steps) {
  const Eigen::Matrix2d a = coordinate_map(alg, lambda, kc);
  const Eigen::Matrix2d q = coordinate_noise(alg, lambda, kc);
  CoordinateMoments cur = init;
  for (long k = 0; k < steps; ++k) {
    cur.mean = a * cur.mean;
    cur.cov = a * cur.cov * a.transpose() + q;
  }
  return cur;
}

/// Exact W2(nu_k, pi) of the position marginal on a diagonal quadratic target
/// when started from theta0 (point mass) and v0 ~ N(0, I).
inline double transient_w2(Algorithm alg, const Eigen::VectorXd& lambdas,
                           const KernelCoefficients& kc, const Eigen::VectorXd& theta0,
                           long steps) {
  double sq = 0.0;
  for (Eigen::Index i = 0; i < lambdas.size(); ++i) {
    CoordinateMoments init;
    init.mean << 0.0, theta0(i);
    init.cov << 1.0, 0.0, 0.0, 0.0;
    const CoordinateMoments mk = propagate_coordinate_moments(alg, lambdas(i), kc, init, steps);
    const double d = std::sqrt(mk.cov(1, 1)) - std::sqrt(1.0 / lambdas(i));
    sq += mk.mean(1) * mk.mean(1) + d * d;
  }
  return std::sqrt(sq);
}

}  // namespace klmc
