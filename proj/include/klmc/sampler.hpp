#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "klmc/cholesky.hpp"
#include "klmc/errors.hpp"
#include "klmc/gauss_legendre.hpp"
#include "klmc/kernel.hpp"
#include "klmc/rng.hpp"
#include "klmc/target.hpp"

namespace klmc {

/// Paired position/velocity state of the kinetic chain.
struct KineticState {
  Eigen::VectorXd theta;
  Eigen::VectorXd v;
};

enum class Algorithm { LMC, KLMC, KLMC2, EXACT_GAUSSIAN, FINE_GRID };

inline std::string algorithm_name(Algorithm a) {
  switch (a) {
    case Algorithm::LMC: return "lmc";
    case Algorithm::KLMC: return "klmc";
    case Algorithm::KLMC2: return "klmc2";
    case Algorithm::EXACT_GAUSSIAN: return "exact_gaussian";
    case Algorithm::FINE_GRID: return "fine_grid";
  }
  return "?";
}

struct SamplerConfig {
  Algorithm algorithm = Algorithm::KLMC;
  double gamma = 1.0;
  double u = 1.0;
  double h = 0.01;
  long steps = 1000;
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;
  Eigen::VectorXd theta0;   // empty: model minimizer (or zeros)
  long record_stride = 1;
  double substep = 1e-3;    // FINE_GRID only
};

struct Trajectory {
  std::vector<long> step_index;
  std::vector<KineticState> states;
};

/// One Euler step of the overdamped chain: theta - h grad f + sqrt(2h) z.
inline Eigen::VectorXd lmc_step(const TargetModel& model, const Eigen::VectorXd& theta,
                                double h, GaussianBlock& noise) {
  if (!(h > 0.0)) throw std::invalid_argument("lmc_step: h must be positive");
  Eigen::VectorXd out = theta - h * model.gradient(theta);
  const double scale = std::sqrt(2.0 * h);
  for (Eigen::Index i = 0; i < out.size(); ++i) out(i) += scale * noise.next();
  return out;
}

/// One KLMC step: frozen-gradient OU flow plus correlated (velocity, position)
/// noise. Consumes exactly 2p standard normals, column-major.
inline KineticState klmc_step(const TargetModel& model, const KineticState& state,
                              const KernelCoefficients& coeffs, GaussianBlock& noise) {
  const Eigen::Index p = state.theta.size();
  const Eigen::VectorXd grad = model.gradient(state.theta);

  KineticState out;
  out.v = coeffs.psi0 * state.v - coeffs.psi1 * grad;
  out.theta = state.theta + coeffs.psi1 * state.v - coeffs.psi2 * grad;

  Eigen::VectorXd z1(p), z2(p);
  for (Eigen::Index i = 0; i < p; ++i) z1(i) = noise.next();
  for (Eigen::Index i = 0; i < p; ++i) z2(i) = noise.next();
  const Eigen::Matrix2d& L = coeffs.chol_klmc;
  out.v += L(0, 0) * z1;
  out.theta += L(1, 0) * z1 + L(1, 1) * z2;
  return out;
}

/// One KLMC2 step. The Hessian is only ever applied through matrix-vector
/// products (on v_k and on two of the four noise components). Consumes 4p
/// standard normals whose first 2p coincide with klmc_step's layout.
inline KineticState klmc2_step(const TargetModel& model, const KineticState& state,
                               const KernelCoefficients& coeffs, GaussianBlock& noise) {
  if (!model.has_hvp())
    throw Unsupported("klmc2_step: model lacks second-order information");
  const Eigen::Index p = state.theta.size();
  const Eigen::VectorXd grad = model.gradient(state.theta);
  const Eigen::VectorXd hv = model.hessian_vector_product(state.theta, state.v);

  KineticState out;
  out.v = coeffs.psi0 * state.v - coeffs.psi1 * grad - coeffs.phi2 * hv;
  out.theta = state.theta + coeffs.psi1 * state.v - coeffs.psi2 * grad - coeffs.phi3 * hv;

  Eigen::MatrixXd z(p, 4);
  for (int c = 0; c < 4; ++c)
    for (Eigen::Index i = 0; i < p; ++i) z(i, c) = noise.next();
  const Eigen::Matrix4d& L = coeffs.chol_klmc2;
  const Eigen::MatrixXd xi = z * L.transpose();  // columns xi1..xi4

  out.v += xi.col(0) - model.hessian_vector_product(state.theta, xi.col(2));
  out.theta += xi.col(1) - model.hessian_vector_product(state.theta, xi.col(3));
  return out;
}

/// Exact one-step transition of the kinetic diffusion for one quadratic
/// coordinate with curvature lambda: mean exp(hA) (v, theta), covariance
/// int_0^h exp(sA) diag(2 gamma, 0) exp(sA)' ds, A = [[-gamma, -lambda],[1, 0]].
struct ExactCoordinateKernel {
  Eigen::Matrix2d transition;  // exp(hA)
  Eigen::Matrix2d noise_chol;
};

namespace detail {

/// exp(hA) in closed form across the over-, critically- and under-damped
/// regimes (gamma^2 vs 4 lambda).
inline Eigen::Matrix2d kinetic_matrix_exp(double gamma, double lambda, double h) {
  Eigen::Matrix2d B;  // A + (gamma/2) I, with B^2 = (Delta/4) I
  B << -0.5 * gamma, -lambda, 1.0, 0.5 * gamma;
  const double delta = gamma * gamma - 4.0 * lambda;
  const double z2 = 0.25 * delta * h * h;  // (omega h / 2)^2, signed
  double c, s;  // cosh/cos of omega h/2 and sinh/sin over omega/2
  if (std::abs(z2) < 1e-8) {
    // near-critical damping: even series in z2, valid for either sign
    c = 1.0 + z2 * (0.5 + z2 / 24.0);
    s = h * (1.0 + z2 * (1.0 / 6.0 + z2 / 120.0));
  } else if (delta > 0.0) {
    const double z = std::sqrt(z2);
    c = std::cosh(z);
    s = h * std::sinh(z) / z;
  } else {
    const double z = std::sqrt(-z2);
    c = std::cos(z);
    s = h * std::sin(z) / z;
  }
  return std::exp(-0.5 * gamma * h) *
         (c * Eigen::Matrix2d::Identity() + s * B);
}

/// int_0^h exp(sA) diag(2 gamma, 0) exp(sA)' ds by doubled-node quadrature.
inline Eigen::Matrix2d kinetic_transition_cov(double gamma, double lambda, double h) {
  Eigen::Matrix2d q;
  auto entry = [&](int i, int j) {
    return gauss_legendre_adaptive(
        [&](double s) {
          const Eigen::Matrix2d e = kinetic_matrix_exp(gamma, lambda, s);
          return 2.0 * gamma * e(i, 0) * e(j, 0);
        },
        0.0, h);
  };
  q(0, 0) = entry(0, 0);
  q(0, 1) = q(1, 0) = entry(0, 1);
  q(1, 1) = entry(1, 1);
  return q;
}

}  // namespace detail

inline ExactCoordinateKernel make_exact_coordinate_kernel(double gamma, double lambda,
                                                          double h) {
  if (!(lambda > 0.0)) throw std::invalid_argument("exact kernel: lambda must be positive");
  if (!(gamma > 0.0) || !(h > 0.0))
    throw std::invalid_argument("exact kernel: gamma and h must be positive");
  ExactCoordinateKernel k;
  k.transition = detail::kinetic_matrix_exp(gamma, lambda, h);
  k.noise_chol = chol_factor(detail::kinetic_transition_cov(gamma, lambda, h));
  return k;
}

/// Precomputed exact Gaussian transition for a diagonal quadratic target.
class ExactGaussianKernel {
 public:
  ExactGaussianKernel(const Eigen::VectorXd& lambdas, double gamma, double h) {
    coords_.reserve(static_cast<std::size_t>(lambdas.size()));
    for (Eigen::Index i = 0; i < lambdas.size(); ++i)
      coords_.push_back(make_exact_coordinate_kernel(gamma, lambdas(i), h));
  }

  KineticState step(const KineticState& state, GaussianBlock& noise) const {
    const Eigen::Index p = state.theta.size();
    if (static_cast<std::size_t>(p) != coords_.size())
      throw std::invalid_argument("exact kernel: dimension mismatch");
    Eigen::VectorXd z1(p), z2(p);
    for (Eigen::Index i = 0; i < p; ++i) z1(i) = noise.next();
    for (Eigen::Index i = 0; i < p; ++i) z2(i) = noise.next();
    KineticState out;
    out.theta.resize(p);
    out.v.resize(p);
    for (Eigen::Index i = 0; i < p; ++i) {
      const auto& k = coords_[static_cast<std::size_t>(i)];
      const Eigen::Vector2d mean = k.transition * Eigen::Vector2d(state.v(i), state.theta(i));
      const Eigen::Vector2d noise_vec =
          k.noise_chol * Eigen::Vector2d(z1(i), z2(i));
      out.v(i) = mean(0) + noise_vec(0);
      out.theta(i) = mean(1) + noise_vec(1);
    }
    return out;
  }

 private:
  std::vector<ExactCoordinateKernel> coords_;
};

/// One-shot exact transition; rejects non-quadratic targets.
inline KineticState exact_gaussian_kinetic_step(const TargetModel& model,
                                                const KineticState& state, double gamma,
                                                double h, GaussianBlock& noise) {
  const auto* quad = dynamic_cast<const DiagonalQuadraticTarget*>(&model);
  if (quad == nullptr)
    throw Unsupported("exact_gaussian_kinetic_step: target must be a diagonal quadratic");
  ExactGaussianKernel kernel(quad->lambdas(), gamma, h);
  return kernel.step(state, noise);
}

/// Euler-Maruyama path of the kinetic SDE with general inverse mass u.
/// Substep k consumes p draws from block (counter_offset + k + 1); when
/// `record_increments` is given the raw Brownian increments are stored so a
/// coupled run can consume the same path.
inline KineticState fine_grid_integrate(const TargetModel& model, KineticState state,
                                        double gamma, double u, double total_time,
                                        double substep, const NoiseStream& stream,
                                        std::uint64_t counter_offset = 0,
                                        std::vector<Eigen::VectorXd>* record_increments = nullptr) {
  if (!(substep > 0.0)) throw std::invalid_argument("fine_grid_integrate: substep must be positive");
  const long n = std::lround(total_time / substep);
  const Eigen::Index p = state.theta.size();
  const double root = std::sqrt(substep);
  const double amp = std::sqrt(2.0 * gamma * u);
  for (long k = 0; k < n; ++k) {
    GaussianBlock block = stream.block(counter_offset + static_cast<std::uint64_t>(k) + 1);
    Eigen::VectorXd dw(p);
    for (Eigen::Index i = 0; i < p; ++i) dw(i) = root * block.next();
    if (record_increments != nullptr) record_increments->push_back(dw);
    const Eigen::VectorXd grad = model.gradient(state.theta);
    const Eigen::VectorXd v_old = state.v;
    state.v += -(gamma * v_old + u * grad) * substep + amp * dw;
    state.theta += v_old * substep;
  }
  return state;
}

/// Same integrator driven by externally supplied Brownian increments.
inline KineticState fine_grid_integrate_with_increments(
    const TargetModel& model, KineticState state, double gamma, double u, double substep,
    std::span<const Eigen::VectorXd> increments) {
  const double amp = std::sqrt(2.0 * gamma * u);
  for (const Eigen::VectorXd& dw : increments) {
    const Eigen::VectorXd grad = model.gradient(state.theta);
    const Eigen::VectorXd v_old = state.v;
    state.v += -(gamma * v_old + u * grad) * substep + amp * dw;
    state.theta += v_old * substep;
  }
  return state;
}

/// Hypothesis checks for the discrete samplers; non-fatal, surfaced by the
/// experiment harness.
inline std::vector<std::string> sampler_warnings(const SamplerConfig& cfg,
                                                 const TargetModel& model) {
  std::vector<std::string> warnings;
  const double m = model.strong_convexity();
  const double M = model.grad_lipschitz();
  const double m2 = model.hessian_lipschitz();
  const double p = static_cast<double>(model.dim());
  if (cfg.algorithm == Algorithm::KLMC || cfg.algorithm == Algorithm::KLMC2) {
    if (cfg.gamma < std::sqrt(m + M))
      warnings.push_back("gamma below sqrt(m+M): contraction hypothesis gamma >= sqrt(m+M) violated");
  }
  if (cfg.algorithm == Algorithm::KLMC) {
    const double cap = m / (4.0 * cfg.gamma * M);
    if (cfg.h > cap)
      warnings.push_back("h exceeds m/(4*gamma*M) = " + std::to_string(cap) +
                         ": KLMC error bound hypothesis violated");
  }
  if (cfg.algorithm == Algorithm::KLMC2) {
    double cap = m / (5.0 * cfg.gamma * M);
    if (m2 > 0.0) cap = std::min(cap, m / (4.0 * std::sqrt(5.0 * p) * m2));
    if (cfg.h > cap)
      warnings.push_back("h exceeds m/(5*gamma*M) ^ m/(4*sqrt(5p)*M2) = " + std::to_string(cap) +
                         ": KLMC2 error bound hypothesis violated");
  }
  return warnings;
}

/// Iterates the configured sampler, recording thinned snapshots (the initial
/// state is always snapshot 0). (seed, stream) fully determine the output.
inline Trajectory run_chain(const SamplerConfig& cfg, const TargetModel& model) {
  if (!(cfg.h > 0.0)) throw std::invalid_argument("run_chain: h must be positive");
  if (cfg.steps < 0) throw std::invalid_argument("run_chain: steps must be >= 0");
  if (cfg.record_stride < 1) throw std::invalid_argument("run_chain: record_stride must be >= 1");
  if (cfg.u != 1.0 && cfg.algorithm != Algorithm::FINE_GRID)
    throw std::invalid_argument("run_chain: u != 1 is only supported by the fine-grid integrator");

  const Eigen::Index p = model.dim();
  NoiseStream stream(cfg.seed, cfg.stream);

  KineticState state;
  if (cfg.theta0.size() == 0) {
    const auto min = model.minimizer();
    state.theta = min ? *min : Eigen::VectorXd::Zero(p);
  } else {
    if (cfg.theta0.size() != p) throw std::invalid_argument("run_chain: theta0 dimension mismatch");
    state.theta = cfg.theta0;
  }
  {
    // v0 ~ N(0, I_p), from the reserved initial block
    GaussianBlock init = stream.block(0);
    state.v.resize(p);
    for (Eigen::Index i = 0; i < p; ++i) state.v(i) = init.next();
  }

  Trajectory traj;
  traj.step_index.push_back(0);
  traj.states.push_back(state);

  KernelCoefficients coeffs;
  std::unique_ptr<ExactGaussianKernel> exact;
  if (cfg.algorithm == Algorithm::KLMC || cfg.algorithm == Algorithm::KLMC2)
    coeffs = make_kernel_coefficients(cfg.gamma, cfg.h);
  if (cfg.algorithm == Algorithm::EXACT_GAUSSIAN) {
    const auto* quad = dynamic_cast<const DiagonalQuadraticTarget*>(&model);
    if (quad == nullptr)
      throw Unsupported("run_chain: exact Gaussian sampler needs a diagonal quadratic target");
    exact = std::make_unique<ExactGaussianKernel>(quad->lambdas(), cfg.gamma, cfg.h);
  }

  for (long k = 0; k < cfg.steps; ++k) {
    GaussianBlock block = stream.block(static_cast<std::uint64_t>(k) + 1);
    switch (cfg.algorithm) {
      case Algorithm::LMC:
        state.theta = lmc_step(model, state.theta, cfg.h, block);
        break;
      case Algorithm::KLMC:
        state = klmc_step(model, state, coeffs, block);
        break;
      case Algorithm::KLMC2:
        state = klmc2_step(model, state, coeffs, block);
        break;
      case Algorithm::EXACT_GAUSSIAN:
        state = exact->step(state, block);
        break;
      case Algorithm::FINE_GRID: {
        // one coarse step of length h, resolved at the configured substep;
        // substeps of step k draw from a per-step offset window
        const long per = std::lround(cfg.h / cfg.substep);
        state = fine_grid_integrate(model, state, cfg.gamma, cfg.u, cfg.h, cfg.substep,
                                    stream,
                                    static_cast<std::uint64_t>(k) * static_cast<std::uint64_t>(per + 1));
        break;
      }
    }
    if ((k + 1) % cfg.record_stride == 0 || k + 1 == cfg.steps) {
      if (traj.step_index.back() != k + 1) {
        traj.step_index.push_back(k + 1);
        traj.states.push_back(state);
      }
    }
  }
  return traj;
}

}  // namespace klmc
