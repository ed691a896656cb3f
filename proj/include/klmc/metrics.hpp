#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

#include "klmc/errors.hpp"
#include "klmc/target.hpp"

namespace klmc {

/// First two moments of a law, either empirical (n_samples > 0) or analytic.
struct GaussianSummary {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
  long n_samples = 0;
};

namespace detail {

/// Symmetric PSD square root via eigendecomposition; eigenvalues in
/// [-1e-10 * trace, 0] are clipped to zero, anything lower is indefinite.
inline Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& a) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a);
  const double floor = -1e-10 * std::max(std::abs(a.trace()), 1e-300);
  Eigen::VectorXd vals = es.eigenvalues();
  for (Eigen::Index i = 0; i < vals.size(); ++i) {
    if (vals(i) < floor) throw IndefiniteMatrix("psd_sqrt: matrix is indefinite");
    vals(i) = vals(i) > 0.0 ? std::sqrt(vals(i)) : 0.0;
  }
  return es.eigenvectors() * vals.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace detail

/// Closed-form W2 between Gaussians (Bures form):
/// sqrt(|mu_a - mu_b|^2 + tr(Sa + Sb - 2 (Sa^1/2 Sb Sa^1/2)^1/2)).
inline double gaussian_w2(const GaussianSummary& a, const GaussianSummary& b) {
  if (a.mean.size() != b.mean.size()) throw std::invalid_argument("gaussian_w2: dim mismatch");
  const Eigen::MatrixXd ra = detail::psd_sqrt(a.cov);
  const Eigen::MatrixXd cross = detail::psd_sqrt(ra * b.cov * ra);
  double sq = (a.mean - b.mean).squaredNorm() + a.cov.trace() + b.cov.trace() -
              2.0 * cross.trace();
  if (sq < 0.0) sq = 0.0;  // roundoff for (near-)identical summaries
  return std::sqrt(sq);
}

/// Exact W2 between two one-dimensional empirical measures with equal sample
/// counts: the quantile coupling matches sorted samples.
inline double empirical_w2_1d(std::span<const double> sorted_a,
                              std::span<const double> sorted_b) {
  if (sorted_a.size() != sorted_b.size())
    throw std::invalid_argument("empirical_w2_1d: sample counts differ");
  if (sorted_a.empty()) return 0.0;
  double sq = 0.0;
  for (std::size_t i = 0; i < sorted_a.size(); ++i) {
    const double d = sorted_a[i] - sorted_b[i];
    sq += d * d;
  }
  return std::sqrt(sq / static_cast<double>(sorted_a.size()));
}

/// Single-pass streaming mean / centered second moment with a merge that is
/// associative up to roundoff (Chan's parallel update).
class MomentAccumulator {
 public:
  MomentAccumulator() = default;
  explicit MomentAccumulator(Eigen::Index dim)
      : mean_(Eigen::VectorXd::Zero(dim)), m2_(Eigen::MatrixXd::Zero(dim, dim)) {}

  void add(const Eigen::VectorXd& x) {
    if (count_ == 0 && mean_.size() == 0) {
      mean_ = Eigen::VectorXd::Zero(x.size());
      m2_ = Eigen::MatrixXd::Zero(x.size(), x.size());
    }
    if (x.size() != mean_.size()) throw std::invalid_argument("accumulator: dim mismatch");
    ++count_;
    const Eigen::VectorXd delta = x - mean_;
    mean_ += delta / static_cast<double>(count_);
    m2_ += delta * (x - mean_).transpose();
  }

  void merge(const MomentAccumulator& other) {
    if (other.count_ == 0) return;
    if (count_ == 0) { *this = other; return; }
    if (other.mean_.size() != mean_.size())
      throw std::invalid_argument("accumulator merge: dim mismatch");
    const double na = static_cast<double>(count_);
    const double nb = static_cast<double>(other.count_);
    const Eigen::VectorXd delta = other.mean_ - mean_;
    mean_ = (na * mean_ + nb * other.mean_) / (na + nb);
    m2_ += other.m2_ + (na * nb / (na + nb)) * (delta * delta.transpose());
    count_ += other.count_;
  }

  long count() const { return count_; }
  const Eigen::VectorXd& mean() const { return mean_; }

  /// Moment-matched (population, divisor n) covariance.
  Eigen::MatrixXd covariance() const {
    if (count_ == 0) throw std::invalid_argument("accumulator: empty");
    Eigen::MatrixXd c = m2_ / static_cast<double>(count_);
    return 0.5 * (c + c.transpose());
  }

  GaussianSummary summary() const {
    return GaussianSummary{mean_, covariance(), count_};
  }

 private:
  long count_ = 0;
  Eigen::VectorXd mean_;
  Eigen::MatrixXd m2_;
};

inline GaussianSummary target_gaussian_summary(const DiagonalQuadraticTarget& target) {
  GaussianSummary s;
  s.mean = Eigen::VectorXd::Zero(target.dim());
  s.cov = target.lambdas().cwiseInverse().asDiagonal();
  s.n_samples = 0;
  return s;
}

/// Plug-in W2 between the moment-matched Gaussian of the accumulated samples
/// and the target's exact Gaussian. The sample covariance is repaired by
/// eigenvalue clipping inside the Bures formula; the plug-in bias for
/// non-Gaussian laws is documented, not corrected.
inline double plugin_w2_to_target(const MomentAccumulator& acc,
                                  const DiagonalQuadraticTarget& target) {
  if (acc.count() < target.dim() + 1)
    throw std::invalid_argument("plugin_w2_to_target: need at least p+1 samples");
  return gaussian_w2(acc.summary(), target_gaussian_summary(target));
}

struct PluginW2Estimate {
  double w2 = 0.0;
  double jackknife_se = 0.0;
};

/// Plug-in W2 from a fan-in of per-chain accumulators with a leave-one-chain-
/// out jackknife standard error.
inline PluginW2Estimate plugin_w2_with_se(std::span<const MomentAccumulator> chains,
                                          const DiagonalQuadraticTarget& target) {
  if (chains.empty()) throw std::invalid_argument("plugin_w2_with_se: no chains");
  MomentAccumulator all;
  for (const auto& c : chains) all.merge(c);
  PluginW2Estimate est;
  est.w2 = plugin_w2_to_target(all, target);
  const std::size_t n = chains.size();
  if (n < 2) return est;
  std::vector<double> loo(n);
  for (std::size_t i = 0; i < n; ++i) {
    MomentAccumulator rest;
    for (std::size_t j = 0; j < n; ++j)
      if (j != i) rest.merge(chains[j]);
    loo[i] = plugin_w2_to_target(rest, target);
  }
  double mean = 0.0;
  for (double v : loo) mean += v;
  mean /= static_cast<double>(n);
  double ss = 0.0;
  for (double v : loo) ss += (v - mean) * (v - mean);
  est.jackknife_se = std::sqrt(ss * static_cast<double>(n - 1) / static_cast<double>(n));
  return est;
}

}  // namespace klmc
