#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <fstream>
#include <memory>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "klmc/errors.hpp"

namespace klmc {

struct ConvexityConstants {
  double m = 0.0;       // strong convexity
  double lipschitz = 0.0;       // gradient Lipschitz constant M
  double hessian_lipschitz = 0.0;  // spectral-norm Hessian Lipschitz constant M2
  double kappa = 0.0;   // condition number M/m
};

/// A potential f with m I <= hess f <= M I, optionally exposing the value of
/// f, Hessian-vector products, and the minimizer.
class TargetModel {
 public:
  virtual ~TargetModel() = default;

  virtual int dim() const = 0;
  virtual double strong_convexity() const = 0;      // m
  virtual double grad_lipschitz() const = 0;        // M
  virtual double hessian_lipschitz() const = 0;     // M2

  virtual Eigen::VectorXd gradient(const Eigen::VectorXd& x) const = 0;

  virtual bool has_value() const { return false; }
  virtual double value(const Eigen::VectorXd&) const {
    throw Unsupported("target does not expose f itself");
  }

  virtual bool has_hvp() const { return false; }
  virtual Eigen::VectorXd hessian_vector_product(const Eigen::VectorXd&,
                                                 const Eigen::VectorXd&) const {
    throw Unsupported("target does not expose second-order information");
  }

  virtual std::optional<Eigen::VectorXd> minimizer() const { return std::nullopt; }

  void check_dim(const Eigen::VectorXd& x) const {
    if (x.size() != dim()) throw std::invalid_argument("target: dimension mismatch");
  }
};

inline ConvexityConstants constants(const TargetModel& model) {
  ConvexityConstants c;
  c.m = model.strong_convexity();
  c.lipschitz = model.grad_lipschitz();
  c.hessian_lipschitz = model.hessian_lipschitz();
  c.kappa = c.lipschitz / c.m;
  return c;
}

/// f(x) = 1/2 sum_i lambda_i x_i^2 with per-coordinate curvatures in [m, M].
/// The associated target density is N(0, diag(1/lambda)).
class DiagonalQuadraticTarget final : public TargetModel {
 public:
  explicit DiagonalQuadraticTarget(Eigen::VectorXd lambdas) : lambdas_(std::move(lambdas)) {
    if (lambdas_.size() == 0) throw std::invalid_argument("quadratic: empty lambdas");
    if (lambdas_.minCoeff() <= 0.0)
      throw std::invalid_argument("quadratic: curvatures must be positive");
  }

  /// Standard Gaussian target in dimension p (lambda = 1 everywhere).
  static DiagonalQuadraticTarget standard_gaussian(int p) {
    return DiagonalQuadraticTarget(Eigen::VectorXd::Ones(p));
  }

  int dim() const override { return static_cast<int>(lambdas_.size()); }
  double strong_convexity() const override { return lambdas_.minCoeff(); }
  double grad_lipschitz() const override { return lambdas_.maxCoeff(); }
  double hessian_lipschitz() const override { return 0.0; }

  bool has_value() const override { return true; }
  double value(const Eigen::VectorXd& x) const override {
    check_dim(x);
    return 0.5 * (lambdas_.array() * x.array().square()).sum();
  }

  Eigen::VectorXd gradient(const Eigen::VectorXd& x) const override {
    check_dim(x);
    return lambdas_.cwiseProduct(x);
  }

  bool has_hvp() const override { return true; }
  Eigen::VectorXd hessian_vector_product(const Eigen::VectorXd& x,
                                         const Eigen::VectorXd& v) const override {
    check_dim(x);
    check_dim(v);
    return lambdas_.cwiseProduct(v);
  }

  std::optional<Eigen::VectorXd> minimizer() const override {
    return Eigen::VectorXd::Zero(lambdas_.size());
  }

  const Eigen::VectorXd& lambdas() const { return lambdas_; }

 private:
  Eigen::VectorXd lambdas_;
};

/// Bayesian logistic regression with Gaussian prior:
///   f(theta) = sum_i [log(1+e^{x_i' theta}) - y_i x_i' theta] + tau/2 |theta|^2.
/// m = tau, M <= tau + lambda_max(X'X)/4, M2 <= sum_i |x_i|^3 / (6 sqrt 3).
class LogisticRegressionTarget final : public TargetModel {
 public:
  LogisticRegressionTarget(Eigen::MatrixXd design, Eigen::VectorXd labels, double tau)
      : design_(std::move(design)), labels_(std::move(labels)), tau_(tau) {
    if (design_.rows() != labels_.size())
      throw std::invalid_argument("logistic: row/label count mismatch");
    if (!(tau_ > 0.0)) throw std::invalid_argument("logistic: prior precision must be positive");
    for (Eigen::Index i = 0; i < labels_.size(); ++i)
      if (labels_(i) != 0.0 && labels_(i) != 1.0)
        throw std::invalid_argument("logistic: labels must be 0/1");
    lipschitz_ = tau_ + 0.25 * gram_largest_eigenvalue();
    double cubes = 0.0;
    for (Eigen::Index i = 0; i < design_.rows(); ++i)
      cubes += std::pow(design_.row(i).norm(), 3);
    hessian_lipschitz_ = cubes / (6.0 * std::sqrt(3.0));
  }

  int dim() const override { return static_cast<int>(design_.cols()); }
  double strong_convexity() const override { return tau_; }
  double grad_lipschitz() const override { return lipschitz_; }
  double hessian_lipschitz() const override { return hessian_lipschitz_; }

  bool has_value() const override { return true; }
  double value(const Eigen::VectorXd& theta) const override {
    check_dim(theta);
    const Eigen::VectorXd z = design_ * theta;
    double f = 0.5 * tau_ * theta.squaredNorm();
    for (Eigen::Index i = 0; i < z.size(); ++i) {
      // log(1+e^z) evaluated without overflow
      const double zi = z(i);
      f += (zi > 0.0 ? zi + std::log1p(std::exp(-zi)) : std::log1p(std::exp(zi)));
      f -= labels_(i) * zi;
    }
    return f;
  }

  Eigen::VectorXd gradient(const Eigen::VectorXd& theta) const override {
    check_dim(theta);
    const Eigen::VectorXd z = design_ * theta;
    Eigen::VectorXd r(z.size());
    for (Eigen::Index i = 0; i < z.size(); ++i) r(i) = sigmoid(z(i)) - labels_(i);
    return design_.transpose() * r + tau_ * theta;
  }

  bool has_hvp() const override { return true; }
  Eigen::VectorXd hessian_vector_product(const Eigen::VectorXd& theta,
                                         const Eigen::VectorXd& v) const override {
    check_dim(theta);
    check_dim(v);
    const Eigen::VectorXd z = design_ * theta;
    Eigen::VectorXd w = design_ * v;
    for (Eigen::Index i = 0; i < z.size(); ++i) {
      const double s = sigmoid(z(i));
      w(i) *= s * (1.0 - s);
    }
    return design_.transpose() * w + tau_ * v;
  }

  const Eigen::MatrixXd& design() const { return design_; }

 private:
  static double sigmoid(double z) { return z > 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z)); }

  double gram_largest_eigenvalue() const {
    // power iteration on X'X
    Eigen::VectorXd v = Eigen::VectorXd::Ones(design_.cols()).normalized();
    double prev = 0.0;
    for (int it = 0; it < 1000; ++it) {
      Eigen::VectorXd w = design_.transpose() * (design_ * v);
      const double norm = w.norm();
      if (norm == 0.0) return 0.0;
      v = w / norm;
      if (std::abs(norm - prev) <= 1e-12 * norm) return norm;
      prev = norm;
    }
    return prev;
  }

  Eigen::MatrixXd design_;
  Eigen::VectorXd labels_;
  double tau_;
  double lipschitz_ = 0.0;
  double hessian_lipschitz_ = 0.0;
};

/// Reads a (features..., label) CSV: optional header row, comma separated,
/// final column is the binary label. Features are standardized to zero mean
/// and unit variance before the model constants are computed.
inline LogisticRegressionTarget load_logistic_csv(const std::string& path, double tau,
                                                  bool standardize = true) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open dataset: " + path);
  std::vector<std::vector<double>> rows;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    bool numeric = true;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t pos = 0;
        row.push_back(std::stod(cell, &pos));
      } catch (const std::exception&) {
        numeric = false;
        break;
      }
    }
    if (!numeric) {
      if (first) { first = false; continue; }  // header row
      throw std::runtime_error("non-numeric row in dataset: " + path);
    }
    first = false;
    if (!rows.empty() && row.size() != rows.front().size())
      throw std::runtime_error("ragged rows in dataset: " + path);
    rows.push_back(std::move(row));
  }
  if (rows.empty() || rows.front().size() < 2)
    throw std::runtime_error("dataset needs at least one feature column and a label: " + path);

  const Eigen::Index n = static_cast<Eigen::Index>(rows.size());
  const Eigen::Index p = static_cast<Eigen::Index>(rows.front().size()) - 1;
  Eigen::MatrixXd design(n, p);
  Eigen::VectorXd labels(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < p; ++j) design(i, j) = rows[i][j];
    labels(i) = rows[i][p];
  }
  if (standardize) {
    for (Eigen::Index j = 0; j < p; ++j) {
      const double mean = design.col(j).mean();
      design.col(j).array() -= mean;
      const double sd = std::sqrt(design.col(j).squaredNorm() / static_cast<double>(n));
      if (sd > 0.0) design.col(j) /= sd;
    }
  }
  return LogisticRegressionTarget(std::move(design), std::move(labels), tau);
}

}  // namespace klmc
