#pragma once

#include <stdexcept>
#include <string>

namespace klmc {

/// A matrix expected to be (numerically) positive semidefinite is not.
struct IndefiniteMatrix : std::runtime_error {
  explicit IndefiniteMatrix(const std::string& what) : std::runtime_error(what) {}
};

/// The requested operation needs model capabilities that are not available
/// (e.g. Hessian-vector products on a gradient-only target).
struct Unsupported : std::runtime_error {
  explicit Unsupported(const std::string& what) : std::runtime_error(what) {}
};

/// The continuous-time kinetic diffusion does not contract for the given
/// friction (gamma^2 <= M).
struct NoContraction : std::runtime_error {
  explicit NoContraction(const std::string& what) : std::runtime_error(what) {}
};

/// A measured decay has not entered its asymptotic regime within the horizon.
struct PreAsymptotic : std::runtime_error {
  explicit PreAsymptotic(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace klmc
