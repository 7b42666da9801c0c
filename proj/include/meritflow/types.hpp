#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <stdexcept>

namespace meritflow {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// The d x p iterate U of the factorized variable UU^T.
using Factor = Eigen::MatrixXd;

// Spectral-norm cap large enough that it never binds in practice.
inline constexpr double kDefaultXi = 1e6;

// Stabilizer added to the Gram matrix in every regularized solve.
inline constexpr double kDefaultRidge = 1e-9;

struct InvalidDimension : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Requested rank exceeds what the operator dimensions allow (m > d*p).
struct RankImpossible : std::logic_error {
  using std::logic_error::logic_error;
};

struct NotPsd : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Partial-oracle initializer requested without a convex solution to draw from.
struct MissingOracle : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Constraint Jacobian is numerically rank-deficient at the query point.
struct RankDeficientConstraints : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline Vector vec(const Matrix& M) {
  return Eigen::Map<const Vector>(M.data(), M.size());
}

inline Matrix unvec(const Vector& v, Eigen::Index rows, Eigen::Index cols) {
  if (v.size() != rows * cols) throw InvalidDimension("unvec: size mismatch");
  return Eigen::Map<const Matrix>(v.data(), rows, cols);
}

}  // namespace meritflow
