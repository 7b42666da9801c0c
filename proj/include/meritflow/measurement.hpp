#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "meritflow/types.hpp"

namespace meritflow {

/// Linear measurement map A : S^d -> R^m, X -> [<A_1,X>, ..., <A_m,X>]
/// built from m dense symmetric d x d matrices.
///
/// Construction symmetrizes each input via (A + A^T)/2; afterwards every
/// stored matrix equals its transpose bit-for-bit and downstream code relies
/// on that. Immutable once built, safe to share across threads.
class MeasurementOperator {
 public:
  explicit MeasurementOperator(std::vector<Matrix> matrices);

  int d() const { return d_; }
  int m() const { return m_; }

  const Matrix& matrix(int i) const { return matrices_[static_cast<std::size_t>(i)]; }
  const std::vector<Matrix>& matrices() const { return matrices_; }

  /// m x d^2, row i = vec(A_i). Backs the fast apply/adjoint paths.
  const Matrix& flat() const { return flat_; }

  /// (m*d) x d, rows [i*d, (i+1)*d) = A_i. Backs the Jacobian assembly.
  const Matrix& stacked() const { return stacked_; }

 private:
  int d_ = 0;
  int m_ = 0;
  std::vector<Matrix> matrices_;
  Matrix flat_;
  Matrix stacked_;
};

/// Problem data for  min ||U||_F^2  s.t.  A(UU^T) = b,  ||U|| <= xi,
/// with U in R^{d x p}.
struct Instance {
  MeasurementOperator op;
  Vector b;
  int p = 1;
  double xi = kDefaultXi;
  std::optional<std::uint64_t> seed;

  Instance(MeasurementOperator op_, Vector b_, int p_, double xi_ = kDefaultXi,
           std::optional<std::uint64_t> seed_ = std::nullopt);

  int d() const { return op.d(); }
  int m() const { return op.m(); }
};

/// A(X) = [<A_1,X>, ..., <A_m,X>] with the trace inner product.
Vector apply(const MeasurementOperator& op, const Matrix& X);

/// A*(lambda) = sum_i lambda_i A_i; exactly symmetric.
Matrix adjoint(const MeasurementOperator& op, const Vector& lambda);

/// Dg(U)[Delta] = A(Delta U^T), the derivative of U -> (1/2) A(UU^T).
Vector dg_apply(const MeasurementOperator& op, const Matrix& U, const Matrix& Delta);

/// (Dg(U))*[delta] = A*(delta) U = sum_i delta_i A_i U.
Matrix dg_adjoint(const MeasurementOperator& op, const Matrix& U, const Vector& delta);

/// Dense m x (d*p) Jacobian of Dg(U): row i = vec(A_i U), column-major vec.
Matrix dg_matrix(const MeasurementOperator& op, const Matrix& U);

/// Gram matrix K(U) = [<A_i U, A_j U>], symmetric PSD.
Matrix gram(const MeasurementOperator& op, const Matrix& U);

/// sigma_m(Dg(U)) = sqrt(lambda_min(K(U))). Positive iff rank(Dg(U)) = m,
/// the constraint-qualification condition at U.
double sigma_min_dg(const MeasurementOperator& op, const Matrix& U);

/// Seeded random instance: each A_i has its upper triangle (diagonal
/// included) drawn i.i.d. N(0,1) and mirrored; b is standard Gaussian,
/// drawn after the matrices from the same stream. Deterministic in `seed`.
Instance generate_instance(int d, int m, int p, double xi, std::uint64_t seed);

/// Pataki width: smallest p with p >= sqrt(2m), the over-parametrization at
/// which the convex relaxation is guaranteed tight.
int pataki_width(int m);

}  // namespace meritflow
