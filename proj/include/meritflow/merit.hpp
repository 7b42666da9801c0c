#pragma once

#include "meritflow/measurement.hpp"
#include "meritflow/types.hpp"

namespace meritflow {

/// Lagrange multiplier estimate lambda(U,U) together with the ridge used in
/// the Gram solve and the numerical rank the solve saw.
struct Multipliers {
  Vector values;
  double ridge = 0.0;
  /// Rank of K(U) as decided by the solver: truncation rank of the
  /// pseudo-inverse when ridge == 0, m for the regularized solve.
  int gram_rank = 0;
};

struct MeritParams {
  double gamma = 100.0;
  double ridge = kDefaultRidge;
};

/// Solves (K + ridge I) x = rhs when ridge > 0, else pinv(K) rhs with
/// eigenvalues below 1e-12 * lambda_max truncated.
class GramSolver {
 public:
  GramSolver(const Matrix& K, double ridge);

  Vector solve(const Vector& rhs) const;
  int rank() const { return rank_; }

 private:
  double ridge_ = 0.0;
  int rank_ = 0;
  Eigen::LDLT<Matrix> ldlt_;
  Matrix eigenvectors_;
  Vector inv_eigenvalues_;
};

/// f(U) = (1/2)||U||_F^2.
double f_value(const Matrix& U);

/// g(U) = (1/2)(A(UU^T) - b).
Vector g_value(const Instance& inst, const Matrix& U);

/// G(U) = (1/2)||g(U)||^2, the scaled feasibility gap.
double big_g_value(const Instance& inst, const Matrix& U);

/// ||A(UU^T) - b||_2 = 2||g(U)||_2, the gap reported in figures.
double feas_gap(const Instance& inst, const Matrix& U);

/// lambda(U,U) = (K(U) + ridge I)^{-1} A(UU^T); pseudo-inverse when ridge == 0.
Multipliers multipliers(const Instance& inst, const Matrix& U, double ridge);

/// Directional derivative of lambda(U,U) = K(U)^{-1} A(UU^T):
///   D lambda(U,U)[Delta]
///     = K^{-1} ( -(Ktil + Ktil^T) K^{-1} A(UU^T) + 2 A(Delta U^T) ),
/// with Ktil(U,Delta) = [<A_i Delta, A_j U>], so DK(U)[Delta] = Ktil + Ktil^T.
/// Every K-solve carries `ridge`. Guarded by the finite-difference and
/// adjoint-identity suites.
Vector dlambda_apply(const Instance& inst, const Matrix& U, const Matrix& Delta,
                     double ridge);

/// Dense m x (d*p) matrix of D lambda(U,U), assembled column by column over
/// the canonical directions. Desk scale keeps this affordable and it avoids
/// a hand-derived adjoint formula.
Matrix dlambda_matrix(const Instance& inst, const Matrix& U, double ridge);

/// Adjoint of Delta -> dlambda_apply(U, Delta): transpose of dlambda_matrix
/// applied to delta, reshaped to d x p.
Matrix dlambda_adjoint(const Instance& inst, const Matrix& U, const Vector& delta,
                       double ridge);

/// L_gamma(U, lambda') = f(U) - <g(U), lambda'> + (gamma/2)||g(U)||^2.
double aug_lagrangian(const Instance& inst, const Matrix& U, const Vector& lambda,
                      double gamma);

/// Fletcher's augmented Lagrangian h_gamma(U) = L_gamma(U, lambda(U,U)).
double merit_value(const Instance& inst, const Matrix& U, const MeritParams& params);

/// Analytic gradient of h_gamma:
///   (I - A*(lambda))U + (gamma/2) A*(A(UU^T) - b) U
///     - (1/2) (D lambda(U,U))*[A(UU^T) - b].
Matrix merit_gradient(const Instance& inst, const Matrix& U, const MeritParams& params);

/// Gradient of L_gamma in U at fixed lambda':
///   U - sum_i (lambda'_i - (gamma/2)(<A_i, UU^T> - b_i)) A_i U.
/// This is the primal update direction of the discretized flow.
Matrix grad1_aug_lagrangian(const Instance& inst, const Matrix& U, const Vector& lambda,
                            double gamma);

}  // namespace meritflow
