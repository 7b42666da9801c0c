#pragma once

#include <cstddef>

#include "meritflow/measurement.hpp"
#include "meritflow/types.hpp"

namespace meritflow {

struct AdmmParams {
  double rho = 1.0;
  std::size_t max_iter = 50000;
  /// Convergence thresholds on the scaled residuals r/(1 + scale); the
  /// combined absolute-plus-relative test.
  double tol_p = 1e-8;
  double tol_d = 1e-8;
  /// Residual balancing: double/halve rho when one residual dominates.
  bool adapt_rho = true;
};

struct SdpSolution {
  Matrix X;        // d x d, PSD at convergence
  Vector dual_eq;  // multipliers for A(X) = b, signed so I - A*(dual_eq) is PSD
  double value = 0.0;  // tr(X)
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
  /// The {A_i} were detected linearly dependent; the equality projection
  /// fell back to a pseudo-inverse.
  bool gram_singular = false;
};

/// Operator-splitting solver for
///   min tr(X)  s.t.  A(X) = b,  0 <= X <= xi^2 I.
/// X-step: trace + proximal term minimized over {A(X)=b} in closed form via
/// the m x m Gram system of {A_i} (factorized once). Z-step: eigenvalue clip
/// onto the spectral box. W-step: scaled dual ascent.
SdpSolution solve_sdp(const Instance& inst, const AdmmParams& params = {});

/// Projection of a symmetric matrix onto {0 <= Z <= hi I} by clipping
/// eigenvalues to [0, hi].
Matrix psd_box_project(const Matrix& S, double hi);

/// Factor of a PSD matrix: U = V_{1:p} diag(sqrt(s_{1:p})) from the p largest
/// eigenpairs, negative eigenvalues clipped to zero. UU^T = X exactly when
/// rank(X) <= p. Throws NotPsd when lambda_min < -rel_tol * lambda_max.
Factor sqrt_psd(const Matrix& X, int p, double rel_tol = 1e-8);

}  // namespace meritflow
