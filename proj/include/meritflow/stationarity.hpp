#pragma once

#include <cstddef>
#include <optional>
#include <string>

#include "meritflow/merit.hpp"

namespace meritflow {

enum class Verdict {
  NotStationary,
  InfeasibleMeritStationary,
  FOSP,
  SOSP,
  RankDeficientSOSPGlobalMin,
};

std::string to_string(Verdict v);

struct ClassifyTols {
  double tol_grad = 1e-7;
  /// Feasibility tolerance is tol_feas_scale * (1 + ||b||_2).
  double tol_feas_scale = 1e-6;
  double tol_eig = 1e-8;
  double rank_rel_tol = 1e-7;
};

struct StationarityReport {
  double feas_residual = 0.0;       // ||A(UU^T) - b||_2
  double merit_grad_norm = 0.0;     // ||grad h_gamma(U)||_F
  double manifold_grad_norm = 0.0;  // ||(I - A*(lambda)) U||_F
  /// Smallest eigenvalue of the tangent-restricted Hessian; absent when the
  /// constraint Jacobian is rank-deficient at U.
  std::optional<double> min_restricted_hessian_eig;
  int num_rank = 0;
  double spectral_norm = 0.0;
  Verdict verdict = Verdict::NotStationary;
};

struct CertificateReport {
  double min_eig_certificate = 0.0;  // lambda_min(I - A*(lambda_bar))
  double complementarity = 0.0;      // ||(I - A*(lambda_bar)) X_bar||_F
  double primal_feas = 0.0;          // ||A(X_bar) - b||_2
  double psd_violation = 0.0;        // -min(0, lambda_min(X_bar))
  double cap_violation = 0.0;        // max(0, lambda_max(X_bar) - xi^2)
  bool certified = false;
};

/// Number of singular values above rel_tol * sigma_1 (0 for the zero matrix).
int numerical_rank(const Matrix& U, double rel_tol = 1e-7);

/// Manifold gradient of f at U: (I - A*(lambda(U,U))) U.
Matrix manifold_gradient(const Instance& inst, const Matrix& U, double ridge);

/// Orthonormal basis of null(Dg(U)) as a (d*p) x (d*p - m) matrix, from the
/// full SVD of the assembled Jacobian. Throws RankDeficientConstraints when
/// sigma_min(Dg(U)) <= 1e-10.
Matrix tangent_basis(const Instance& inst, const Matrix& U);

/// lambda_min( B^T (I_p kron (I_d - A*(lambda(U,U)))) B ) with B the tangent
/// basis: the minimum of ||Delta||_F^2 - <A*(lambda), Delta Delta^T> over
/// unit tangent directions.
double restricted_hessian_min_eig(const Instance& inst, const Matrix& U, double ridge);

/// Verdict ladder: NotStationary when the merit gradient is large; else
/// InfeasibleMeritStationary when the feasibility residual is large; else
/// FOSP, upgraded to SOSP when the restricted Hessian is PSD within tol_eig,
/// and to a certified global minimum when additionally U is rank-deficient
/// with ||U|| < xi. All residuals are reported regardless of verdict.
StationarityReport classify(const Instance& inst, const Matrix& U,
                            const MeritParams& params, const ClassifyTols& tols = {});

/// Residuals of the global-optimality system for the convex relaxation:
/// I - A*(lambda_bar) PSD, complementary with X_bar, X_bar primal feasible
/// and strictly inside the spectral cap (lambda_max <= xi^2 - tol).
CertificateReport dual_certificate(const Instance& inst, const Matrix& X_bar,
                                   const Vector& lambda_bar, double tol = 1e-6);

enum class ProjectionStatus { Converged, MaxIterations, Stagnated };

struct ProjectionResult {
  Factor factor;
  double g_norm = 0.0;    // ||g(V)|| at the returned iterate
  double distance = 0.0;  // ||U - V||_F, a surrogate for dist(U, M_b)
  ProjectionStatus status = ProjectionStatus::Converged;
  std::size_t iterations = 0;
};

/// Damped Gauss-Newton on g: V <- V - (Dg(V))*[(K(V) + ridge I)^{-1} g(V)]
/// with a halving line search on ||g||. Stagnates (status Stagnated) when 20
/// halvings produce no decrease; the best iterate is always returned.
ProjectionResult project_to_manifold(const Instance& inst, const Matrix& U,
                                     std::size_t max_iter = 100, double tol = 1e-12,
                                     double ridge = kDefaultRidge);

}  // namespace meritflow
