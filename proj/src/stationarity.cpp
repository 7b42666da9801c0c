#include "meritflow/stationarity.hpp"

#include <cmath>
#include <limits>

namespace meritflow {

std::string to_string(Verdict v) {
  switch (v) {
    case Verdict::NotStationary: return "NotStationary";
    case Verdict::InfeasibleMeritStationary: return "InfeasibleMeritStationary";
    case Verdict::FOSP: return "FOSP";
    case Verdict::SOSP: return "SOSP";
    case Verdict::RankDeficientSOSPGlobalMin: return "RankDeficientSOSP_GlobalMin";
  }
  return "NotStationary";
}

int numerical_rank(const Matrix& U, double rel_tol) {
  if (!(rel_tol > 0.0 && rel_tol < 1.0)) throw InvalidDimension("rel_tol must be in (0,1)");
  Eigen::JacobiSVD<Matrix> svd(U);
  const Vector& sv = svd.singularValues();
  if (sv.size() == 0) return 0;
  const double cutoff = rel_tol * sv(0);
  int rank = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i)
    if (sv(i) > cutoff) ++rank;
  return rank;
}

Matrix manifold_gradient(const Instance& inst, const Matrix& U, double ridge) {
  const Multipliers lam = multipliers(inst, U, ridge);
  return U - adjoint(inst.op, lam.values) * U;
}

Matrix tangent_basis(const Instance& inst, const Matrix& U) {
  const int dp = inst.d() * inst.p;
  const int m = inst.m();
  if (m > dp) throw RankImpossible("no tangent space: m exceeds d*p");
  if (sigma_min_dg(inst.op, U) <= 1e-10)
    throw RankDeficientConstraints("constraint Jacobian rank-deficient at U");
  const Matrix J = dg_matrix(inst.op, U);
  Eigen::JacobiSVD<Matrix> svd(J, Eigen::ComputeFullV);
  return svd.matrixV().rightCols(dp - m);
}

double restricted_hessian_min_eig(const Instance& inst, const Matrix& U, double ridge) {
  const Matrix B = tangent_basis(inst, U);
  if (B.cols() == 0) return std::numeric_limits<double>::infinity();
  const int d = inst.d();
  const int p = inst.p;
  const Multipliers lam = multipliers(inst, U, ridge);
  const Matrix M = Matrix::Identity(d, d) - adjoint(inst.op, lam.values);
  // (I_p kron M) B, column by column through the d x p reshape.
  Matrix MB(B.rows(), B.cols());
  for (Eigen::Index j = 0; j < B.cols(); ++j) {
    const Matrix Delta = unvec(B.col(j), d, p);
    MB.col(j) = vec((M * Delta).eval());
  }
  Matrix H = B.transpose() * MB;
  H = ((H + H.transpose()) / 2.0).eval();
  Eigen::SelfAdjointEigenSolver<Matrix> es(H, Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}

StationarityReport classify(const Instance& inst, const Matrix& U,
                            const MeritParams& params, const ClassifyTols& tols) {
  StationarityReport report;
  report.feas_residual = feas_gap(inst, U);
  report.merit_grad_norm = merit_gradient(inst, U, params).norm();
  report.manifold_grad_norm = manifold_gradient(inst, U, params.ridge).norm();
  report.num_rank = numerical_rank(U, tols.rank_rel_tol);
  Eigen::JacobiSVD<Matrix> svd(U);
  report.spectral_norm = svd.singularValues().size() > 0 ? svd.singularValues()(0) : 0.0;
  try {
    report.min_restricted_hessian_eig = restricted_hessian_min_eig(inst, U, params.ridge);
  } catch (const RankDeficientConstraints&) {
    report.min_restricted_hessian_eig.reset();
  } catch (const RankImpossible&) {
    report.min_restricted_hessian_eig.reset();
  }

  const double tol_feas = tols.tol_feas_scale * (1.0 + inst.b.norm());
  if (report.merit_grad_norm > tols.tol_grad) {
    report.verdict = Verdict::NotStationary;
  } else if (report.feas_residual > tol_feas) {
    report.verdict = Verdict::InfeasibleMeritStationary;
  } else {
    report.verdict = Verdict::FOSP;
    if (report.min_restricted_hessian_eig &&
        *report.min_restricted_hessian_eig >= -tols.tol_eig) {
      report.verdict = Verdict::SOSP;
      if (report.num_rank < inst.p && report.spectral_norm < inst.xi)
        report.verdict = Verdict::RankDeficientSOSPGlobalMin;
    }
  }
  return report;
}

CertificateReport dual_certificate(const Instance& inst, const Matrix& X_bar,
                                   const Vector& lambda_bar, double tol) {
  if (X_bar.rows() != inst.d() || X_bar.cols() != inst.d())
    throw InvalidDimension("certificate: X must be d x d");
  if (lambda_bar.size() != inst.m())
    throw InvalidDimension("certificate: lambda must have length m");

  CertificateReport report;
  const Matrix S = Matrix::Identity(inst.d(), inst.d()) - adjoint(inst.op, lambda_bar);
  Eigen::SelfAdjointEigenSolver<Matrix> es_s(S, Eigen::EigenvaluesOnly);
  report.min_eig_certificate = es_s.eigenvalues()(0);
  report.complementarity = (S * X_bar).norm();
  report.primal_feas = (apply(inst.op, X_bar) - inst.b).norm();
  Eigen::SelfAdjointEigenSolver<Matrix> es_x(X_bar, Eigen::EigenvaluesOnly);
  const double x_min = es_x.eigenvalues()(0);
  const double x_max = es_x.eigenvalues()(inst.d() - 1);
  report.psd_violation = std::max(0.0, -x_min);
  report.cap_violation = std::max(0.0, x_max - inst.xi * inst.xi);
  // The cap must hold strictly; "strict" is operationalized as a tol margin.
  report.certified = report.min_eig_certificate >= -tol && report.complementarity <= tol &&
                     report.primal_feas <= tol && report.psd_violation <= tol &&
                     x_max <= inst.xi * inst.xi - tol;
  return report;
}

ProjectionResult project_to_manifold(const Instance& inst, const Matrix& U,
                                     std::size_t max_iter, double tol, double ridge) {
  ProjectionResult result;
  Matrix V = U;
  Vector g = g_value(inst, V);
  double g_norm = g.norm();
  result.status = ProjectionStatus::MaxIterations;

  for (std::size_t iter = 0; iter < max_iter; ++iter) {
    if (g_norm <= tol) {
      result.status = ProjectionStatus::Converged;
      break;
    }
    const Matrix J = dg_matrix(inst.op, V);
    Matrix K = Matrix::Zero(inst.m(), inst.m());
    K.selfadjointView<Eigen::Lower>().rankUpdate(J);
    K = K.selfadjointView<Eigen::Lower>();
    GramSolver solver(K, ridge);
    const Matrix step = unvec(J.transpose() * solver.solve(g), inst.d(), inst.p);

    double t = 1.0;
    bool accepted = false;
    for (int halving = 0; halving <= 20; ++halving) {
      const Matrix candidate = V - t * step;
      const Vector g_candidate = g_value(inst, candidate);
      if (g_candidate.norm() < g_norm) {
        V = candidate;
        g = g_candidate;
        g_norm = g.norm();
        accepted = true;
        break;
      }
      t /= 2.0;
    }
    result.iterations = iter + 1;
    if (!accepted) {
      result.status = ProjectionStatus::Stagnated;
      break;
    }
    if (g_norm <= tol) {
      result.status = ProjectionStatus::Converged;
      break;
    }
  }
  if (g_norm <= tol) result.status = ProjectionStatus::Converged;

  result.factor = std::move(V);
  result.g_norm = g_norm;
  result.distance = (U - result.factor).norm();
  return result;
}

}  // namespace meritflow
