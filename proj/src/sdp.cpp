#include "meritflow/sdp.hpp"

#include <algorithm>
#include <cmath>

#include "meritflow/merit.hpp"

namespace meritflow {

Matrix psd_box_project(const Matrix& S, double hi) {
  if (S.rows() != S.cols()) throw InvalidDimension("projection needs a square matrix");
  Eigen::SelfAdjointEigenSolver<Matrix> es(S);
  Vector clipped = es.eigenvalues();
  for (Eigen::Index i = 0; i < clipped.size(); ++i)
    clipped(i) = std::clamp(clipped(i), 0.0, hi);
  return es.eigenvectors() * clipped.asDiagonal() * es.eigenvectors().transpose();
}

SdpSolution solve_sdp(const Instance& inst, const AdmmParams& params) {
  const int d = inst.d();
  const int m = inst.m();
  const Matrix& flat = inst.op.flat();

  // Frobenius Gram of the constraint matrices, factorized once. The
  // pseudo-inverse path doubles as the linear-dependence fallback.
  Matrix G = Matrix::Zero(m, m);
  G.selfadjointView<Eigen::Lower>().rankUpdate(flat);
  G = G.selfadjointView<Eigen::Lower>();
  GramSolver gram_solver(G, 0.0);

  SdpSolution sol;
  sol.gram_singular = gram_solver.rank() < m;

  const Vector a_of_identity = apply(inst.op, Matrix::Identity(d, d));
  const double cap = inst.xi * inst.xi;

  Matrix X = Matrix::Zero(d, d);
  Matrix Z = Matrix::Zero(d, d);
  Matrix W = Matrix::Zero(d, d);
  Vector mu = Vector::Zero(m);
  double rho = params.rho;

  for (std::size_t k = 1; k <= params.max_iter; ++k) {
    // X-step: min tr(X) + (rho/2)||X - Z + W||^2 over {A(X) = b}.
    const Vector rhs = rho * (inst.b - apply(inst.op, Z - W)) + a_of_identity;
    mu = gram_solver.solve(rhs);
    X = Z - W + (adjoint(inst.op, mu) - Matrix::Identity(d, d)) / rho;

    const Matrix Z_prev = Z;
    Z = psd_box_project(X + W, cap);
    W += X - Z;

    const double r_primal = (X - Z).norm();
    const double r_dual = rho * (Z - Z_prev).norm();
    const double scale_primal = 1.0 + std::max(X.norm(), Z.norm());
    const double scale_dual = 1.0 + rho * W.norm();
    sol.primal_residual = r_primal / scale_primal;
    sol.dual_residual = r_dual / scale_dual;
    sol.iterations = k;

    if (sol.primal_residual <= params.tol_p && sol.dual_residual <= params.tol_d) {
      sol.converged = true;
      break;
    }

    if (params.adapt_rho && k % 10 == 0) {
      if (sol.primal_residual > 10.0 * sol.dual_residual && rho < 1e6) {
        rho *= 2.0;
        W /= 2.0;
      } else if (sol.dual_residual > 10.0 * sol.primal_residual && rho > 1e-6) {
        rho /= 2.0;
        W *= 2.0;
      }
    }
  }

  sol.X = Z;
  sol.dual_eq = mu;
  sol.value = Z.trace();
  return sol;
}

Factor sqrt_psd(const Matrix& X, int p, double rel_tol) {
  if (X.rows() != X.cols()) throw InvalidDimension("sqrt_psd needs a square matrix");
  if (p < 1) throw InvalidDimension("sqrt_psd needs p >= 1");
  const int d = static_cast<int>(X.rows());

  Eigen::SelfAdjointEigenSolver<Matrix> es(((X + X.transpose()) / 2.0).eval());
  const Vector& vals = es.eigenvalues();  // ascending
  const double lam_max = std::max(vals(d - 1), 0.0);
  if (vals(0) < -rel_tol * lam_max && vals(0) < 0.0)
    throw NotPsd("matrix is significantly indefinite");

  Factor U = Matrix::Zero(d, p);
  const int take = std::min(p, d);
  for (int j = 0; j < take; ++j) {
    const int idx = d - 1 - j;  // largest eigenvalues first
    U.col(j) = es.eigenvectors().col(idx) * std::sqrt(std::max(vals(idx), 0.0));
  }
  return U;
}

}  // namespace meritflow
