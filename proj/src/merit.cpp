#include "meritflow/merit.hpp"

#include <cmath>

namespace meritflow {

GramSolver::GramSolver(const Matrix& K, double ridge) : ridge_(ridge) {
  const int m = static_cast<int>(K.rows());
  if (ridge_ > 0.0) {
    ldlt_.compute(K + ridge_ * Matrix::Identity(m, m));
    rank_ = m;
    return;
  }
  Eigen::SelfAdjointEigenSolver<Matrix> es(K);
  const Vector& vals = es.eigenvalues();
  const double cutoff = 1e-12 * std::max(vals.maxCoeff(), 0.0);
  inv_eigenvalues_ = Vector::Zero(m);
  rank_ = 0;
  for (int i = 0; i < m; ++i) {
    if (vals(i) > cutoff) {
      inv_eigenvalues_(i) = 1.0 / vals(i);
      ++rank_;
    }
  }
  eigenvectors_ = es.eigenvectors();
}

Vector GramSolver::solve(const Vector& rhs) const {
  if (ridge_ > 0.0) return ldlt_.solve(rhs);
  return eigenvectors_ * inv_eigenvalues_.cwiseProduct(eigenvectors_.transpose() * rhs);
}

namespace {

void check_dims(const Instance& inst, const Matrix& U) {
  if (U.rows() != inst.d() || U.cols() != inst.p)
    throw InvalidDimension("factor must be d x p for this instance");
}

Matrix gram_from_jacobian(const Matrix& J) {
  Matrix K = Matrix::Zero(J.rows(), J.rows());
  K.selfadjointView<Eigen::Lower>().rankUpdate(J);
  return K.selfadjointView<Eigen::Lower>();
}

}  // namespace

double f_value(const Matrix& U) { return 0.5 * U.squaredNorm(); }

Vector g_value(const Instance& inst, const Matrix& U) {
  check_dims(inst, U);
  return 0.5 * (apply(inst.op, U * U.transpose()) - inst.b);
}

double big_g_value(const Instance& inst, const Matrix& U) {
  return 0.5 * g_value(inst, U).squaredNorm();
}

double feas_gap(const Instance& inst, const Matrix& U) {
  check_dims(inst, U);
  return (apply(inst.op, U * U.transpose()) - inst.b).norm();
}

Multipliers multipliers(const Instance& inst, const Matrix& U, double ridge) {
  check_dims(inst, U);
  const Matrix J = dg_matrix(inst.op, U);
  GramSolver solver(gram_from_jacobian(J), ridge);
  Multipliers out;
  out.values = solver.solve(J * vec(U));  // J vec(U) = A(UU^T)
  out.ridge = ridge;
  out.gram_rank = solver.rank();
  return out;
}

Vector dlambda_apply(const Instance& inst, const Matrix& U, const Matrix& Delta,
                     double ridge) {
  check_dims(inst, U);
  check_dims(inst, Delta);
  const Matrix J = dg_matrix(inst.op, U);
  GramSolver solver(gram_from_jacobian(J), ridge);
  const Vector mu = solver.solve(J * vec(U));
  const Matrix Jdelta = dg_matrix(inst.op, Delta);  // row i = vec(A_i Delta)
  const Matrix Ktil = Jdelta * J.transpose();       // [<A_i Delta, A_j U>]
  // DK(U)[Delta] = Ktil + Ktil^T (the cross terms do not coincide entrywise).
  return solver.solve(2.0 * (J * vec(Delta)) - Ktil * mu - Ktil.transpose() * mu);
}

Matrix dlambda_matrix(const Instance& inst, const Matrix& U, double ridge) {
  check_dims(inst, U);
  const int d = inst.d();
  const int p = inst.p;
  const int m = inst.m();
  const Matrix J = dg_matrix(inst.op, U);
  GramSolver solver(gram_from_jacobian(J), ridge);
  const Vector mu = solver.solve(J * vec(U));

  const Matrix& stacked = inst.op.stacked();
  Matrix out(m, d * p);
  Matrix col_slices(m, d);  // row i = A_i(:, r) for the current r
  for (int r = 0; r < d; ++r) {
    for (int i = 0; i < m; ++i)
      col_slices.row(i) = stacked.col(r).segment(i * d, d).transpose();
    for (int s = 0; s < p; ++s) {
      const int k = s * d + r;
      // For Delta = e_r e_s^T: Ktil_{ij} = A_i(:,r) . (A_j U)(:,s).
      const Matrix Ktil = col_slices * J.middleCols(s * d, d).transpose();
      out.col(k) = solver.solve(2.0 * J.col(k) - Ktil * mu - Ktil.transpose() * mu);
    }
  }
  return out;
}

Matrix dlambda_adjoint(const Instance& inst, const Matrix& U, const Vector& delta,
                       double ridge) {
  if (delta.size() != inst.m()) throw InvalidDimension("delta must have length m");
  const Matrix Jlambda = dlambda_matrix(inst, U, ridge);
  return unvec(Jlambda.transpose() * delta, inst.d(), inst.p);
}

double aug_lagrangian(const Instance& inst, const Matrix& U, const Vector& lambda,
                      double gamma) {
  if (lambda.size() != inst.m()) throw InvalidDimension("lambda must have length m");
  const Vector g = g_value(inst, U);
  return f_value(U) - g.dot(lambda) + 0.5 * gamma * g.squaredNorm();
}

double merit_value(const Instance& inst, const Matrix& U, const MeritParams& params) {
  const Multipliers lam = multipliers(inst, U, params.ridge);
  return aug_lagrangian(inst, U, lam.values, params.gamma);
}

Matrix merit_gradient(const Instance& inst, const Matrix& U, const MeritParams& params) {
  check_dims(inst, U);
  const Vector r = apply(inst.op, U * U.transpose()) - inst.b;
  const Multipliers lam = multipliers(inst, U, params.ridge);
  const Matrix stationary_part = U - adjoint(inst.op, lam.values) * U;
  const Matrix penalty_part = 0.5 * params.gamma * adjoint(inst.op, r) * U;
  const Matrix multiplier_part = dlambda_adjoint(inst, U, r, params.ridge);
  return stationary_part + penalty_part - 0.5 * multiplier_part;
}

Matrix grad1_aug_lagrangian(const Instance& inst, const Matrix& U, const Vector& lambda,
                            double gamma) {
  check_dims(inst, U);
  if (lambda.size() != inst.m()) throw InvalidDimension("lambda must have length m");
  const Vector r = apply(inst.op, U * U.transpose()) - inst.b;
  const Vector coeff = lambda - 0.5 * gamma * r;
  return U - adjoint(inst.op, coeff) * U;
}

}  // namespace meritflow
