#include "meritflow/measurement.hpp"

#include <cmath>
#include <utility>

#include "meritflow/random.hpp"

namespace meritflow {

MeasurementOperator::MeasurementOperator(std::vector<Matrix> matrices)
    : matrices_(std::move(matrices)) {
  if (matrices_.empty()) throw InvalidDimension("operator needs at least one matrix");
  d_ = static_cast<int>(matrices_.front().rows());
  m_ = static_cast<int>(matrices_.size());
  if (d_ < 1) throw InvalidDimension("operator dimension must be positive");

  for (Matrix& A : matrices_) {
    if (A.rows() != d_ || A.cols() != d_)
      throw InvalidDimension("operator matrices must all be d x d");
    A = ((A + A.transpose()) / 2.0).eval();
  }
  // Exact symmetry is a construction guarantee the rest of the code leans on.
  for (const Matrix& A : matrices_) {
    if (A != A.transpose()) throw InvalidDimension("symmetrization failed");
  }

  flat_.resize(m_, d_ * d_);
  stacked_.resize(m_ * d_, d_);
  for (int i = 0; i < m_; ++i) {
    flat_.row(i) = vec(matrices_[static_cast<std::size_t>(i)]).transpose();
    stacked_.middleRows(i * d_, d_) = matrices_[static_cast<std::size_t>(i)];
  }
}

Instance::Instance(MeasurementOperator op_, Vector b_, int p_, double xi_,
                   std::optional<std::uint64_t> seed_)
    : op(std::move(op_)), b(std::move(b_)), p(p_), xi(xi_), seed(seed_) {
  if (b.size() != op.m()) throw InvalidDimension("right-hand side length must equal m");
  if (p < 1) throw InvalidDimension("factor width must be positive");
  if (p > op.d())
    throw InvalidDimension("factor width above d is the very over-parametrized regime");
  if (!(xi > 0.0)) throw InvalidDimension("spectral cap xi must be positive");
}

namespace {

void check_factor_dims(const MeasurementOperator& op, const Matrix& U) {
  if (U.rows() != op.d()) throw InvalidDimension("factor row count must equal d");
  if (U.cols() < 1) throw InvalidDimension("factor must have at least one column");
}

}  // namespace

Vector apply(const MeasurementOperator& op, const Matrix& X) {
  if (X.rows() != op.d() || X.cols() != op.d())
    throw InvalidDimension("apply: X must be d x d");
  return op.flat() * vec(X);
}

Matrix adjoint(const MeasurementOperator& op, const Vector& lambda) {
  if (lambda.size() != op.m()) throw InvalidDimension("adjoint: lambda must have length m");
  return unvec(op.flat().transpose() * lambda, op.d(), op.d());
}

Vector dg_apply(const MeasurementOperator& op, const Matrix& U, const Matrix& Delta) {
  check_factor_dims(op, U);
  if (Delta.rows() != U.rows() || Delta.cols() != U.cols())
    throw InvalidDimension("dg_apply: direction must match the factor shape");
  return apply(op, Delta * U.transpose());
}

Matrix dg_adjoint(const MeasurementOperator& op, const Matrix& U, const Vector& delta) {
  check_factor_dims(op, U);
  if (delta.size() != op.m()) throw InvalidDimension("dg_adjoint: delta must have length m");
  return adjoint(op, delta) * U;
}

Matrix dg_matrix(const MeasurementOperator& op, const Matrix& U) {
  check_factor_dims(op, U);
  const int d = op.d();
  const int m = op.m();
  const int p = static_cast<int>(U.cols());
  const Matrix W = op.stacked() * U;  // block i = A_i U
  Matrix J(m, d * p);
  for (int i = 0; i < m; ++i)
    for (int c = 0; c < p; ++c)
      for (int r = 0; r < d; ++r) J(i, c * d + r) = W(i * d + r, c);
  return J;
}

Matrix gram(const MeasurementOperator& op, const Matrix& U) {
  const Matrix J = dg_matrix(op, U);
  Matrix K = Matrix::Zero(op.m(), op.m());
  K.selfadjointView<Eigen::Lower>().rankUpdate(J);
  return K.selfadjointView<Eigen::Lower>();
}

double sigma_min_dg(const MeasurementOperator& op, const Matrix& U) {
  check_factor_dims(op, U);
  if (op.m() > op.d() * static_cast<int>(U.cols()))
    throw RankImpossible("Dg cannot reach rank m when m > d*p");
  Eigen::SelfAdjointEigenSolver<Matrix> es(gram(op, U), Eigen::EigenvaluesOnly);
  return std::sqrt(std::max(es.eigenvalues()(0), 0.0));
}

Instance generate_instance(int d, int m, int p, double xi, std::uint64_t seed) {
  if (d < 1 || m < 1 || p < 1) throw InvalidDimension("d, m, p must be positive");
  if (p > d) throw InvalidDimension("factor width must satisfy p <= d");
  if (!(xi > 0.0)) throw InvalidDimension("spectral cap xi must be positive");

  GaussianSampler sampler(seed);
  std::vector<Matrix> matrices;
  matrices.reserve(static_cast<std::size_t>(m));
  for (int i = 0; i < m; ++i) {
    Matrix A(d, d);
    // Upper triangle (diagonal included) drawn row by row, mirrored below.
    for (int r = 0; r < d; ++r) {
      for (int c = r; c < d; ++c) {
        const double v = sampler.next();
        A(r, c) = v;
        A(c, r) = v;
      }
    }
    matrices.push_back(std::move(A));
  }
  Vector b(m);
  for (int i = 0; i < m; ++i) b(i) = sampler.next();

  return Instance(MeasurementOperator(std::move(matrices)), std::move(b), p, xi, seed);
}

int pataki_width(int m) {
  if (m < 1) throw InvalidDimension("m must be positive");
  return static_cast<int>(std::ceil(std::sqrt(2.0 * m)));
}

}  // namespace meritflow
