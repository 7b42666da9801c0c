#include <doctest.h>

#include <cmath>

#include "meritflow/stationarity.hpp"
#include "test_helpers.hpp"

using namespace meritflow;
using meritflow::testing::identity_instance;
using meritflow::testing::random_matrix;

namespace {

int verdict_level(Verdict v) {
  switch (v) {
    case Verdict::NotStationary: return 0;
    case Verdict::InfeasibleMeritStationary: return 1;
    case Verdict::FOSP: return 2;
    case Verdict::SOSP: return 3;
    case Verdict::RankDeficientSOSPGlobalMin: return 4;
  }
  return 0;
}

/// Block-antidiagonal instance: A_i = [[0, C_i], [C_i^T, 0]] and U supported
/// on the top block rows, so <A_i U, U> = 0 and the multipliers vanish while
/// the constraint Jacobian stays full-rank. With b = 0, U is feasible and the
/// restricted Hessian is the identity form.
struct ZeroMultiplierFixture {
  Instance inst;
  Matrix U;
};

ZeroMultiplierFixture zero_multiplier_fixture() {
  const int half = 2, d = 4, p = 2, m = 2;
  std::vector<Matrix> mats;
  for (int i = 0; i < m; ++i) {
    const Matrix C = random_matrix(half, half, 4000 + static_cast<std::uint64_t>(i));
    Matrix A = Matrix::Zero(d, d);
    A.topRightCorner(half, half) = C;
    A.bottomLeftCorner(half, half) = C.transpose();
    mats.push_back(A);
  }
  Matrix U = Matrix::Zero(d, p);
  U.topRows(half) = random_matrix(half, p, 4100);
  Instance inst(MeasurementOperator(std::move(mats)), Vector::Zero(m), p);
  return {std::move(inst), std::move(U)};
}

}  // namespace

TEST_CASE("numerical rank: zero, single column, planted factor rank") {
  CHECK(numerical_rank(Matrix::Zero(5, 3)) == 0);
  Matrix one_col = Matrix::Zero(5, 3);
  one_col.col(1) = random_matrix(5, 1, 90).col(0);
  CHECK(numerical_rank(one_col) == 1);

  const Matrix B = random_matrix(6, 2, 91);
  const Matrix C = random_matrix(4, 2, 92);
  CHECK(numerical_rank(B * C.transpose()) == 2);

  CHECK_THROWS_AS(numerical_rank(B, 0.0), InvalidDimension);
}

TEST_CASE("manifold gradient: identity family and zero factor") {
  auto inst = identity_instance(4, 2, 1.0);
  const Matrix U = random_matrix(4, 2, 93);
  CHECK(manifold_gradient(inst, U, 0.0).norm() <= 1e-13 * U.norm());
  CHECK(manifold_gradient(inst, Matrix::Zero(4, 2), 0.0).norm() == 0.0);
}

TEST_CASE("manifold gradient equals the dense tangent-projection oracle") {
  const Instance inst = generate_instance(5, 6, 3, kDefaultXi, 94);
  // Near-feasible point via the Gauss-Newton projection.
  const auto proj = project_to_manifold(inst, random_matrix(5, 3, 95), 100, 1e-12, 0.0);
  REQUIRE(proj.status == ProjectionStatus::Converged);
  const Matrix& U = proj.factor;

  const Matrix J = dg_matrix(inst.op, U);
  const Vector rhs = J * vec(U);
  const Vector x = (J * J.transpose()).ldlt().solve(rhs);
  const Matrix oracle = unvec(vec(U) - J.transpose() * x, 5, 3);
  const Matrix got = manifold_gradient(inst, U, 0.0);
  CHECK((got - oracle).norm() <= 1e-8 * (1.0 + oracle.norm()));
}

TEST_CASE("tangent basis: identity family and defining properties") {
  auto ident = identity_instance(3, 2, 1.0);
  const Matrix U = random_matrix(3, 2, 96);
  const Matrix B = tangent_basis(ident, U);
  CHECK(B.cols() == 5);
  CHECK((B.transpose() * vec(U)).norm() <= 1e-10 * U.norm());

  const Instance inst = generate_instance(4, 5, 2, kDefaultXi, 97);
  const Matrix V = random_matrix(4, 2, 98);
  const Matrix BV = tangent_basis(inst, V);
  CHECK(BV.cols() == 4 * 2 - 5);
  CHECK((dg_matrix(inst.op, V) * BV).norm() <= 1e-10);
  CHECK((BV.transpose() * BV - Matrix::Identity(BV.cols(), BV.cols())).norm() <= 1e-12);
}

TEST_CASE("tangent basis rejects rank-deficient constraints") {
  const Instance inst = generate_instance(4, 5, 2, kDefaultXi, 99);
  CHECK_THROWS_AS(tangent_basis(inst, Matrix::Zero(4, 2)), RankDeficientConstraints);
}

TEST_CASE("restricted Hessian: identity family vanishes, zero multipliers give 1") {
  auto ident = identity_instance(4, 2, 2.0);
  Matrix U = random_matrix(4, 2, 100);
  U *= std::sqrt(2.0) / U.norm();  // feasible
  CHECK(std::abs(restricted_hessian_min_eig(ident, U, 0.0)) <= 1e-10);

  const auto fixture = zero_multiplier_fixture();
  const double eig = restricted_hessian_min_eig(fixture.inst, fixture.U, 0.0);
  CHECK(eig == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("restricted Hessian is a certified lower bound over sampled tangent directions") {
  const Instance inst = generate_instance(4, 3, 2, kDefaultXi, 101);
  const Matrix U = random_matrix(4, 2, 102);
  const double eig = restricted_hessian_min_eig(inst, U, 1e-9);
  const Matrix B = tangent_basis(inst, U);
  const Multipliers lam = multipliers(inst, U, 1e-9);
  const Matrix S = Matrix::Identity(4, 4) - adjoint(inst.op, lam.values);

  GaussianSampler sampler(103);
  double sampled_min = std::numeric_limits<double>::infinity();
  for (int trial = 0; trial < 100000; ++trial) {
    Vector coeff(B.cols());
    for (Eigen::Index i = 0; i < coeff.size(); ++i) coeff(i) = sampler.next();
    const Matrix Delta = unvec(B * coeff.normalized(), 4, 2);
    const double quad = (Delta.array() * (S * Delta).array()).sum();
    sampled_min = std::min(sampled_min, quad);
  }
  CHECK(sampled_min >= eig - 1e-6);   // sampling upper-bounds the minimum
  CHECK(sampled_min >= eig - 1e-12);  // and can never beat the eigenvalue
}

TEST_CASE("classify: identity-family global minimum and far-from-feasible point") {
  auto ident = identity_instance(4, 2, 2.0);
  Matrix U = Matrix::Zero(4, 2);
  U.col(0) = random_matrix(4, 1, 104).col(0);
  U *= std::sqrt(2.0) / U.norm();  // feasible, rank 1 < p
  const StationarityReport report = classify(ident, U, {100.0, 0.0});
  CHECK(report.verdict == Verdict::RankDeficientSOSPGlobalMin);
  CHECK(report.num_rank == 1);
  CHECK(report.feas_residual <= 1e-12);

  const Instance rnd = generate_instance(5, 6, 3, kDefaultXi, 105);
  const Matrix far = 10.0 * random_matrix(5, 3, 106);
  CHECK(classify(rnd, far, {100.0, 1e-9}).verdict == Verdict::NotStationary);
}

TEST_CASE("classify: full-rank feasible identity-family point is SOSP, not global") {
  auto ident = identity_instance(4, 2, 2.0);
  Matrix U = random_matrix(4, 2, 107);
  U *= std::sqrt(2.0) / U.norm();  // generic: full rank 2 = p
  const StationarityReport report = classify(ident, U, {100.0, 0.0});
  CHECK(report.verdict == Verdict::SOSP);
  CHECK(report.num_rank == 2);
}

TEST_CASE("classify: verdicts are monotone when tolerances loosen") {
  ClassifyTols tight;
  ClassifyTols loose;
  loose.tol_grad = tight.tol_grad * 10.0;
  loose.tol_feas_scale = tight.tol_feas_scale * 10.0;
  loose.tol_eig = tight.tol_eig * 10.0;

  for (std::uint64_t trial = 0; trial < 6; ++trial) {
    const Instance inst = generate_instance(4, 3, 2, kDefaultXi, 1400 + trial);
    Matrix U = random_matrix(4, 2, 1500 + trial);
    if (trial % 2 == 0) {
      const auto proj = project_to_manifold(inst, U, 100, 1e-12);
      U = proj.factor;
    }
    const MeritParams params{100.0, 1e-9};
    const int tight_level = verdict_level(classify(inst, U, params, tight).verdict);
    const int loose_level = verdict_level(classify(inst, U, params, loose).verdict);
    CHECK(loose_level >= tight_level);
  }
}

TEST_CASE("classify: rotation invariance of the reported residuals") {
  const Instance inst = generate_instance(5, 6, 3, kDefaultXi, 108);
  const Matrix U = random_matrix(5, 3, 109);
  const Matrix Q = Eigen::HouseholderQR<Matrix>(random_matrix(3, 3, 110)).householderQ();
  const MeritParams params{100.0, 1e-9};
  const StationarityReport a = classify(inst, U, params);
  const StationarityReport b = classify(inst, U * Q, params);
  CHECK(std::abs(a.feas_residual - b.feas_residual) <= 1e-10 * (1.0 + a.feas_residual));
  CHECK(std::abs(a.merit_grad_norm - b.merit_grad_norm) <=
        1e-10 * (1.0 + a.merit_grad_norm));
  CHECK(std::abs(a.manifold_grad_norm - b.manifold_grad_norm) <=
        1e-10 * (1.0 + a.manifold_grad_norm));
  CHECK(a.num_rank == b.num_rank);
  CHECK(std::abs(a.spectral_norm - b.spectral_norm) <= 1e-10 * (1.0 + a.spectral_norm));
  REQUIRE(a.min_restricted_hessian_eig.has_value());
  REQUIRE(b.min_restricted_hessian_eig.has_value());
  CHECK(std::abs(*a.min_restricted_hessian_eig - *b.min_restricted_hessian_eig) <=
        1e-10 * (1.0 + std::abs(*a.min_restricted_hessian_eig)));
  CHECK(a.verdict == b.verdict);
}

TEST_CASE("dual certificate: identity-family soundness") {
  const double c = 3.0;
  auto inst = identity_instance(4, 2, c);

  // Any PSD matrix with trace c certifies with lambda = 1 (S = 0).
  Vector lam(1);
  lam(0) = 1.0;
  Matrix R = random_matrix(4, 4, 111);
  Matrix X = R * R.transpose();
  X *= c / X.trace();
  const CertificateReport good = dual_certificate(inst, X, lam);
  CHECK(good.certified);
  CHECK(good.min_eig_certificate == doctest::Approx(0.0));

  // Zero certificate with b != 0 fails on primal feasibility.
  const CertificateReport bad =
      dual_certificate(inst, Matrix::Zero(4, 4), Vector::Zero(1));
  CHECK_FALSE(bad.certified);
  CHECK(bad.primal_feas == doctest::Approx(c));

  // Randomized soundness: certified iff trace matches and X is PSD.
  for (std::uint64_t trial = 0; trial < 20; ++trial) {
    Matrix G = random_matrix(4, 4, 1600 + trial);
    Matrix Xr = G * G.transpose();
    const bool break_trace = trial % 2 == 0;
    const bool break_psd = trial % 3 == 0;
    if (!break_trace) Xr *= c / Xr.trace();
    if (break_psd) Xr -= 0.5 * Matrix::Identity(4, 4);
    const CertificateReport rep = dual_certificate(inst, Xr, lam);
    const bool trace_ok = std::abs(Xr.trace() - c) <= 1e-6;
    Eigen::SelfAdjointEigenSolver<Matrix> es(Xr, Eigen::EigenvaluesOnly);
    const bool psd_ok = es.eigenvalues()(0) >= -1e-6;
    CHECK(rep.certified == (trace_ok && psd_ok));
  }
}

TEST_CASE("project_to_manifold: feasible input returns unchanged") {
  auto ident = identity_instance(4, 2, 2.0);
  Matrix U = random_matrix(4, 2, 112);
  U *= std::sqrt(2.0) / U.norm();
  const auto result = project_to_manifold(ident, U, 50, 1e-12);
  CHECK(result.status == ProjectionStatus::Converged);
  CHECK(result.distance <= 1e-12);
  CHECK(result.g_norm <= 1e-12);
}

TEST_CASE("project_to_manifold: identity family reduces to the radial projection") {
  const double c = 2.0;
  auto ident = identity_instance(5, 3, c);
  const Matrix U = 1.7 * random_matrix(5, 3, 113);
  const auto result = project_to_manifold(ident, U, 100, 1e-13, 0.0);
  CHECK(result.status == ProjectionStatus::Converged);
  const double expected_dist = std::abs(U.norm() - std::sqrt(c));
  CHECK(std::abs(result.distance - expected_dist) <= 1e-10 * (1.0 + expected_dist));
}

TEST_CASE("project_to_manifold: converges from near-feasible random starts") {
  for (std::uint64_t trial = 0; trial < 5; ++trial) {
    const Instance inst = generate_instance(8, 10, 4, kDefaultXi, 1700 + trial);
    // Project a random point, then perturb within 5% of ||b||.
    const auto base =
        project_to_manifold(inst, random_matrix(8, 4, 1800 + trial), 200, 1e-12);
    if (base.status != ProjectionStatus::Converged) continue;
    const Matrix noise = random_matrix(8, 4, 1900 + trial);
    double tau = 0.01;
    Matrix U = base.factor + tau * noise;
    while (feas_gap(inst, U) > 0.05 * inst.b.norm() && tau > 1e-8) {
      tau /= 2.0;
      U = base.factor + tau * noise;
    }
    REQUIRE(feas_gap(inst, U) <= 0.05 * inst.b.norm());
    const auto result = project_to_manifold(inst, U, 200, 1e-10);
    CHECK(result.status == ProjectionStatus::Converged);
    CHECK(result.g_norm <= 1e-10);
  }
}
