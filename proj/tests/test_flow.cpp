#include <doctest.h>

#include <cmath>

#include "meritflow/flow.hpp"
#include "meritflow/sdp.hpp"
#include "meritflow/stationarity.hpp"
#include "test_helpers.hpp"

using namespace meritflow;
using meritflow::testing::identity_instance;
using meritflow::testing::random_matrix;

namespace {

/// Near-feasible start with feas_gap <= frac * ||b||, built by Gauss-Newton
/// projection plus a small perturbation. Retries seeds until the projection
/// lands; deterministic given `seed`.
Factor near_feasible_start(const Instance& inst, std::uint64_t seed, double frac,
                           int rank = 0) {
  for (std::uint64_t attempt = 0; attempt < 20; ++attempt) {
    Matrix U0 = random_matrix(inst.d(), inst.p, seed + 37 * attempt);
    if (rank > 0 && rank < inst.p) {
      const Matrix B = random_matrix(inst.d(), rank, seed + 37 * attempt + 11);
      const Matrix C = random_matrix(inst.p, rank, seed + 37 * attempt + 23);
      U0 = B * C.transpose();
    }
    const auto proj = project_to_manifold(inst, U0, 300, 1e-11);
    if (proj.status != ProjectionStatus::Converged) continue;
    if (feas_gap(inst, proj.factor) > frac * inst.b.norm()) continue;
    return proj.factor;
  }
  throw std::runtime_error("no near-feasible start found");
}

/// Rank-preserving nudge off the manifold, shrunk until the gap target holds.
Factor nudge_within_gap(const Instance& inst, const Factor& U, std::uint64_t seed,
                        double frac) {
  double tau = 0.01;
  const Matrix noise = random_matrix(inst.d(), inst.p, seed);
  for (int i = 0; i < 40; ++i) {
    const Factor candidate = U + tau * noise;
    if (feas_gap(inst, candidate) <= frac * inst.b.norm()) return candidate;
    tau /= 2.0;
  }
  return U;
}

}  // namespace

TEST_CASE("merit_flow_step: fixed point on the identity-family sphere") {
  const double c = 2.0;
  auto inst = identity_instance(4, 2, c);
  Matrix U = random_matrix(4, 2, 120);
  U *= std::sqrt(c) / U.norm();
  FlowParams params;
  params.eta = 1e-2;
  params.ridge = 0.0;
  const auto [next, lambda] = merit_flow_step(inst, U, params);
  CHECK(lambda(0) == doctest::Approx(1.0).epsilon(1e-13));
  CHECK((next - U).norm() <= 1e-13 * U.norm());
}

TEST_CASE("merit_flow_step: zero step size leaves the factor unchanged") {
  const Instance inst = generate_instance(5, 6, 3, kDefaultXi, 121);
  const Matrix U = random_matrix(5, 3, 122);
  FlowParams params;
  params.eta = 0.0;
  const auto [next, lambda] = merit_flow_step(inst, U, params);
  CHECK(next == U);
}

TEST_CASE("merit flow follows the scalar radial recursion on the identity family") {
  const double c = 2.0, gamma = 100.0, eta = 1e-3, ridge = 1e-9;
  auto inst = identity_instance(5, 3, c);
  Matrix U = random_matrix(5, 3, 123);
  U *= 1.0 / U.norm();  // s_0 = 1
  double s = 1.0;
  FlowParams params;
  params.gamma = gamma;
  params.eta = eta;
  params.ridge = ridge;
  for (int k = 0; k < 2000; ++k) {
    const auto [next, lambda] = merit_flow_step(inst, U, params);
    const double lam = s / (s + ridge);
    const double psi = 1.0 - eta + eta * (lam - 0.5 * gamma * (s - c));
    s = psi * psi * s;
    U = next;
    CHECK(std::abs(0.5 * U.squaredNorm() - 0.5 * s) <= 1e-10 * (1.0 + s));
  }
  // The radial dynamics settle on the feasible sphere.
  CHECK(std::abs(U.squaredNorm() - c) <= 1e-6);
}

TEST_CASE("run_merit_flow: feasible stationary start stops immediately") {
  const double c = 2.0;
  auto inst = identity_instance(4, 2, c);
  Matrix U = random_matrix(4, 2, 124);
  U *= std::sqrt(c) / U.norm();
  FlowParams params;
  params.ridge = 0.0;
  const FlowTrajectory traj = run_merit_flow(inst, U, params);
  CHECK(traj.stop_reason == StopReason::GradientTolerance);
  CHECK(traj.iterations <= 1);
  CHECK(traj.records.back().grad_norm <= params.tol_grad);
}

TEST_CASE("run_merit_flow: diverges safely on an oversized step") {
  const Instance inst = generate_instance(5, 6, 3, kDefaultXi, 125);
  FlowParams params;
  params.eta = 10.0;
  params.max_iter = 1000;
  const FlowTrajectory traj = run_merit_flow(inst, 3.0 * random_matrix(5, 3, 126), params);
  CHECK(traj.stop_reason == StopReason::Diverged);
  CHECK(!traj.records.empty());
  CHECK(traj.final_factor.allFinite());
}

TEST_CASE("run_merit_flow: trajectories are bit-identical across runs") {
  const Instance inst = generate_instance(5, 6, 3, kDefaultXi, 127);
  const Matrix U0 = make_initializer(inst, InitKind::Gaussian, 9);
  FlowParams params;
  params.max_iter = 500;
  params.record_every = 50;
  const FlowTrajectory a = run_merit_flow(inst, U0, params);
  const FlowTrajectory b = run_merit_flow(inst, U0, params);
  REQUIRE(a.records.size() == b.records.size());
  CHECK(a.final_factor == b.final_factor);
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    CHECK(a.records[i].iter == b.records[i].iter);
    CHECK(a.records[i].f == b.records[i].f);
    CHECK(a.records[i].feas_gap == b.records[i].feas_gap);
    CHECK(a.records[i].merit == b.records[i].merit);
    CHECK(a.records[i].grad_norm == b.records[i].grad_norm);
  }
}

TEST_CASE("step equivalence: explicit update equals the gradient form") {
  const Instance inst = generate_instance(6, 8, 3, kDefaultXi, 128);
  FlowParams params;
  for (std::uint64_t trial = 0; trial < 20; ++trial) {
    const Matrix U = random_matrix(6, 3, 3000 + trial);
    const auto [next, lambda] = merit_flow_step(inst, U, params);
    const Matrix via_grad = U - params.eta * grad1_aug_lagrangian(inst, U, lambda, params.gamma);
    CHECK((next - via_grad).norm() <= 1e-13 * (1.0 + U.norm()));
  }
}

TEST_CASE("feasibility monotonicity near the manifold") {
  int passed = 0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const Instance inst = generate_instance(8, 12, 4, kDefaultXi, 3100 + seed);
    Factor U = near_feasible_start(inst, 3200 + seed, 0.05);
    // Nudge off the manifold so the sequence has room to decrease.
    U = nudge_within_gap(inst, U, 3300 + seed, 0.1);
    REQUIRE(feas_gap(inst, U) <= 0.1 * inst.b.norm());

    FlowParams params;
    params.gamma = 100.0;
    params.eta = 2e-5;
    params.max_iter = 10000;
    params.tol_grad = 0.0;  // run the full horizon
    params.record_every = 1;
    const FlowTrajectory traj = run_merit_flow(inst, U, params);
    bool monotone = true;
    for (std::size_t i = 1; i < traj.records.size(); ++i) {
      const double prev = traj.records[i - 1].feas_gap;
      if (traj.records[i].feas_gap > prev + 1e-9 * (1.0 + prev)) monotone = false;
    }
    if (monotone) ++passed;
  }
  CHECK(passed == 10);
}

TEST_CASE("rank monotonicity: rank-2 starts stay rank-2") {
  int passed = 0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const Instance inst = generate_instance(8, 12, 4, kDefaultXi, 3400 + seed);
    const Factor U = near_feasible_start(inst, 3500 + seed, 0.1, 2);
    REQUIRE(numerical_rank(U) <= 2);

    FlowParams params;
    params.gamma = 100.0;
    params.eta = 2e-5;
    params.max_iter = 10000;
    params.tol_grad = 0.0;
    params.record_every = 1;
    const FlowTrajectory traj = run_merit_flow(inst, U, params);
    bool rank_ok = true;
    for (const FlowRecord& rec : traj.records) {
      if (rec.feas_gap > traj.records.front().feas_gap + 1e-9) break;
      if (rec.num_rank > 2) rank_ok = false;
    }
    if (rank_ok) ++passed;
  }
  CHECK(passed == 10);
}

TEST_CASE("run_implicit_flow: feasible start is stationary immediately") {
  const double c = 2.0;
  auto inst = identity_instance(4, 2, c);
  Matrix U = random_matrix(4, 2, 129);
  U *= std::sqrt(c) / U.norm();
  // b is the exact image, so g(U) has only rounding error.
  Vector b_exact = apply(inst.op, U * U.transpose());
  Instance exact(inst.op, b_exact, 2);
  const FlowTrajectory traj = run_implicit_flow(exact, U, 1e-3, 100);
  CHECK(traj.stop_reason == StopReason::GradientTolerance);
  CHECK(traj.iterations <= 1);
}

TEST_CASE("implicit flow follows the scalar radial recursion on the identity family") {
  const double c = 2.0, eta = 1e-3;
  auto inst = identity_instance(5, 3, c);
  Matrix U = random_matrix(5, 3, 130);
  U *= 1.0 / U.norm();
  double s = 1.0;
  for (int k = 0; k < 8000; ++k) {
    const Matrix J = dg_matrix(inst.op, U);
    const Vector g = 0.5 * (J * vec(U) - inst.b);
    U -= eta * unvec(J.transpose() * g, 5, 3);
    const double factor = 1.0 - eta * 0.5 * (s - c);
    s = factor * factor * s;
    CHECK(std::abs(U.squaredNorm() - s) <= 1e-10 * (1.0 + s));
  }
  CHECK(std::abs(U.squaredNorm() - c) <= 1e-5);
}

TEST_CASE("initializers: norms, determinism, oracle plumbing") {
  const Instance inst = generate_instance(6, 8, 4, kDefaultXi, 131);

  const Factor det = make_initializer(inst, InitKind::Deterministic01, 1);
  const Factor det2 = make_initializer(inst, InitKind::Deterministic01, 999);
  CHECK(det == det2);  // seed-independent
  CHECK(std::abs(det.norm() - 3.0) <= 1e-12);
  // Checkerboard pattern scaled: zeros stay zero.
  CHECK(det(0, 0) == 0.0);
  CHECK(det(0, 1) > 0.0);

  const Factor g1 = make_initializer(inst, InitKind::Gaussian, 5);
  const Factor g2 = make_initializer(inst, InitKind::Gaussian, 5);
  const Factor g3 = make_initializer(inst, InitKind::Gaussian, 6);
  CHECK(g1 == g2);
  CHECK(g1 != g3);
  CHECK(std::abs(g1.norm() - 3.0) <= 1e-12);

  CHECK_THROWS_AS(make_initializer(inst, InitKind::PartialOracle, 5), MissingOracle);

  const SdpSolution sol = solve_sdp(inst);
  const Factor oracle = make_initializer(inst, InitKind::PartialOracle, 5, &sol.X);
  CHECK(std::abs(oracle.norm() - 3.0) <= 1e-12);
  // All entries outside the first column were set to one before rescaling.
  const double scale = oracle(0, 1);
  for (int i = 0; i < 6; ++i)
    for (int j = 1; j < 4; ++j) CHECK(oracle(i, j) == doctest::Approx(scale));
}

TEST_CASE("trajectory records carry the recovery column only when requested") {
  const Instance inst = generate_instance(4, 5, 2, kDefaultXi, 132);
  const Matrix planted = Matrix::Identity(4, 4);
  FlowParams params;
  params.max_iter = 10;
  params.recovery_ref = &planted;
  const FlowTrajectory with = run_merit_flow(inst, random_matrix(4, 2, 133), params);
  CHECK(with.records.front().recovery_error.has_value());

  params.recovery_ref = nullptr;
  const FlowTrajectory without = run_merit_flow(inst, random_matrix(4, 2, 133), params);
  CHECK_FALSE(without.records.front().recovery_error.has_value());
}
