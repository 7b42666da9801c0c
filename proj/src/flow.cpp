#include "meritflow/flow.hpp"

#include <cassert>
#include <cmath>

#include "meritflow/random.hpp"
#include "meritflow/sdp.hpp"
#include "meritflow/stationarity.hpp"

namespace meritflow {

std::string to_string(StopReason r) {
  switch (r) {
    case StopReason::GradientTolerance: return "GradientTolerance";
    case StopReason::MaxIterations: return "MaxIterations";
    case StopReason::Diverged: return "Diverged";
  }
  return "MaxIterations";
}

std::string to_string(InitKind k) {
  switch (k) {
    case InitKind::Deterministic01: return "det01";
    case InitKind::PartialOracle: return "oracle";
    case InitKind::Gaussian: return "gaussian";
  }
  return "gaussian";
}

namespace {

struct StepState {
  Matrix J;          // m x (dp), row i = vec(A_i U)
  Vector auu;        // A(UU^T)
  Vector residual;   // A(UU^T) - b
  Vector lambda;     // multipliers at U
  Matrix direction;  // sum_i (lambda_i - (gamma/2) r_i) A_i U
  double grad_norm;  // ||U - direction||_F = ||grad_1 L_gamma||_F
  Matrix K;
};

StepState evaluate_step(const Instance& inst, const Matrix& U, double gamma,
                        double ridge) {
  StepState s;
  s.J = dg_matrix(inst.op, U);
  s.K = Matrix::Zero(inst.m(), inst.m());
  s.K.selfadjointView<Eigen::Lower>().rankUpdate(s.J);
  s.K = s.K.selfadjointView<Eigen::Lower>();
  GramSolver solver(s.K, ridge);
  s.auu = s.J * vec(U);
  s.residual = s.auu - inst.b;
  s.lambda = solver.solve(s.auu);
  const Vector coeff = s.lambda - 0.5 * gamma * s.residual;
  s.direction = unvec(s.J.transpose() * coeff, inst.d(), inst.p);
  s.grad_norm = (U - s.direction).norm();
  return s;
}

FlowRecord make_record(const Instance& inst, const Matrix& U, std::size_t iter,
                       const Vector& residual, const Vector& lambda, double gamma,
                       double grad_norm, const Matrix& K, const Matrix* recovery_ref) {
  FlowRecord rec;
  rec.iter = iter;
  rec.f = f_value(U);
  rec.target = U.squaredNorm();
  rec.feas_gap = residual.norm();
  const Vector g = 0.5 * residual;
  rec.merit = rec.f - g.dot(lambda) + 0.5 * gamma * g.squaredNorm();
  rec.grad_norm = grad_norm;
  rec.num_rank = numerical_rank(U);
  Eigen::SelfAdjointEigenSolver<Matrix> es(K, Eigen::EigenvaluesOnly);
  rec.sigma_min_K = es.eigenvalues()(0);
  if (recovery_ref) rec.recovery_error = (U * U.transpose() - *recovery_ref).norm();
  return rec;
}

bool diverged(const Matrix& U, double norm_guard) {
  return !U.allFinite() || U.norm() > norm_guard;
}

}  // namespace

std::pair<Factor, Vector> merit_flow_step(const Instance& inst, const Matrix& U,
                                          const FlowParams& params) {
  const StepState s = evaluate_step(inst, U, params.gamma, params.ridge);
  const double eta = params.step_override ? params.step_override(0) : params.eta;
  Factor next = (1.0 - eta) * U + eta * s.direction;
#ifndef NDEBUG
  const Matrix via_gradient =
      U - eta * grad1_aug_lagrangian(inst, U, s.lambda, params.gamma);
  assert((next - via_gradient).norm() <= 1e-13 * (1.0 + next.norm()));
#endif
  return {std::move(next), s.lambda};
}

FlowTrajectory run_merit_flow(const Instance& inst, const Matrix& U0,
                              const FlowParams& params) {
  if (U0.rows() != inst.d() || U0.cols() != inst.p)
    throw InvalidDimension("initializer must be d x p");
  if (params.max_iter < 1) throw InvalidDimension("max_iter must be at least 1");
  if (!(params.eta >= 0.0)) throw InvalidDimension("step size must be nonnegative");

  FlowTrajectory traj;
  Matrix U = U0;
  const double norm_guard = 1e3 * std::max(1.0, U0.norm());
  std::size_t last_recorded = static_cast<std::size_t>(-1);

  for (std::size_t k = 0;; ++k) {
    const StepState s = evaluate_step(inst, U, params.gamma, params.ridge);
    const bool due = (k % params.record_every == 0);
    const bool stopping = s.grad_norm <= params.tol_grad || k >= params.max_iter;
    if (due || stopping) {
      traj.records.push_back(make_record(inst, U, k, s.residual, s.lambda, params.gamma,
                                         s.grad_norm, s.K, params.recovery_ref));
      last_recorded = k;
    }
    traj.iterations = k;
    if (s.grad_norm <= params.tol_grad) {
      traj.stop_reason = StopReason::GradientTolerance;
      break;
    }
    if (k >= params.max_iter) {
      traj.stop_reason = StopReason::MaxIterations;
      break;
    }

    const double eta = params.step_override ? params.step_override(k) : params.eta;
    const Matrix next = (1.0 - eta) * U + eta * s.direction;
    if (diverged(next, norm_guard)) {
      traj.stop_reason = StopReason::Diverged;
      if (last_recorded != k)
        traj.records.push_back(make_record(inst, U, k, s.residual, s.lambda, params.gamma,
                                           s.grad_norm, s.K, params.recovery_ref));
      break;
    }
    U = next;
  }

  traj.final_factor = std::move(U);
  return traj;
}

FlowTrajectory run_implicit_flow(const Instance& inst, const Matrix& U0, double eta,
                                 std::size_t max_iter,
                                 const ImplicitFlowOptions& options) {
  if (U0.rows() != inst.d() || U0.cols() != inst.p)
    throw InvalidDimension("initializer must be d x p");
  if (!(eta >= 0.0)) throw InvalidDimension("step size must be nonnegative");

  FlowTrajectory traj;
  Matrix U = U0;
  const double norm_guard = 1e3 * std::max(1.0, U0.norm());
  std::size_t last_recorded = static_cast<std::size_t>(-1);

  auto record_state = [&](std::size_t iter, const Matrix& J, const Vector& residual,
                          double grad_norm) {
    Matrix K = Matrix::Zero(inst.m(), inst.m());
    K.selfadjointView<Eigen::Lower>().rankUpdate(J);
    K = K.selfadjointView<Eigen::Lower>();
    GramSolver solver(K, options.merit.ridge);
    const Vector lambda = solver.solve(residual + inst.b);
    traj.records.push_back(make_record(inst, U, iter, residual, lambda,
                                       options.merit.gamma, grad_norm, K,
                                       options.recovery_ref));
    last_recorded = iter;
  };

  for (std::size_t k = 0;; ++k) {
    const Matrix J = dg_matrix(inst.op, U);
    const Vector residual = J * vec(U) - inst.b;
    const Vector g = 0.5 * residual;
    const Matrix grad = unvec(J.transpose() * g, inst.d(), inst.p);
    const double grad_norm = grad.norm();

    const bool due = (k % options.record_every == 0);
    const bool stopping = grad_norm <= options.tol_grad || k >= max_iter;
    if (due || stopping) record_state(k, J, residual, grad_norm);
    traj.iterations = k;
    if (grad_norm <= options.tol_grad) {
      traj.stop_reason = StopReason::GradientTolerance;
      break;
    }
    if (k >= max_iter) {
      traj.stop_reason = StopReason::MaxIterations;
      break;
    }

    const Matrix next = U - eta * grad;
    if (diverged(next, norm_guard)) {
      traj.stop_reason = StopReason::Diverged;
      if (last_recorded != k) record_state(k, J, residual, grad_norm);
      break;
    }
    U = next;
  }

  traj.final_factor = std::move(U);
  return traj;
}

Factor make_initializer(const Instance& inst, InitKind kind, std::uint64_t seed,
                        const Matrix* sdp_solution) {
  const int d = inst.d();
  const int p = inst.p;
  Factor U(d, p);
  switch (kind) {
    case InitKind::Deterministic01:
      for (int i = 0; i < d; ++i)
        for (int j = 0; j < p; ++j) U(i, j) = static_cast<double>((i + j) % 2);
      break;
    case InitKind::PartialOracle: {
      if (!sdp_solution)
        throw MissingOracle("partial-oracle initializer needs a convex solution");
      const Factor oracle = sqrt_psd(*sdp_solution, p);
      U.setOnes();
      U.col(0) = oracle.col(0);
      break;
    }
    case InitKind::Gaussian: {
      GaussianSampler sampler(seed);
      for (int i = 0; i < d; ++i)
        for (int j = 0; j < p; ++j) U(i, j) = sampler.next();
      break;
    }
  }
  const double norm = U.norm();
  if (!(norm > 0.0)) throw InvalidDimension("initializer has zero norm; cannot rescale");
  return U * (kInitNorm / norm);
}

}  // namespace meritflow
