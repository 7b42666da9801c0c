#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "meritflow/merit.hpp"

namespace meritflow {

enum class StopReason { GradientTolerance, MaxIterations, Diverged };

std::string to_string(StopReason r);

enum class InitKind { Deterministic01, PartialOracle, Gaussian };

std::string to_string(InitKind k);

struct FlowParams {
  double gamma = 100.0;
  double eta = 2e-5;
  std::size_t max_iter = 200000;
  /// Stop when ||grad_1 L_gamma(U_k, lambda_k)||_F <= tol_grad (the update
  /// direction of the discretized flow).
  double tol_grad = 1e-7;
  double tol_feas = 1e-6;  // report-only
  double ridge = kDefaultRidge;
  std::size_t record_every = 100;
  /// Optional per-iteration step size; the constant `eta` when unset.
  std::function<double(std::size_t)> step_override;
  /// When set, every record carries ||U_k U_k^T - *recovery_ref||_F.
  const Matrix* recovery_ref = nullptr;
};

struct FlowRecord {
  std::size_t iter = 0;
  double f = 0.0;
  double target = 0.0;  // 2f = ||U||_F^2
  double feas_gap = 0.0;
  double merit = 0.0;
  double grad_norm = 0.0;
  int num_rank = 0;
  double sigma_min_K = 0.0;
  std::optional<double> recovery_error;
};

struct FlowTrajectory {
  std::vector<FlowRecord> records;
  Factor final_factor;
  StopReason stop_reason = StopReason::MaxIterations;
  std::size_t iterations = 0;
};

/// One discretized step of the merit-function flow:
///   lambda_k = lambda(U_k, U_k)
///   U_{k+1}  = (1 - eta) U_k
///              + eta sum_i (lambda_{k,i} - (gamma/2)(<A_i, U_k U_k^T> - b_i)) A_i U_k,
/// which equals U_k - eta * grad1_aug_lagrangian(U_k, lambda_k, gamma).
std::pair<Factor, Vector> merit_flow_step(const Instance& inst, const Matrix& U,
                                          const FlowParams& params);

/// Iterates merit_flow_step until the gradient tolerance, the iteration cap,
/// or divergence (non-finite entries, or ||U_k|| > 1e3 max(1, ||U_0||)).
/// Diagnostics are recorded every record_every steps and at the final step.
FlowTrajectory run_merit_flow(const Instance& inst, const Matrix& U0,
                              const FlowParams& params);

struct ImplicitFlowOptions {
  /// Numerical-stationarity floor; the baseline has no natural tolerance.
  double tol_grad = 1e-14;
  std::size_t record_every = 100;
  const Matrix* recovery_ref = nullptr;
  /// The merit column is recorded for comparison with these parameters.
  MeritParams merit = {};
};

/// Explicit-Euler descent on the scaled feasibility gap G(U) = (1/2)||g(U)||^2:
///   U_{k+1} = U_k - eta * (Dg(U_k))*[g(U_k)].
/// The implicit-regularization baseline; same trajectory schema as the merit
/// flow.
FlowTrajectory run_implicit_flow(const Instance& inst, const Matrix& U0, double eta,
                                 std::size_t max_iter,
                                 const ImplicitFlowOptions& options = {});

/// All initializations are rescaled to ||U_0||_F = 3.
inline constexpr double kInitNorm = 3.0;

/// Deterministic01: 0/1 checkerboard U(i,j) = (i+j) mod 2, seed-independent.
/// PartialOracle: first column of sqrt_psd(*sdp_solution, p), remaining
/// entries 1; requires sdp_solution (else MissingOracle).
/// Gaussian: i.i.d. N(0,1) from `seed`.
Factor make_initializer(const Instance& inst, InitKind kind, std::uint64_t seed,
                        const Matrix* sdp_solution = nullptr);

}  // namespace meritflow
