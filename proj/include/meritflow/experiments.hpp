#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "meritflow/flow.hpp"
#include "meritflow/sdp.hpp"
#include "meritflow/stationarity.hpp"

namespace meritflow {

enum class Preset { Sec11, Fig1Under, Fig1Over, Fig2, Custom };

std::string to_string(Preset p);

/// Seeds the shipped regression fixtures were frozen on.
inline constexpr std::uint64_t kSec11ReferenceSeed = 7;
inline constexpr std::uint64_t kFig1ReferenceSeed = 5;
inline constexpr std::uint64_t kFig2ReferenceSeed = 1;

struct ExperimentConfig {
  Preset preset = Preset::Custom;
  std::uint64_t seed = 0;
  /// Instance geometry; ignored when instance_file is set.
  int d = 0;
  int m = 0;
  int p = 0;
  double xi = kDefaultXi;
  std::optional<std::string> instance_file;

  // Merit-flow parameters.
  double gamma = 100.0;
  double eta = 2e-5;
  std::size_t max_iter = 200000;
  double tol_grad = 1e-7;
  double ridge = kDefaultRidge;
  std::size_t record_every = 100;

  // Baseline (feasibility-gap descent) parameters, for presets that run it.
  double eta_implicit = 0.0;
  std::size_t max_iter_implicit = 0;

  std::vector<InitKind> inits;
  bool run_implicit = false;
  bool run_merit = true;
  /// Fig2-style planted model: rank-1 X with unit Frobenius norm, b = A(X).
  bool planted_rank1 = false;
  /// Fig1Over: also run the crafted full-rank far-side initialization.
  bool adversarial_init = false;

  std::string out_dir = ".";
  int replicates = 1;
};

ExperimentConfig preset_sec11(std::uint64_t seed);
ExperimentConfig preset_fig1(std::uint64_t seed, bool over);
ExperimentConfig preset_fig2(std::uint64_t seed);

/// Outcome of one flow run inside an experiment.
struct RunOutcome {
  std::string name;
  bool implicit_baseline = false;
  std::string trajectory_csv;
  std::string factor_file;
  StopReason stop_reason = StopReason::MaxIterations;
  std::size_t iterations = 0;
  FlowRecord terminal;
  StationarityReport stationarity;
  CertificateReport certificate;
  /// Merit-stationary but infeasible: the failure mode where the flow stalls
  /// off the constraint set.
  bool infeasible_stationary = false;
  /// Terminal target exceeds the convex optimum by more than 10%.
  bool suboptimal_trap = false;
  std::optional<double> recovery_error;
};

struct ExperimentResult {
  ExperimentConfig config;
  /// Relative to config.out_dir, as serialized in the report.
  std::string instance_file;
  std::string report_file;
  std::optional<double> sdp_value;
  bool sdp_converged = false;
  std::vector<RunOutcome> runs;
  double wall_clock_sec = 0.0;
};

/// Runs one replicate end to end (instance, SDP benchmark, flows, reports)
/// and writes instance/trajectory/factor/report files under config.out_dir.
ExperimentResult run_experiment(const ExperimentConfig& config);

/// Replicate driver: seeds config.seed + r for r in [0, replicates), each
/// writing to out_dir/seed<S>/ when replicates > 1.
std::vector<ExperimentResult> run_experiment_replicates(const ExperimentConfig& config);

std::string experiment_report_json(const ExperimentResult& result);

}  // namespace meritflow
