#pragma once

#include <string>

#include "meritflow/flow.hpp"
#include "meritflow/measurement.hpp"
#include "meritflow/sdp.hpp"
#include "meritflow/stationarity.hpp"

namespace meritflow {

/// Shortest-width %.17g rendering, the lossless f64 round trip used by every
/// file format here.
std::string fmt_double(double v);

/// fmt_double for finite values, "null" otherwise (JSON has no inf/nan).
std::string json_number(double v);

// Instance file:
//   {"d","m","p","xi","seed","rng","matrices":[m arrays of d*d, row-major],
//    "b":[m]}
// "seed" is omitted for instances without provenance.
std::string instance_to_json(const Instance& inst);
Instance instance_from_json(const std::string& text);
void save_instance(const Instance& inst, const std::string& path);
Instance load_instance(const std::string& path);

// Factor file: {"d","p","entries":[d*p, row-major]}.
std::string factor_to_json(const Matrix& U);
Matrix factor_from_json(const std::string& text);
void save_factor(const Matrix& U, const std::string& path);
Matrix load_factor(const std::string& path);

// Symmetric matrix file: {"d","entries":[d*d, row-major]}.
std::string symmetric_to_json(const Matrix& X);
Matrix symmetric_from_json(const std::string& text);
void save_symmetric(const Matrix& X, const std::string& path);
Matrix load_symmetric(const std::string& path);

std::string sdp_solution_to_json(const SdpSolution& sol);
SdpSolution sdp_solution_from_json(const std::string& text);
void save_sdp_solution(const SdpSolution& sol, const std::string& path);
SdpSolution load_sdp_solution(const std::string& path);

std::string stationarity_to_json(const StationarityReport& report);
std::string certificate_to_json(const CertificateReport& report);

/// Header `iter,f,target,feas_gap,merit,grad_norm,num_rank,sigma_min_K`, one
/// row per record; a `recovery_error` column is appended when the trajectory
/// carries one.
std::string trajectory_to_csv(const FlowTrajectory& traj);
void save_trajectory(const FlowTrajectory& traj, const std::string& path);

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& content);

}  // namespace meritflow
