#include "meritflow/cli.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "meritflow/experiments.hpp"
#include "meritflow/io.hpp"
#include "meritflow/random.hpp"

namespace meritflow {

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitNumerical = 2;

/// MERITFLOW_QUIET silences progress lines; files are written either way.
bool quiet() {
  const char* v = std::getenv("MERITFLOW_QUIET");
  return v != nullptr && v[0] != '\0' && v[0] != '0';
}

std::string join_path(const std::string& dir, const std::string& name) {
  return (std::filesystem::path(dir) / name).string();
}

struct FlowCommon {
  std::string instance_path;
  std::string out_dir = ".";
  std::string init = "gaussian";
  std::uint64_t seed = 0;
  double gamma = 100.0;
  double eta = 2e-5;
  std::size_t max_iter = 200000;
  double tol_grad = 1e-7;
  double ridge = kDefaultRidge;
  std::size_t record_every = 100;
  bool skip_sdp = false;
};

InitKind parse_init(const std::string& name) {
  if (name == "det01") return InitKind::Deterministic01;
  if (name == "oracle") return InitKind::PartialOracle;
  if (name == "gaussian") return InitKind::Gaussian;
  throw CLI::ValidationError("--init must be one of det01|oracle|gaussian");
}

/// Shared tail of `solve` and `implicit`: reports, files, exit code.
int finish_flow_run(const Instance& inst, const FlowTrajectory& traj,
                    const FlowCommon& opt, const std::string& run_name,
                    const std::optional<SdpSolution>& sdp) {
  save_trajectory(traj, join_path(opt.out_dir, "trajectory.csv"));
  save_factor(traj.final_factor, join_path(opt.out_dir, "factor.json"));

  MeritParams merit_params{opt.gamma, opt.ridge};
  const StationarityReport stat = classify(inst, traj.final_factor, merit_params);
  const Multipliers lam = multipliers(inst, traj.final_factor, opt.ridge);
  const CertificateReport cert = dual_certificate(
      inst, traj.final_factor * traj.final_factor.transpose(), lam.values);

  std::ostringstream report;
  report << "{\n";
  report << "  \"run\": \"" << run_name << "\",\n";
  report << "  \"stop_reason\": \"" << to_string(traj.stop_reason) << "\",\n";
  report << "  \"iterations\": " << traj.iterations << ",\n";
  const FlowRecord& last = traj.records.back();
  report << "  \"terminal\": {\"f\": " << json_number(last.f)
         << ", \"target\": " << json_number(last.target)
         << ", \"feas_gap\": " << json_number(last.feas_gap)
         << ", \"merit\": " << json_number(last.merit)
         << ", \"grad_norm\": " << json_number(last.grad_norm)
         << ", \"num_rank\": " << last.num_rank << "},\n";
  if (sdp)
    report << "  \"sdp_value\": " << json_number(sdp->value) << ",\n"
           << "  \"sdp_converged\": " << (sdp->converged ? "true" : "false") << ",\n";
  std::istringstream stat_json(stationarity_to_json(stat));
  std::string line;
  report << "  \"stationarity\": ";
  bool first = true;
  while (std::getline(stat_json, line)) {
    if (!first) report << "\n  ";
    report << line;
    first = false;
  }
  report << ",\n  \"certificate\": ";
  std::istringstream cert_json(certificate_to_json(cert));
  first = true;
  while (std::getline(cert_json, line)) {
    if (!first) report << "\n  ";
    report << line;
    first = false;
  }
  report << "\n}\n";
  write_file(join_path(opt.out_dir, "report.json"), report.str());

  if (!quiet())
    std::cout << "stop: " << to_string(traj.stop_reason)
              << "  iterations: " << traj.iterations
              << "  feas_gap: " << fmt_double(last.feas_gap)
              << "  target: " << fmt_double(last.target)
              << "  verdict: " << to_string(stat.verdict) << "\n";
  return traj.stop_reason == StopReason::GradientTolerance ? kExitOk : kExitNumerical;
}

}  // namespace

int cli_main(int argc, const char* const* argv) {
  CLI::App app{"Merit-function gradient flow for over-parametrized matrix factorization"};
  app.require_subcommand(1);

  // --- gen ---------------------------------------------------------------
  auto* gen = app.add_subcommand("gen", "Generate a random instance file");
  int gen_d = 15, gen_m = 30, gen_p = 0;
  double gen_xi = kDefaultXi;
  std::uint64_t gen_seed = 0;
  std::string gen_out = "instance.json";
  gen->add_option("--d", gen_d, "ambient dimension")->required();
  gen->add_option("--m", gen_m, "number of measurements")->required();
  gen->add_option("--p", gen_p, "factor width (default: Pataki width ceil(sqrt(2m)))");
  gen->add_option("--xi", gen_xi, "spectral-norm cap");
  gen->add_option("--seed", gen_seed, "RNG seed")->required();
  gen->add_option("-o,--out", gen_out, "output instance file");

  // --- solve -------------------------------------------------------------
  auto* solve = app.add_subcommand("solve", "Run the merit-function flow");
  FlowCommon solve_opt;
  solve->add_option("--instance", solve_opt.instance_path, "instance JSON file")->required();
  solve->add_option("--init", solve_opt.init, "initializer: det01|oracle|gaussian");
  solve->add_option("--seed", solve_opt.seed, "initializer seed");
  solve->add_option("--gamma", solve_opt.gamma, "penalty weight");
  solve->add_option("--eta", solve_opt.eta, "step size");
  solve->add_option("--max-iter", solve_opt.max_iter, "iteration cap");
  solve->add_option("--tol-grad", solve_opt.tol_grad, "gradient stopping tolerance");
  solve->add_option("--ridge", solve_opt.ridge, "Gram stabilizer");
  solve->add_option("--record-every", solve_opt.record_every, "recording stride");
  solve->add_flag("--skip-sdp", solve_opt.skip_sdp, "skip the convex benchmark");
  solve->add_option("-o,--out", solve_opt.out_dir, "output directory");

  // --- implicit ----------------------------------------------------------
  auto* implicit = app.add_subcommand(
      "implicit", "Run gradient descent on the feasibility gap (baseline)");
  FlowCommon impl_opt;
  impl_opt.eta = 2e-4;
  implicit->add_option("--instance", impl_opt.instance_path, "instance JSON file")
      ->required();
  implicit->add_option("--seed", impl_opt.seed, "initializer seed");
  implicit->add_option("--eta", impl_opt.eta, "step size");
  implicit->add_option("--max-iter", impl_opt.max_iter, "iteration cap");
  implicit->add_option("--record-every", impl_opt.record_every, "recording stride");
  implicit->add_flag("--skip-sdp", impl_opt.skip_sdp, "skip the convex benchmark");
  implicit->add_option("-o,--out", impl_opt.out_dir, "output directory");

  // --- sdp ---------------------------------------------------------------
  auto* sdp_cmd = app.add_subcommand("sdp", "Solve the convex relaxation");
  std::string sdp_instance, sdp_out = "sdp.json";
  AdmmParams admm;
  sdp_cmd->add_option("--instance", sdp_instance, "instance JSON file")->required();
  sdp_cmd->add_option("--rho", admm.rho, "splitting penalty");
  sdp_cmd->add_option("--max-iter", admm.max_iter, "iteration cap");
  sdp_cmd->add_option("--tol", admm.tol_p, "residual tolerance (primal and dual)");
  sdp_cmd->add_option("-o,--out", sdp_out, "output solution file");

  // --- classify ----------------------------------------------------------
  auto* classify_cmd =
      app.add_subcommand("classify", "Stationarity verdict for a stored factor");
  std::string cls_instance, cls_factor, cls_out = "stationarity.json";
  double cls_gamma = 100.0, cls_ridge = kDefaultRidge;
  ClassifyTols cls_tols;
  classify_cmd->add_option("--instance", cls_instance, "instance JSON file")->required();
  classify_cmd->add_option("--factor", cls_factor, "factor JSON file")->required();
  classify_cmd->add_option("--gamma", cls_gamma, "penalty weight");
  classify_cmd->add_option("--ridge", cls_ridge, "Gram stabilizer");
  classify_cmd->add_option("--tol-grad", cls_tols.tol_grad, "merit-gradient tolerance");
  classify_cmd->add_option("--tol-eig", cls_tols.tol_eig, "Hessian eigenvalue tolerance");
  classify_cmd->add_option("-o,--out", cls_out, "output report file");

  // --- certify -----------------------------------------------------------
  auto* certify_cmd =
      app.add_subcommand("certify", "Dual certificate for a factor or SDP solution");
  std::string cert_instance, cert_factor, cert_sdp, cert_out = "certificate.json";
  double cert_tol = 1e-6, cert_ridge = kDefaultRidge;
  certify_cmd->add_option("--instance", cert_instance, "instance JSON file")->required();
  certify_cmd->add_option("--factor", cert_factor,
                          "factor JSON file (X = UU^T, multipliers at U)");
  certify_cmd->add_option("--sdp", cert_sdp, "SDP solution file (dual source)");
  certify_cmd->add_option("--tol", cert_tol, "certificate tolerance");
  certify_cmd->add_option("--ridge", cert_ridge, "Gram stabilizer for multipliers");
  certify_cmd->add_option("-o,--out", cert_out, "output report file");

  // --- experiment ----------------------------------------------------------
  auto* exp_cmd = app.add_subcommand("experiment", "Run a replication preset");
  std::string exp_preset;
  std::uint64_t exp_seed = 0;
  std::string exp_out = "out";
  int exp_replicates = 1;
  std::size_t exp_max_iter = 0;
  exp_cmd->add_option("preset", exp_preset, "sec11|fig1-under|fig1-over|fig2")->required();
  auto* exp_seed_opt =
      exp_cmd->add_option("--seed", exp_seed, "instance seed (default: preset reference seed)");
  std::string exp_instance;
  exp_cmd->add_option("--instance", exp_instance,
                      "run the preset on a stored instance instead of generating one");
  exp_cmd->add_option("--replicates", exp_replicates, "number of seeds to run");
  exp_cmd->add_option("--max-iter", exp_max_iter, "override the preset iteration cap");
  exp_cmd->add_option("-o,--out", exp_out, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (gen->parsed()) {
      const int p = gen_p > 0 ? gen_p : pataki_width(gen_m);
      const Instance inst = generate_instance(gen_d, gen_m, p, gen_xi, gen_seed);
      save_instance(inst, gen_out);
      if (!quiet())
        std::cout << "wrote " << gen_out << " (d=" << gen_d << ", m=" << gen_m
                  << ", p=" << p << ")\n";
      return kExitOk;
    }

    if (solve->parsed()) {
      const Instance inst = load_instance(solve_opt.instance_path);
      std::optional<SdpSolution> sdp;
      if (!solve_opt.skip_sdp) sdp = solve_sdp(inst);
      const InitKind kind = parse_init(solve_opt.init);
      if (kind == InitKind::PartialOracle && !sdp)
        throw MissingOracle("--init oracle requires the convex benchmark");
      if (sdp) save_sdp_solution(*sdp, join_path(solve_opt.out_dir, "sdp.json"));
      const Factor U0 = make_initializer(inst, kind, solve_opt.seed,
                                         sdp ? &sdp->X : nullptr);
      FlowParams params;
      params.gamma = solve_opt.gamma;
      params.eta = solve_opt.eta;
      params.max_iter = solve_opt.max_iter;
      params.tol_grad = solve_opt.tol_grad;
      params.ridge = solve_opt.ridge;
      params.record_every = solve_opt.record_every;
      const FlowTrajectory traj = run_merit_flow(inst, U0, params);
      return finish_flow_run(inst, traj, solve_opt, "merit", sdp);
    }

    if (implicit->parsed()) {
      const Instance inst = load_instance(impl_opt.instance_path);
      std::optional<SdpSolution> sdp;
      if (!impl_opt.skip_sdp) sdp = solve_sdp(inst);
      if (sdp) save_sdp_solution(*sdp, join_path(impl_opt.out_dir, "sdp.json"));
      const Factor U0 = make_initializer(inst, InitKind::Gaussian, impl_opt.seed);
      ImplicitFlowOptions options;
      options.record_every = impl_opt.record_every;
      const FlowTrajectory traj =
          run_implicit_flow(inst, U0, impl_opt.eta, impl_opt.max_iter, options);
      // The baseline has no gradient target; the iteration cap is the normal exit.
      const int code = finish_flow_run(inst, traj, impl_opt, "implicit", sdp);
      return traj.stop_reason == StopReason::Diverged ? kExitNumerical
             : code == kExitNumerical                 ? kExitOk
                                                      : code;
    }

    if (sdp_cmd->parsed()) {
      const Instance inst = load_instance(sdp_instance);
      admm.tol_d = admm.tol_p;
      const SdpSolution sol = solve_sdp(inst, admm);
      save_sdp_solution(sol, sdp_out);
      if (!quiet())
        std::cout << "value: " << fmt_double(sol.value)
                  << "  converged: " << (sol.converged ? "true" : "false")
                  << "  iterations: " << sol.iterations << "\n";
      return sol.converged ? kExitOk : kExitNumerical;
    }

    if (classify_cmd->parsed()) {
      const Instance inst = load_instance(cls_instance);
      const Matrix U = load_factor(cls_factor);
      const StationarityReport report =
          classify(inst, U, MeritParams{cls_gamma, cls_ridge}, cls_tols);
      write_file(cls_out, stationarity_to_json(report));
      if (!quiet()) std::cout << "verdict: " << to_string(report.verdict) << "\n";
      return kExitOk;
    }

    if (certify_cmd->parsed()) {
      const Instance inst = load_instance(cert_instance);
      Matrix X;
      Vector lambda;
      if (!cert_factor.empty()) {
        const Matrix U = load_factor(cert_factor);
        X = U * U.transpose();
        if (!cert_sdp.empty()) {
          lambda = load_sdp_solution(cert_sdp).dual_eq;  // cross certificate
        } else {
          lambda = multipliers(inst, U, cert_ridge).values;
        }
      } else if (!cert_sdp.empty()) {
        const SdpSolution sol = load_sdp_solution(cert_sdp);
        X = sol.X;
        lambda = sol.dual_eq;
      } else {
        std::cerr << "certify: need --factor and/or --sdp\n";
        return kExitUsage;
      }
      const CertificateReport report = dual_certificate(inst, X, lambda, cert_tol);
      write_file(cert_out, certificate_to_json(report));
      if (!quiet())
        std::cout << "certified: " << (report.certified ? "true" : "false") << "\n";
      return kExitOk;
    }

    if (exp_cmd->parsed()) {
      ExperimentConfig config;
      if (exp_preset == "sec11") {
        config = preset_sec11(exp_seed_opt->count() ? exp_seed : kSec11ReferenceSeed);
      } else if (exp_preset == "fig1-under") {
        config = preset_fig1(exp_seed_opt->count() ? exp_seed : kFig1ReferenceSeed, false);
      } else if (exp_preset == "fig1-over") {
        config = preset_fig1(exp_seed_opt->count() ? exp_seed : kFig1ReferenceSeed, true);
      } else if (exp_preset == "fig2") {
        config = preset_fig2(exp_seed_opt->count() ? exp_seed : kFig2ReferenceSeed);
      } else {
        std::cerr << "unknown preset: " << exp_preset << "\n";
        return kExitUsage;
      }
      if (exp_max_iter > 0) {
        config.max_iter = exp_max_iter;
        if (config.max_iter_implicit > 0) config.max_iter_implicit = exp_max_iter;
      }
      if (!exp_instance.empty()) config.instance_file = exp_instance;
      config.out_dir = exp_out;
      config.replicates = exp_replicates;
      const auto results = run_experiment_replicates(config);
      bool numerical_failure = false;
      for (const ExperimentResult& result : results) {
        if (!result.sdp_converged) numerical_failure = true;
        for (const RunOutcome& run : result.runs) {
          // Presets are horizon experiments: exhausting the configured
          // iteration budget is a normal exit, divergence is not.
          if (run.stop_reason == StopReason::Diverged) numerical_failure = true;
          if (quiet()) continue;
          std::cout << to_string(config.preset) << " seed=" << result.config.seed << " "
                    << run.name << ": " << to_string(run.stop_reason)
                    << " feas_gap=" << fmt_double(run.terminal.feas_gap)
                    << " target=" << fmt_double(run.terminal.target)
                    << " verdict=" << to_string(run.stationarity.verdict) << "\n";
        }
        if (!quiet()) std::cout << "report: " << result.report_file << "\n";
      }
      return numerical_failure ? kExitNumerical : kExitOk;
    }
  } catch (const ParseError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const CLI::ValidationError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const InvalidDimension& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const MissingOracle& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumerical;
  }

  return kExitUsage;
}

int cli_main(const std::vector<std::string>& args) {
  std::vector<const char*> argv;
  argv.reserve(args.size() + 1);
  argv.push_back("meritflow");
  for (const std::string& a : args) argv.push_back(a.c_str());
  return cli_main(static_cast<int>(argv.size()), argv.data());
}

}  // namespace meritflow
