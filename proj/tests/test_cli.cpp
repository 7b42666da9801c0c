#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "meritflow/cli.hpp"
#include "meritflow/experiments.hpp"
#include "meritflow/io.hpp"

using namespace meritflow;

namespace {

struct TempDir {
  std::filesystem::path path;
  TempDir() {
    path = std::filesystem::temp_directory_path() /
           ("meritflow_cli_" + std::to_string(::getpid()) + "_" +
            std::to_string(counter()++));
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
  static int& counter() {
    static int c = 0;
    return c;
  }
};

std::string slurp(const std::string& path) { return read_file(path); }

/// Report comparison with the wall-clock line (the only nondeterministic
/// field) stripped.
std::string strip_wall_clock(std::string text) {
  const auto pos = text.find("\"wall_clock_sec\"");
  if (pos == std::string::npos) return text;
  const auto line_start = text.rfind('\n', pos);
  const auto line_end = text.find('\n', pos);
  text.erase(line_start, line_end - line_start);
  return text;
}

}  // namespace

TEST_CASE("cli: gen writes a valid instance with the Pataki default width") {
  TempDir dir;
  const std::string out = dir.file("inst.json");
  CHECK(cli_main({"gen", "--d", "15", "--m", "30", "--seed", "7", "-o", out}) == 0);
  const Instance inst = load_instance(out);
  CHECK(inst.d() == 15);
  CHECK(inst.m() == 30);
  CHECK(inst.p == 8);  // ceil(sqrt(60))
  REQUIRE(inst.seed.has_value());
  CHECK(*inst.seed == 7);
}

TEST_CASE("cli: solve on malformed JSON exits 1 with a diagnostic") {
  TempDir dir;
  const std::string bad = dir.file("bad.json");
  std::ofstream(bad) << "{ this is not json";
  CHECK(cli_main({"solve", "--instance", bad, "-o", dir.file("out")}) == 1);
}

TEST_CASE("cli: unknown subcommand or missing required flag exits 1") {
  CHECK(cli_main({"frobnicate"}) == 1);
  CHECK(cli_main({"gen", "--d", "4"}) == 1);
}

TEST_CASE("cli: solve/classify/certify round trip on a small instance") {
  TempDir dir;
  const std::string inst_path = dir.file("inst.json");
  REQUIRE(cli_main({"gen", "--d", "6", "--m", "8", "--seed", "11", "-o", inst_path}) == 0);

  const std::string run_dir = dir.file("run");
  CHECK(cli_main({"solve", "--instance", inst_path, "--init", "gaussian", "--seed", "5",
                  "--max-iter", "2000000", "--tol-grad", "1e-9", "-o", run_dir}) == 0);
  CHECK(std::filesystem::exists(run_dir + "/trajectory.csv"));
  CHECK(std::filesystem::exists(run_dir + "/factor.json"));
  CHECK(std::filesystem::exists(run_dir + "/report.json"));

  const std::string cls = dir.file("cls.json");
  CHECK(cli_main({"classify", "--instance", inst_path, "--factor",
                  run_dir + "/factor.json", "-o", cls}) == 0);
  CHECK(slurp(cls).find("RankDeficientSOSP_GlobalMin") != std::string::npos);

  const std::string cert = dir.file("cert.json");
  CHECK(cli_main({"certify", "--instance", inst_path, "--factor",
                  run_dir + "/factor.json", "-o", cert}) == 0);
  CHECK(slurp(cert).find("\"certified\": true") != std::string::npos);

  // Cross certificate: flow factor against the convex dual.
  const std::string cross = dir.file("cross.json");
  CHECK(cli_main({"certify", "--instance", inst_path, "--factor",
                  run_dir + "/factor.json", "--sdp", run_dir + "/sdp.json", "-o",
                  cross}) == 0);
  CHECK(slurp(cross).find("\"certified\": true") != std::string::npos);
}

TEST_CASE("cli: sdp subcommand writes a reloadable solution") {
  TempDir dir;
  const std::string inst_path = dir.file("inst.json");
  REQUIRE(cli_main({"gen", "--d", "4", "--m", "5", "--seed", "3", "-o", inst_path}) == 0);
  const std::string sol_path = dir.file("sdp.json");
  CHECK(cli_main({"sdp", "--instance", inst_path, "-o", sol_path}) == 0);
  const SdpSolution sol = load_sdp_solution(sol_path);
  CHECK(sol.converged);
  CHECK(sol.primal_residual <= 1e-8);
}

TEST_CASE("cli: experiment outputs are byte-identical for the same seed") {
  TempDir dir;
  const std::string out1 = dir.file("a");
  const std::string out2 = dir.file("b");
  // A tiny horizon keeps this fast; determinism is about bytes, not quality.
  REQUIRE(cli_main({"experiment", "sec11", "--seed", "3", "--max-iter", "500", "-o",
                    out1}) == 0);
  REQUIRE(cli_main({"experiment", "sec11", "--seed", "3", "--max-iter", "500", "-o",
                    out2}) == 0);
  for (const std::string name :
       {"instance.json", "sdp.json", "run_det01/trajectory.csv",
        "run_oracle/trajectory.csv", "run_gaussian/trajectory.csv",
        "run_det01/factor.json", "run_oracle/factor.json", "run_gaussian/factor.json"}) {
    CHECK(slurp(out1 + "/" + name) == slurp(out2 + "/" + name));
  }
  CHECK(strip_wall_clock(slurp(out1 + "/report.json")) ==
        strip_wall_clock(slurp(out2 + "/report.json")));
}

TEST_CASE("experiment reports are recomputable from the stored artifacts") {
  TempDir dir;
  ExperimentConfig config = preset_sec11(3);
  config.max_iter = 2000;  // keep the fixture cheap
  config.out_dir = dir.file("exp");
  const ExperimentResult result = run_experiment(config);
  REQUIRE(result.runs.size() == 3);

  const Instance inst = load_instance(config.out_dir + "/" + result.instance_file);
  for (const RunOutcome& run : result.runs) {
    const Matrix U = load_factor(config.out_dir + "/" + run.factor_file);
    const StationarityReport stat =
        classify(inst, U, MeritParams{config.gamma, config.ridge});
    CHECK(stat.verdict == run.stationarity.verdict);
    CHECK(stat.feas_residual ==
          doctest::Approx(run.stationarity.feas_residual).epsilon(1e-12));
    const Multipliers lam = multipliers(inst, U, config.ridge);
    const CertificateReport cert =
        dual_certificate(inst, U * U.transpose(), lam.values);
    CHECK(cert.certified == run.certificate.certified);
  }
}
