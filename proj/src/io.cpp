#include "meritflow/io.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "meritflow/random.hpp"

namespace meritflow {

namespace {

using nlohmann::json;

/// Minimal pretty JSON emitter. nlohmann prints doubles with the shortest
/// round-trip form; the file formats here pin 17 significant digits instead,
/// so writing goes through this emitter and only parsing uses nlohmann.
class JsonWriter {
 public:
  JsonWriter& begin_object() { return token("{", +1); }
  JsonWriter& end_object() { return close("}"); }
  JsonWriter& begin_array() { return token("[", +1); }
  JsonWriter& end_array() { return close("]"); }

  JsonWriter& key(const std::string& name) {
    separate();
    indent();
    out_ << '"' << name << "\": ";
    pending_value_ = true;
    return *this;
  }

  JsonWriter& value(double v) { return raw(json_number(v)); }
  JsonWriter& value(int v) { return raw(std::to_string(v)); }
  JsonWriter& value(std::uint64_t v) { return raw(std::to_string(v)); }
  JsonWriter& value(bool v) { return raw(v ? "true" : "false"); }
  JsonWriter& value(const std::string& v) { return raw('"' + v + '"'); }
  JsonWriter& value(const char* v) { return raw('"' + std::string(v) + '"'); }
  JsonWriter& null() { return raw("null"); }

  /// Compact numeric array on one line.
  JsonWriter& flat_array(const double* data, std::size_t n) {
    separate();
    if (!pending_value_) indent();
    pending_value_ = false;
    out_ << '[';
    for (std::size_t i = 0; i < n; ++i) {
      if (i) out_ << ", ";
      out_ << fmt_double(data[i]);
    }
    out_ << ']';
    needs_comma_ = true;
    return *this;
  }

  std::string str() const { return out_.str() + "\n"; }

 private:
  JsonWriter& token(const char* open, int) {
    separate();
    if (!pending_value_) indent();
    pending_value_ = false;
    out_ << open;
    ++depth_;
    needs_comma_ = false;
    return *this;
  }

  JsonWriter& close(const char* close_tok) {
    --depth_;
    out_ << '\n';
    indent();
    out_ << close_tok;
    needs_comma_ = true;
    return *this;
  }

  JsonWriter& raw(const std::string& text) {
    separate();
    if (!pending_value_) indent();
    pending_value_ = false;
    out_ << text;
    needs_comma_ = true;
    return *this;
  }

  void separate() {
    if (pending_value_) return;
    if (needs_comma_) out_ << ',';
    if (depth_ > 0) out_ << '\n';
    needs_comma_ = false;
  }

  void indent() {
    for (int i = 0; i < depth_; ++i) out_ << "  ";
  }

  std::ostringstream out_;
  int depth_ = 0;
  bool needs_comma_ = false;
  bool pending_value_ = false;
};

json parse_checked(const std::string& text) {
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded()) throw ParseError("malformed JSON");
  return j;
}

double require_number(const json& j, const char* field) {
  if (!j.contains(field) || !j[field].is_number())
    throw ParseError(std::string("missing or non-numeric field: ") + field);
  return j[field].get<double>();
}

int require_int(const json& j, const char* field) {
  if (!j.contains(field) || !j[field].is_number_integer())
    throw ParseError(std::string("missing or non-integer field: ") + field);
  return j[field].get<int>();
}

std::vector<double> require_array(const json& j, const char* field, std::size_t n) {
  if (!j.contains(field) || !j[field].is_array() || j[field].size() != n)
    throw ParseError(std::string("field has wrong shape: ") + field);
  std::vector<double> out;
  out.reserve(n);
  for (const auto& v : j[field]) {
    if (!v.is_number()) throw ParseError(std::string("non-numeric entry in ") + field);
    out.push_back(v.get<double>());
  }
  return out;
}

Matrix matrix_from_row_major(const std::vector<double>& data, int rows, int cols) {
  Matrix M(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c)
      M(r, c) = data[static_cast<std::size_t>(r) * cols + c];
  return M;
}

std::vector<double> row_major(const Matrix& M) {
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(M.size()));
  for (Eigen::Index r = 0; r < M.rows(); ++r)
    for (Eigen::Index c = 0; c < M.cols(); ++c) out.push_back(M(r, c));
  return out;
}

}  // namespace

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string json_number(double v) {
  if (!std::isfinite(v)) return "null";
  return fmt_double(v);
}

std::string instance_to_json(const Instance& inst) {
  JsonWriter w;
  w.begin_object();
  w.key("d").value(inst.d());
  w.key("m").value(inst.m());
  w.key("p").value(inst.p);
  w.key("xi").value(inst.xi);
  if (inst.seed) w.key("seed").value(*inst.seed);
  w.key("rng").value(GaussianSampler::kAlgorithm);
  w.key("matrices").begin_array();
  for (int i = 0; i < inst.m(); ++i) {
    const auto data = row_major(inst.op.matrix(i));
    w.flat_array(data.data(), data.size());
  }
  w.end_array();
  const auto b = row_major(inst.b);
  w.key("b").flat_array(b.data(), b.size());
  w.end_object();
  return w.str();
}

Instance instance_from_json(const std::string& text) {
  const json j = parse_checked(text);
  const int d = require_int(j, "d");
  const int m = require_int(j, "m");
  const int p = require_int(j, "p");
  const double xi = require_number(j, "xi");
  if (d < 1 || m < 1) throw ParseError("instance dimensions must be positive");
  std::optional<std::uint64_t> seed;
  if (j.contains("seed")) {
    if (!j["seed"].is_number_unsigned() && !j["seed"].is_number_integer())
      throw ParseError("seed must be an integer");
    seed = j["seed"].get<std::uint64_t>();
  }
  if (!j.contains("matrices") || !j["matrices"].is_array() ||
      j["matrices"].size() != static_cast<std::size_t>(m))
    throw ParseError("field has wrong shape: matrices");
  std::vector<Matrix> matrices;
  matrices.reserve(static_cast<std::size_t>(m));
  const std::size_t entries = static_cast<std::size_t>(d) * static_cast<std::size_t>(d);
  for (const auto& entry : j["matrices"]) {
    if (!entry.is_array() || entry.size() != entries)
      throw ParseError("matrix entry has wrong length");
    std::vector<double> data;
    data.reserve(entries);
    for (const auto& v : entry) {
      if (!v.is_number()) throw ParseError("non-numeric matrix entry");
      data.push_back(v.get<double>());
    }
    matrices.push_back(matrix_from_row_major(data, d, d));
  }
  const auto b_data = require_array(j, "b", static_cast<std::size_t>(m));
  Vector b(m);
  for (int i = 0; i < m; ++i) b(i) = b_data[static_cast<std::size_t>(i)];
  try {
    return Instance(MeasurementOperator(std::move(matrices)), std::move(b), p, xi, seed);
  } catch (const InvalidDimension& e) {
    throw ParseError(std::string("invalid instance: ") + e.what());
  }
}

std::string factor_to_json(const Matrix& U) {
  JsonWriter w;
  w.begin_object();
  w.key("d").value(static_cast<int>(U.rows()));
  w.key("p").value(static_cast<int>(U.cols()));
  const auto data = row_major(U);
  w.key("entries").flat_array(data.data(), data.size());
  w.end_object();
  return w.str();
}

Matrix factor_from_json(const std::string& text) {
  const json j = parse_checked(text);
  const int d = require_int(j, "d");
  const int p = require_int(j, "p");
  if (d < 1 || p < 1) throw ParseError("factor dimensions must be positive");
  const auto data =
      require_array(j, "entries", static_cast<std::size_t>(d) * static_cast<std::size_t>(p));
  return matrix_from_row_major(data, d, p);
}

std::string symmetric_to_json(const Matrix& X) {
  JsonWriter w;
  w.begin_object();
  w.key("d").value(static_cast<int>(X.rows()));
  const auto data = row_major(X);
  w.key("entries").flat_array(data.data(), data.size());
  w.end_object();
  return w.str();
}

Matrix symmetric_from_json(const std::string& text) {
  const json j = parse_checked(text);
  const int d = require_int(j, "d");
  if (d < 1) throw ParseError("matrix dimension must be positive");
  const auto data =
      require_array(j, "entries", static_cast<std::size_t>(d) * static_cast<std::size_t>(d));
  return matrix_from_row_major(data, d, d);
}

std::string sdp_solution_to_json(const SdpSolution& sol) {
  JsonWriter w;
  w.begin_object();
  w.key("d").value(static_cast<int>(sol.X.rows()));
  w.key("value").value(sol.value);
  w.key("converged").value(sol.converged);
  w.key("iterations").value(sol.iterations);
  w.key("primal_residual").value(sol.primal_residual);
  w.key("dual_residual").value(sol.dual_residual);
  w.key("gram_singular").value(sol.gram_singular);
  const auto x = row_major(sol.X);
  w.key("X").flat_array(x.data(), x.size());
  const auto dual = row_major(sol.dual_eq);
  w.key("dual_eq").flat_array(dual.data(), dual.size());
  w.end_object();
  return w.str();
}

SdpSolution sdp_solution_from_json(const std::string& text) {
  const json j = parse_checked(text);
  SdpSolution sol;
  const int d = require_int(j, "d");
  if (d < 1) throw ParseError("solution dimension must be positive");
  sol.value = require_number(j, "value");
  if (!j.contains("converged") || !j["converged"].is_boolean())
    throw ParseError("missing field: converged");
  sol.converged = j["converged"].get<bool>();
  sol.iterations = static_cast<std::size_t>(require_number(j, "iterations"));
  sol.primal_residual = require_number(j, "primal_residual");
  sol.dual_residual = require_number(j, "dual_residual");
  sol.gram_singular = j.value("gram_singular", false);
  const auto x =
      require_array(j, "X", static_cast<std::size_t>(d) * static_cast<std::size_t>(d));
  sol.X = matrix_from_row_major(x, d, d);
  if (!j.contains("dual_eq") || !j["dual_eq"].is_array())
    throw ParseError("missing field: dual_eq");
  sol.dual_eq = Vector(j["dual_eq"].size());
  Eigen::Index i = 0;
  for (const auto& v : j["dual_eq"]) {
    if (!v.is_number()) throw ParseError("non-numeric dual entry");
    sol.dual_eq(i++) = v.get<double>();
  }
  return sol;
}

std::string stationarity_to_json(const StationarityReport& report) {
  JsonWriter w;
  w.begin_object();
  w.key("verdict").value(to_string(report.verdict));
  w.key("feas_residual").value(report.feas_residual);
  w.key("merit_grad_norm").value(report.merit_grad_norm);
  w.key("manifold_grad_norm").value(report.manifold_grad_norm);
  if (report.min_restricted_hessian_eig)
    w.key("min_restricted_hessian_eig").value(*report.min_restricted_hessian_eig);
  else
    w.key("min_restricted_hessian_eig").null();
  w.key("num_rank").value(report.num_rank);
  w.key("spectral_norm").value(report.spectral_norm);
  w.end_object();
  return w.str();
}

std::string certificate_to_json(const CertificateReport& report) {
  JsonWriter w;
  w.begin_object();
  w.key("certified").value(report.certified);
  w.key("min_eig_certificate").value(report.min_eig_certificate);
  w.key("complementarity").value(report.complementarity);
  w.key("primal_feas").value(report.primal_feas);
  w.key("psd_violation").value(report.psd_violation);
  w.key("cap_violation").value(report.cap_violation);
  w.end_object();
  return w.str();
}

std::string trajectory_to_csv(const FlowTrajectory& traj) {
  const bool with_recovery =
      !traj.records.empty() && traj.records.front().recovery_error.has_value();
  std::ostringstream out;
  out << "iter,f,target,feas_gap,merit,grad_norm,num_rank,sigma_min_K";
  if (with_recovery) out << ",recovery_error";
  out << "\n";
  for (const FlowRecord& rec : traj.records) {
    out << rec.iter << ',' << fmt_double(rec.f) << ',' << fmt_double(rec.target) << ','
        << fmt_double(rec.feas_gap) << ',' << fmt_double(rec.merit) << ','
        << fmt_double(rec.grad_norm) << ',' << rec.num_rank << ','
        << fmt_double(rec.sigma_min_K);
    if (with_recovery) out << ',' << fmt_double(rec.recovery_error.value_or(0.0));
    out << "\n";
  }
  return out.str();
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const std::string& path, const std::string& content) {
  const auto parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write file: " + path);
  out << content;
}

void save_instance(const Instance& inst, const std::string& path) {
  write_file(path, instance_to_json(inst));
}

Instance load_instance(const std::string& path) {
  return instance_from_json(read_file(path));
}

void save_factor(const Matrix& U, const std::string& path) {
  write_file(path, factor_to_json(U));
}

Matrix load_factor(const std::string& path) { return factor_from_json(read_file(path)); }

void save_symmetric(const Matrix& X, const std::string& path) {
  write_file(path, symmetric_to_json(X));
}

Matrix load_symmetric(const std::string& path) {
  return symmetric_from_json(read_file(path));
}

void save_sdp_solution(const SdpSolution& sol, const std::string& path) {
  write_file(path, sdp_solution_to_json(sol));
}

SdpSolution load_sdp_solution(const std::string& path) {
  return sdp_solution_from_json(read_file(path));
}

void save_trajectory(const FlowTrajectory& traj, const std::string& path) {
  write_file(path, trajectory_to_csv(traj));
}

}  // namespace meritflow
