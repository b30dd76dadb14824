#include "ddmsi/io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace ddmsi {

namespace {

std::string join(const std::string& parent, const std::string& key) {
  return parent.empty() ? key : parent + "." + key;
}

void expect_shape(const Matrix& M, Eigen::Index rows, Eigen::Index cols,
                  const std::string& path) {
  if (M.rows() != rows || M.cols() != cols) {
    std::ostringstream os;
    os << "expected " << rows << " x " << cols << ", got " << M.rows() << " x " << M.cols();
    throw SchemaError(path, os.str());
  }
}

Json probe_to_json(const Probe& p) {
  return {{"h", p.h}, {"status", to_string(p.status)}, {"stage", p.stage}};
}

double scalar_or(const Json& j, const char* key, double fallback) {
  return j.contains(key) ? j.at(key).get<double>() : fallback;
}

}  // namespace

SchemaError::SchemaError(std::string path, const std::string& what)
    : std::runtime_error("schema error at '" + path + "': " + what), path_(std::move(path)) {}

Json matrix_to_json(const Matrix& M) {
  Json rows = Json::array();
  for (Eigen::Index i = 0; i < M.rows(); ++i) {
    Json row = Json::array();
    for (Eigen::Index k = 0; k < M.cols(); ++k) row.push_back(M(i, k));
    rows.push_back(std::move(row));
  }
  return rows;
}

Matrix matrix_from_json(const Json& j, const std::string& path) {
  if (!j.is_array()) throw SchemaError(path, "expected an array of rows");
  if (j.empty()) return Matrix(0, 0);
  // A flat numeric array is read as a single row.
  if (j.front().is_number()) {
    Matrix M(1, static_cast<Eigen::Index>(j.size()));
    for (std::size_t k = 0; k < j.size(); ++k) {
      if (!j[k].is_number()) throw SchemaError(path, "non-numeric entry");
      M(0, static_cast<Eigen::Index>(k)) = j[k].get<double>();
    }
    return M;
  }
  const std::size_t cols = j.front().is_array() ? j.front().size() : 0;
  Matrix M(static_cast<Eigen::Index>(j.size()), static_cast<Eigen::Index>(cols));
  for (std::size_t i = 0; i < j.size(); ++i) {
    const Json& row = j[i];
    const std::string row_path = path + "[" + std::to_string(i) + "]";
    if (!row.is_array()) throw SchemaError(row_path, "expected an array");
    if (row.size() != cols) throw SchemaError(row_path, "ragged row");
    for (std::size_t k = 0; k < cols; ++k) {
      if (!row[k].is_number()) throw SchemaError(row_path, "non-numeric entry");
      M(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = row[k].get<double>();
    }
  }
  return M;
}

Json vector_to_json(const std::vector<double>& v) { return Json(v); }

std::vector<double> vector_from_json(const Json& j, const std::string& path) {
  if (!j.is_array()) throw SchemaError(path, "expected an array");
  std::vector<double> out;
  out.reserve(j.size());
  for (const auto& v : j) {
    if (!v.is_number()) throw SchemaError(path, "non-numeric entry");
    out.push_back(v.get<double>());
  }
  return out;
}

const Json& require_field(const Json& obj, const std::string& key, const std::string& parent) {
  if (!obj.is_object()) throw SchemaError(parent.empty() ? "<root>" : parent, "expected an object");
  auto it = obj.find(key);
  if (it == obj.end()) throw SchemaError(join(parent, key), "missing field");
  return *it;
}

double number_field(const Json& obj, const std::string& key, const std::string& parent) {
  const Json& v = require_field(obj, key, parent);
  if (!v.is_number()) throw SchemaError(join(parent, key), "expected a number");
  return v.get<double>();
}

int int_field(const Json& obj, const std::string& key, const std::string& parent) {
  const Json& v = require_field(obj, key, parent);
  if (!v.is_number_integer()) throw SchemaError(join(parent, key), "expected an integer");
  return v.get<int>();
}

Json dataset_to_json(const DataSet& data, const NoiseBound& noise, const DatasetMeta& meta) {
  Json j;
  j["n"] = data.states();
  j["m"] = data.inputs();
  j["m_d"] = data.disturbances();
  j["N"] = data.samples();
  j["tau"] = vector_to_json(data.tau);
  j["X"] = matrix_to_json(data.X);
  j["U"] = matrix_to_json(data.U);
  j["Xdot"] = matrix_to_json(data.Xdot);
  j["Bd"] = matrix_to_json(data.Bd);
  j["noise"] = {{"Qd", matrix_to_json(noise.Qd)},
                {"Sd", matrix_to_json(noise.Sd)},
                {"Rd", matrix_to_json(noise.Rd)}};
  if (noise.pointwise_bound) j["noise"]["pointwise_bound"] = *noise.pointwise_bound;
  j["meta"] = {{"generator", meta.generator}};
  j["meta"]["seed"] = meta.seed ? Json(*meta.seed) : Json(nullptr);
  return j;
}

DatasetFile dataset_from_json(const Json& j) {
  const int n = int_field(j, "n", "");
  const int m = int_field(j, "m", "");
  const int md = int_field(j, "m_d", "");
  const int N = int_field(j, "N", "");
  if (n < 1) throw SchemaError("n", "must be positive");
  if (m < 1) throw SchemaError("m", "must be positive");
  if (md < 1) throw SchemaError("m_d", "must be positive");
  if (N < 1) throw SchemaError("N", "must be positive");

  DatasetFile f;
  f.data.tau = vector_from_json(require_field(j, "tau", ""), "tau");
  if (f.data.tau.size() != static_cast<std::size_t>(N)) {
    throw SchemaError("tau", "length " + std::to_string(f.data.tau.size()) +
                                 " disagrees with N = " + std::to_string(N));
  }
  f.data.X = matrix_from_json(require_field(j, "X", ""), "X");
  f.data.U = matrix_from_json(require_field(j, "U", ""), "U");
  f.data.Xdot = matrix_from_json(require_field(j, "Xdot", ""), "Xdot");
  f.data.Bd = matrix_from_json(require_field(j, "Bd", ""), "Bd");
  expect_shape(f.data.X, n, N, "X");
  expect_shape(f.data.U, m, N, "U");
  expect_shape(f.data.Xdot, n, N, "Xdot");
  expect_shape(f.data.Bd, n, md, "Bd");

  const Json& noise = require_field(j, "noise", "");
  f.noise.Qd = matrix_from_json(require_field(noise, "Qd", "noise"), "noise.Qd");
  f.noise.Sd = matrix_from_json(require_field(noise, "Sd", "noise"), "noise.Sd");
  f.noise.Rd = matrix_from_json(require_field(noise, "Rd", "noise"), "noise.Rd");
  expect_shape(f.noise.Qd, N, N, "noise.Qd");
  expect_shape(f.noise.Sd, N, md, "noise.Sd");
  expect_shape(f.noise.Rd, md, md, "noise.Rd");
  if (noise.contains("pointwise_bound") && !noise.at("pointwise_bound").is_null()) {
    f.noise.pointwise_bound = number_field(noise, "pointwise_bound", "noise");
  }

  if (j.contains("meta")) {
    const Json& meta = j.at("meta");
    if (!meta.is_object()) throw SchemaError("meta", "expected an object");
    if (meta.contains("seed") && !meta.at("seed").is_null()) {
      if (!meta.at("seed").is_number_unsigned()) {
        throw SchemaError("meta.seed", "expected a non-negative integer");
      }
      f.meta.seed = meta.at("seed").get<std::uint64_t>();
    }
    if (meta.contains("generator")) {
      if (!meta.at("generator").is_string()) throw SchemaError("meta.generator", "expected a string");
      f.meta.generator = meta.at("generator").get<std::string>();
    }
  }

  try {
    f.data.check();
  } catch (const std::invalid_argument& e) {
    throw SchemaError("<dataset>", e.what());
  }
  try {
    f.noise.check();
  } catch (const std::invalid_argument& e) {
    throw SchemaError("noise", e.what());
  }
  return f;
}

void save_dataset(const std::filesystem::path& path, const DataSet& data,
                  const NoiseBound& noise, const DatasetMeta& meta) {
  write_json_file(path, dataset_to_json(data, noise, meta));
}

DatasetFile load_dataset(const std::filesystem::path& path) {
  return dataset_from_json(read_json_file(path));
}

Json consistency_set_to_json(const ConsistencySet& set) {
  Json j;
  j["n"] = set.n;
  j["m"] = set.m;
  j["m_d"] = set.m_d;
  j["Pc"] = matrix_to_json(set.Pc);
  j["inertia"] = {{"negative", set.pc_inertia.negative},
                  {"zero", set.pc_inertia.zero},
                  {"positive", set.pc_inertia.positive}};
  if (set.Pc_dual) j["Pc_dual"] = matrix_to_json(*set.Pc_dual);
  if (set.condition) j["condition"] = *set.condition;
  return j;
}

ConsistencySet consistency_set_from_json(const Json& j) {
  const int n = int_field(j, "n", "");
  const int m = int_field(j, "m", "");
  const int md = int_field(j, "m_d", "");
  Matrix Pc = matrix_from_json(require_field(j, "Pc", ""), "Pc");
  expect_shape(Pc, 2 * n + m, 2 * n + m, "Pc");
  try {
    return consistency_set_from_matrix(std::move(Pc), n, m, md);
  } catch (const std::invalid_argument& e) {
    throw SchemaError("Pc", e.what());
  }
}

Json trajectory_to_json(const Trajectory& traj) {
  Json j;
  j["t"] = vector_to_json(traj.grid);
  j["X"] = matrix_to_json(traj.states);
  j["U"] = matrix_to_json(traj.inputs);
  if (traj.derivatives) j["Xdot"] = matrix_to_json(*traj.derivatives);
  return j;
}

Json lmi_problem_to_json(const LmiProblem& problem) {
  Json j;
  j["tag"] = problem.tag;
  j["h"] = problem.h;
  j["metadata"] = problem.metadata;
  j["num_scalars"] = problem.variables.num_scalars();
  Json vars = Json::array();
  for (const auto& v : problem.variables.specs()) {
    const char* kind = v.kind == VariableKind::Scalar      ? "scalar"
                       : v.kind == VariableKind::Symmetric ? "symmetric"
                                                           : "full";
    vars.push_back({{"name", v.name},
                    {"rows", v.rows},
                    {"cols", v.cols},
                    {"kind", kind},
                    {"offset", v.offset},
                    {"count", v.count}});
  }
  j["variables"] = vars;
  Json cons = Json::array();
  for (const auto& c : problem.constraints) {
    Json terms = Json::object();
    for (const auto& [var, coeff] : c.expr.terms()) terms[std::to_string(var)] = matrix_to_json(coeff);
    cons.push_back({{"name", c.name},
                    {"sense", c.sense == Sense::NegativeDefinite ? "negative" : "positive"},
                    {"hard", c.hard},
                    {"size", c.expr.rows()},
                    {"constant", matrix_to_json(c.expr.constant_term())},
                    {"terms", terms}});
  }
  j["constraints"] = cons;
  return j;
}

Json bisection_to_json(const BisectionResult& result) {
  Json j;
  j["h_star"] = result.h_star ? Json(*result.h_star) : Json(nullptr);
  j["non_monotone"] = result.non_monotone;
  j["message"] = result.message;
  Json trace = Json::array();
  for (const auto& p : result.trace) trace.push_back(probe_to_json(p));
  j["trace"] = trace;
  if (result.witness) j["solver_diagnostics"] = result.witness->solver_diagnostics;
  return j;
}

Json analysis_certificate_to_json(const AnalysisCertificate& cert) {
  Json j;
  j["h"] = cert.h;
  j["witnesses"] = {{"P1", matrix_to_json(cert.P1)},
                    {"P2", matrix_to_json(cert.P2)},
                    {"P3", matrix_to_json(cert.P3)},
                    {"R", matrix_to_json(cert.R)},
                    {"lambda1", cert.lambda1},
                    {"lambda2", cert.lambda2}};
  j["margin"] = cert.margin;
  return j;
}

Json design_certificate_to_json(const DesignCertificate& cert) {
  Json j;
  j["h"] = cert.h;
  j["K"] = matrix_to_json(cert.K);
  j["witnesses"] = {{"Q1", matrix_to_json(cert.Q1)},
                    {"Q2", matrix_to_json(cert.Q2)},
                    {"Q3", matrix_to_json(cert.Q3)},
                    {"R", matrix_to_json(cert.R)},
                    {"lambda1", cert.lambda1},
                    {"lambda2", cert.lambda2}};
  j["margin"] = cert.margin;
  return j;
}

AnalysisCertificate analysis_certificate_from_json(const Json& j) {
  AnalysisCertificate c;
  c.h = number_field(j, "h", "");
  const Json& w = require_field(j, "witnesses", "");
  c.P1 = matrix_from_json(require_field(w, "P1", "witnesses"), "witnesses.P1");
  c.P2 = matrix_from_json(require_field(w, "P2", "witnesses"), "witnesses.P2");
  c.P3 = matrix_from_json(require_field(w, "P3", "witnesses"), "witnesses.P3");
  c.R = matrix_from_json(require_field(w, "R", "witnesses"), "witnesses.R");
  c.lambda1 = scalar_or(w, "lambda1", 0.0);
  c.lambda2 = scalar_or(w, "lambda2", 0.0);
  c.margin = scalar_or(j, "margin", 0.0);
  return c;
}

DesignCertificate design_certificate_from_json(const Json& j) {
  DesignCertificate c;
  c.h = number_field(j, "h", "");
  c.K = matrix_from_json(require_field(j, "K", ""), "K");
  const Json& w = require_field(j, "witnesses", "");
  c.Q1 = matrix_from_json(require_field(w, "Q1", "witnesses"), "witnesses.Q1");
  c.Q2 = matrix_from_json(require_field(w, "Q2", "witnesses"), "witnesses.Q2");
  c.Q3 = matrix_from_json(require_field(w, "Q3", "witnesses"), "witnesses.Q3");
  c.R = matrix_from_json(require_field(w, "R", "witnesses"), "witnesses.R");
  c.lambda1 = scalar_or(w, "lambda1", 0.0);
  c.lambda2 = scalar_or(w, "lambda2", 0.0);
  c.margin = scalar_or(j, "margin", 0.0);
  return c;
}

Json design_outcome_to_json(const DesignOutcome& outcome) {
  Json j = design_certificate_to_json(outcome.best);
  j["initial"] = analysis_certificate_to_json(outcome.initial);
  j["initial_search"] = bisection_to_json(outcome.initial_search);
  Json trace = Json::array();
  for (const auto& s : outcome.trace) {
    trace.push_back({{"iteration", s.iteration},
                     {"h_current", s.h_current},
                     {"h_trial", s.h_trial},
                     {"growth", s.growth},
                     {"rounds", s.rounds},
                     {"design_status", to_string(s.design_status)},
                     {"analysis_status", to_string(s.analysis_status)},
                     {"accepted", s.accepted}});
  }
  j["trace"] = trace;
  j["metadata"] = outcome.metadata;
  return j;
}

std::string config_hash(const Json& config) {
  std::uint64_t hash = 1469598103934665603ULL;
  for (unsigned char c : config.dump()) {
    hash ^= c;
    hash *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(hash));
  return buf;
}

Json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path.string() + "'");
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw SchemaError("<root>", std::string("invalid JSON in '") + path.string() + "': " + e.what());
  }
}

void write_json_file(const std::filesystem::path& path, const Json& j) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << j.dump(2) << '\n';
}

}  // namespace ddmsi
