#include "ddmsi/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <condition_variable>
#include <cstdio>
#include <deque>
#include <fstream>
#include <limits>
#include <mutex>
#include <set>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "ddmsi/data_consistency.hpp"

namespace ddmsi {

namespace fs = std::filesystem;

namespace {

std::string fmt(const char* spec, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

void check_keys(const Json& obj, const std::set<std::string>& allowed, const std::string& parent) {
  if (!obj.is_object()) throw SchemaError(parent.empty() ? "<root>" : parent, "expected an object");
  for (const auto& [key, value] : obj.items()) {
    if (!allowed.count(key)) {
      throw SchemaError(parent.empty() ? key : parent + "." + key, "unknown field");
    }
  }
}

bool present(const Json& obj, const std::string& key) {
  return obj.contains(key) && !obj.at(key).is_null();
}

std::vector<double> numbers(const Json& obj, const std::string& key, const std::string& parent) {
  const std::string path = parent.empty() ? key : parent + "." + key;
  return vector_from_json(require_field(obj, key, parent), path);
}

Json optional_number(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

// Orders file writes from all workers through one thread.
class SerialWriter {
 public:
  SerialWriter() : thread_([this] { run(); }) {}
  ~SerialWriter() { finish(); }

  void submit(fs::path path, std::string content) {
    {
      std::lock_guard lock(mutex_);
      queue_.emplace_back(std::move(path), std::move(content));
    }
    cv_.notify_one();
  }

  /// Flushes the queue; rethrows the first write failure.
  void finish() {
    {
      std::lock_guard lock(mutex_);
      done_ = true;
    }
    cv_.notify_one();
    if (thread_.joinable()) thread_.join();
    if (!error_.empty()) {
      std::string e;
      std::swap(e, error_);
      throw std::runtime_error(e);
    }
  }

 private:
  void run() {
    for (;;) {
      std::pair<fs::path, std::string> item;
      {
        std::unique_lock lock(mutex_);
        cv_.wait(lock, [this] { return done_ || !queue_.empty(); });
        if (queue_.empty()) return;
        item = std::move(queue_.front());
        queue_.pop_front();
      }
      if (item.first.has_parent_path()) {
        std::error_code ec;
        fs::create_directories(item.first.parent_path(), ec);
      }
      std::ofstream out(item.first, std::ios::binary);
      out << item.second;
      if (!out && error_.empty()) error_ = "cannot write '" + item.first.string() + "'";
    }
  }

  std::mutex mutex_;
  std::condition_variable cv_;
  std::deque<std::pair<fs::path, std::string>> queue_;
  bool done_ = false;
  std::string error_;
  std::thread thread_;
};

std::string level_tag(double d_bar) { return fmt("%g", d_bar); }

std::string certificate_name(const std::string& table, double d_bar, std::uint64_t seed) {
  return table + "_d" + level_tag(d_bar) + "_s" + std::to_string(seed) + ".json";
}

Json system_json(const LtiSystem& sys) {
  return {{"A", matrix_to_json(sys.A())},
          {"B", matrix_to_json(sys.B())},
          {"Bd", matrix_to_json(sys.Bd())}};
}

Matrix scalar_matrix(double v) { return Matrix::Constant(1, 1, v); }

ResultRow run_row(const ExperimentConfig& cfg, const std::string& table, double d_bar,
                  std::uint64_t seed, Json& certificate) {
  ResultRow row;
  row.table = table;
  row.d_bar = d_bar;
  row.seed = seed;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    const DatasetFile ds = generate_example_dataset(cfg, d_bar, seed);
    const ConsistencySet set = dualize(build_consistency_set(ds.data, ds.noise));
    const FeedbackGain gain = cfg.feedback();
    if (table == "analysis") {
      const AnalysisOutcome a = analyze_msi(set, gain, cfg.bisection, cfg.solver);
      row.K = gain.K();
      row.message = a.search.message;
      if (a.certificate) {
        row.h = a.certificate->h;
        row.status = "ok";
        certificate = analysis_certificate_file_json(set, gain, a, cfg.bisection);
      } else {
        row.status = "no-certificate";
      }
    } else {
      const DesignOutcome d = design_iterate(set, gain, cfg.bisection, cfg.iteration, cfg.solver);
      int accepted = 0;
      for (const auto& s : d.trace) accepted += s.accepted ? 1 : 0;
      row.h = d.best.h;
      row.K = d.best.K;
      row.status = "ok";
      row.message = "initial h " + fmt("%.6g", d.initial.h) + ", " + std::to_string(accepted) +
                    " of " + std::to_string(d.trace.size()) + " steps accepted";
      certificate = design_certificate_file_json(set, d, cfg.bisection);
    }
  } catch (const std::exception& e) {
    row.status = "error";
    row.message = e.what();
  }
  row.runtime_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return row;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t k = v.size() / 2;
  return v.size() % 2 ? v[k] : 0.5 * (v[k - 1] + v[k]);
}

}  // namespace

const char* to_string(Mode mode) {
  switch (mode) {
    case Mode::Simulate: return "simulate";
    case Mode::EstimateDeriv: return "estimate-deriv";
    case Mode::BuildSet: return "build-set";
    case Mode::Analyze: return "analyze";
    case Mode::Design: return "design";
    case Mode::ReproduceExample: return "reproduce-example";
  }
  return "?";
}

Mode parse_mode(const std::string& name) {
  for (Mode m : {Mode::Simulate, Mode::EstimateDeriv, Mode::BuildSet, Mode::Analyze, Mode::Design,
                 Mode::ReproduceExample}) {
    if (name == to_string(m)) return m;
  }
  throw std::invalid_argument("unknown mode '" + name + "'");
}

ExperimentConfig::ExperimentConfig()
    : A((Matrix(2, 2) << 0.0, 1.0, 0.0, -0.1).finished()),
      B((Matrix(2, 1) << 0.0, 0.1).finished()),
      Bd(Matrix::Identity(2, 2)),
      gain((Matrix(1, 2) << -3.75, -11.5).finished()) {}

ExperimentConfig ExperimentConfig::from_json(const Json& j) {
  check_keys(j,
             {"mode", "system", "dataset", "gain", "noise_levels", "seeds", "samples", "gaps",
              "input_range", "x0", "simulation", "derivative", "bisection", "iteration", "solver",
              "tables", "output", "jobs"},
             "");
  ExperimentConfig c;
  if (present(j, "mode")) {
    try {
      c.mode = parse_mode(j.at("mode").get<std::string>());
    } catch (const std::exception& e) {
      throw SchemaError("mode", e.what());
    }
  }
  if (present(j, "system")) {
    const Json& s = j.at("system");
    check_keys(s, {"A", "B", "Bd", "known"}, "system");
    c.A = matrix_from_json(require_field(s, "A", "system"), "system.A");
    c.B = matrix_from_json(require_field(s, "B", "system"), "system.B");
    c.Bd = present(s, "Bd") ? matrix_from_json(s.at("Bd"), "system.Bd")
                            : Matrix::Identity(c.A.rows(), c.A.rows());
    if (present(s, "known")) {
      if (!s.at("known").is_boolean()) throw SchemaError("system.known", "expected a boolean");
      c.system_known = s.at("known").get<bool>();
    }
  }
  if (present(j, "dataset")) {
    if (!j.at("dataset").is_string()) throw SchemaError("dataset", "expected a path string");
    c.dataset = j.at("dataset").get<std::string>();
  }
  if (j.contains("gain")) {
    if (j.at("gain").is_null()) c.gain.reset();
    else c.gain = matrix_from_json(j.at("gain"), "gain");
  }
  if (present(j, "noise_levels")) c.noise_levels = numbers(j, "noise_levels", "");
  if (present(j, "seeds")) {
    c.seeds.clear();
    for (const auto& s : j.at("seeds")) {
      if (!s.is_number_unsigned()) throw SchemaError("seeds", "expected non-negative integers");
      c.seeds.push_back(s.get<std::uint64_t>());
    }
  }
  if (present(j, "samples")) c.samples = int_field(j, "samples", "");
  if (present(j, "gaps")) {
    c.gaps.clear();
    const Json& g = j.at("gaps");
    if (!g.is_array()) throw SchemaError("gaps", "expected an array");
    for (std::size_t i = 0; i < g.size(); ++i) {
      const std::string path = "gaps[" + std::to_string(i) + "]";
      check_keys(g[i], {"count", "gap"}, path);
      c.gaps.push_back({int_field(g[i], "count", path), number_field(g[i], "gap", path)});
    }
  }
  if (present(j, "input_range")) {
    const auto r = numbers(j, "input_range", "");
    if (r.size() != 2) throw SchemaError("input_range", "expected [low, high]");
    c.input_low = r[0];
    c.input_high = r[1];
  }
  if (present(j, "x0")) c.x0 = numbers(j, "x0", "");
  if (present(j, "simulation")) {
    const Json& s = j.at("simulation");
    check_keys(s, {"gap", "horizon", "output_dt", "x0"}, "simulation");
    if (present(s, "gap")) c.simulation.gap = number_field(s, "gap", "simulation");
    if (present(s, "horizon")) c.simulation.horizon = number_field(s, "horizon", "simulation");
    if (present(s, "output_dt")) c.simulation.output_dt = number_field(s, "output_dt", "simulation");
    if (present(s, "x0")) c.simulation.x0 = numbers(s, "x0", "simulation");
  }
  if (present(j, "derivative")) {
    const Json& d = j.at("derivative");
    check_keys(d, {"a_bar", "b_bar"}, "derivative");
    if (present(d, "a_bar")) c.a_bar = number_field(d, "a_bar", "derivative");
    if (present(d, "b_bar")) c.b_bar = number_field(d, "b_bar", "derivative");
  }
  if (present(j, "bisection")) {
    const Json& b = j.at("bisection");
    check_keys(b, {"h_min", "h_max", "abs_tol", "max_iters", "prescan_points", "margin"},
               "bisection");
    if (present(b, "h_min")) c.bisection.h_min = number_field(b, "h_min", "bisection");
    if (present(b, "h_max")) c.bisection.h_max = number_field(b, "h_max", "bisection");
    if (present(b, "abs_tol")) c.bisection.abs_tol = number_field(b, "abs_tol", "bisection");
    if (present(b, "max_iters")) c.bisection.max_iters = int_field(b, "max_iters", "bisection");
    if (present(b, "prescan_points")) {
      c.bisection.prescan_points = int_field(b, "prescan_points", "bisection");
    }
    if (present(b, "margin")) c.bisection.margin = number_field(b, "margin", "bisection");
  }
  if (present(j, "iteration")) {
    const Json& it = j.at("iteration");
    check_keys(it, {"growth", "max_outer_iters", "stall_limit", "h_limit", "inner_rounds"},
               "iteration");
    if (present(it, "growth")) c.iteration.h_growth_factor = number_field(it, "growth", "iteration");
    if (present(it, "max_outer_iters")) {
      c.iteration.max_outer_iters = int_field(it, "max_outer_iters", "iteration");
    }
    if (present(it, "stall_limit")) c.iteration.stall_limit = int_field(it, "stall_limit", "iteration");
    if (present(it, "h_limit")) c.iteration.h_limit = number_field(it, "h_limit", "iteration");
    if (present(it, "inner_rounds")) {
      c.iteration.inner_rounds = int_field(it, "inner_rounds", "iteration");
    }
  }
  if (present(j, "solver")) {
    const Json& s = j.at("solver");
    check_keys(s, {"backend", "max_iters", "tolerance"}, "solver");
    if (present(s, "backend")) {
      try {
        c.solver.backend = parse_backend(s.at("backend").get<std::string>());
      } catch (const std::exception& e) {
        throw SchemaError("solver.backend", e.what());
      }
    }
    if (present(s, "max_iters")) c.solver.max_iters = int_field(s, "max_iters", "solver");
    if (present(s, "tolerance")) c.solver.tolerance = number_field(s, "tolerance", "solver");
  }
  if (present(j, "tables")) {
    c.tables.clear();
    for (const auto& t : j.at("tables")) {
      if (!t.is_string()) throw SchemaError("tables", "expected strings");
      c.tables.push_back(t.get<std::string>());
    }
  }
  if (present(j, "output")) {
    if (!j.at("output").is_string()) throw SchemaError("output", "expected a path string");
    c.output = j.at("output").get<std::string>();
  }
  if (present(j, "jobs")) c.jobs = int_field(j, "jobs", "");
  return c;
}

Json ExperimentConfig::to_json() const {
  Json j;
  j["mode"] = to_string(mode);
  j["system"] = {{"A", matrix_to_json(A)},
                 {"B", matrix_to_json(B)},
                 {"Bd", matrix_to_json(Bd)},
                 {"known", system_known}};
  j["dataset"] = dataset ? Json(dataset->string()) : Json(nullptr);
  j["gain"] = gain ? matrix_to_json(*gain) : Json(nullptr);
  j["noise_levels"] = noise_levels;
  j["seeds"] = seeds;
  j["samples"] = samples;
  Json g = Json::array();
  for (const auto& s : gaps) g.push_back({{"count", s.count}, {"gap", s.gap}});
  j["gaps"] = g;
  j["input_range"] = {input_low, input_high};
  j["x0"] = x0 ? Json(*x0) : Json(nullptr);
  j["simulation"] = {{"gap", simulation.gap},
                     {"horizon", simulation.horizon},
                     {"output_dt", optional_number(simulation.output_dt)},
                     {"x0", simulation.x0}};
  j["derivative"] = {{"a_bar", optional_number(a_bar)}, {"b_bar", optional_number(b_bar)}};
  j["bisection"] = {{"h_min", bisection.h_min},
                    {"h_max", bisection.h_max},
                    {"abs_tol", bisection.abs_tol},
                    {"max_iters", bisection.max_iters},
                    {"prescan_points", bisection.prescan_points},
                    {"margin", optional_number(bisection.margin)}};
  j["iteration"] = {{"growth", iteration.h_growth_factor},
                    {"max_outer_iters", iteration.max_outer_iters},
                    {"stall_limit", iteration.stall_limit},
                    {"h_limit", iteration.h_limit},
                    {"inner_rounds", iteration.inner_rounds}};
  j["solver"] = {{"backend", to_string(solver.backend)},
                 {"max_iters", solver.max_iters},
                 {"tolerance", solver.tolerance}};
  j["tables"] = tables;
  j["output"] = output.string();
  j["jobs"] = jobs;
  return j;
}

void ExperimentConfig::validate() const {
  auto fail = [&](const std::string& what) {
    throw std::invalid_argument(std::string(to_string(mode)) + ": " + what);
  };
  bisection.check();
  iteration.check();
  if (jobs < 1) fail("jobs must be >= 1");
  if (!(solver.tolerance > 0.0)) fail("solver.tolerance must be positive");
  if (solver.max_iters < 0) fail("solver.max_iters must be >= 0");

  const bool needs_system = mode == Mode::Simulate || mode == Mode::ReproduceExample ||
                            (mode == Mode::Analyze && !dataset);
  const bool needs_dataset =
      mode == Mode::EstimateDeriv || mode == Mode::BuildSet || mode == Mode::Design;
  const bool needs_gain =
      mode == Mode::Analyze || mode == Mode::Design || mode == Mode::ReproduceExample;
  const bool needs_sweep = mode == Mode::Simulate || mode == Mode::ReproduceExample;

  if (needs_system) {
    if (!system_known) fail("the system is marked unknown; provide a dataset instead");
    (void)system();
  }
  if (needs_dataset && !dataset) fail("a dataset path is required");
  if (needs_gain) {
    if (!gain) fail("a feedback gain is required");
    if (needs_system && (gain->rows() != B.cols() || gain->cols() != A.rows())) {
      fail("gain must be m x n for the configured system");
    }
  }
  if (needs_sweep) {
    if (noise_levels.empty()) fail("noise_levels must not be empty");
    for (double d : noise_levels) {
      if (!(d > 0.0) || !std::isfinite(d)) fail("noise levels must be positive");
    }
    if (seeds.empty()) fail("seeds must not be empty");
    if (samples < 2) fail("samples must be >= 2");
    int total = 0;
    for (const auto& g : gaps) {
      if (g.count < 1 || !(g.gap > 0.0)) fail("gap segments need count >= 1 and gap > 0");
      total += g.count;
    }
    if (total != samples - 1) {
      fail("gap counts sum to " + std::to_string(total) + ", need samples - 1 = " +
           std::to_string(samples - 1));
    }
    if (!(input_low < input_high)) fail("input_range must satisfy low < high");
    if (x0 && static_cast<Eigen::Index>(x0->size()) != A.rows()) fail("x0 has the wrong size");
  }
  if (mode == Mode::Simulate && gain) {
    if (!(simulation.gap > 0.0) || !(simulation.horizon > 0.0)) {
      fail("simulation gap and horizon must be positive");
    }
    if (static_cast<Eigen::Index>(simulation.x0.size()) != A.rows()) {
      fail("simulation.x0 has the wrong size");
    }
  }
  if (mode == Mode::EstimateDeriv) {
    if (!a_bar || !b_bar) fail("derivative.a_bar and derivative.b_bar are required");
    if (!(*a_bar >= 0.0) || !(*b_bar >= 0.0)) fail("norm bounds must be non-negative");
  }
  if (mode == Mode::ReproduceExample) {
    if (tables.empty()) fail("tables must not be empty");
    for (const auto& t : tables) {
      if (t != "analysis" && t != "design") fail("unknown table '" + t + "'");
    }
  }
}

LtiSystem ExperimentConfig::system() const { return LtiSystem(A, B, Bd); }

FeedbackGain ExperimentConfig::feedback() const {
  if (!gain) throw std::invalid_argument("no feedback gain configured");
  return FeedbackGain(*gain);
}

std::vector<double> ExperimentConfig::sampling_times() const {
  std::vector<double> t{0.0};
  double now = 0.0;
  for (const auto& g : gaps) {
    for (int k = 0; k < g.count; ++k) {
      now += g.gap;
      t.push_back(now);
    }
  }
  return t;
}

DatasetFile generate_example_dataset(const ExperimentConfig& cfg, double d_bar,
                                     std::uint64_t seed, Matrix* realized) {
  const LtiSystem sys = cfg.system();
  std::optional<Vector> x0;
  if (cfg.x0) x0 = Eigen::Map<const Vector>(cfg.x0->data(), static_cast<Eigen::Index>(cfg.x0->size()));
  ExperimentData ex = generate_experiment_data(
      sys, cfg.sampling_times(), uniform_box_input(sys.inputs(), cfg.input_low, cfg.input_high),
      uniform_ball_disturbance(sys.disturbances(), d_bar), seed, x0);
  if (realized) *realized = ex.disturbances;
  DatasetFile f;
  f.data = std::move(ex.data);
  f.noise = NoiseBound::from_pointwise(d_bar, f.data.samples(), f.data.disturbances());
  f.meta.seed = seed;
  f.meta.generator = ex.generator;
  return f;
}

bool ResultTable::all_ok() const {
  return std::all_of(rows.begin(), rows.end(), [](const ResultRow& r) { return r.status == "ok"; });
}

std::optional<double> ResultTable::median(const std::string& table, double d_bar) const {
  std::vector<double> hs;
  for (const auto& r : rows) {
    if (r.table == table && r.d_bar == d_bar && r.status == "ok" && r.h) hs.push_back(*r.h);
  }
  if (hs.empty()) return std::nullopt;
  return median_of(std::move(hs));
}

const std::vector<double>& paper_noise_levels() {
  static const std::vector<double> v{0.001, 0.005, 0.01, 0.02, 0.03, 0.04, 0.05};
  return v;
}

const std::vector<double>& paper_analysis_bounds() {
  static const std::vector<double> v{1.59, 1.49, 1.38, 1.17, 1.0, 0.86, 0.67};
  return v;
}

const std::vector<double>& paper_design_bounds() {
  static const std::vector<double> v{142.6, 28.5, 13.8, 6.3, 4.0, 2.9, 2.2};
  return v;
}

Json model_certificate_json(const LtiSystem& sys, const FeedbackGain& gain,
                            const AnalysisOutcome& outcome, const BisectionConfig& cfg) {
  if (!outcome.certificate) throw std::invalid_argument("model_certificate_json: no certificate");
  const double h = outcome.certificate->h;
  return {{"kind", "model-based"},
          {"version", kVersion},
          {"h", h},
          {"K", matrix_to_json(gain.K())},
          {"margin", cfg.margin_at(h)},
          {"system", system_json(sys)},
          {"certificate", analysis_certificate_to_json(*outcome.certificate)},
          {"search", bisection_to_json(outcome.search)}};
}

Json analysis_certificate_file_json(const ConsistencySet& set, const FeedbackGain& gain,
                                    const AnalysisOutcome& outcome,
                                    const BisectionConfig& cfg) {
  if (!outcome.certificate) {
    throw std::invalid_argument("analysis_certificate_file_json: no certificate");
  }
  const double h = outcome.certificate->h;
  return {{"kind", "analysis"},
          {"version", kVersion},
          {"h", h},
          {"K", matrix_to_json(gain.K())},
          {"margin", cfg.margin_at(h)},
          {"consistency_set", consistency_set_to_json(set)},
          {"certificate", analysis_certificate_to_json(*outcome.certificate)},
          {"search", bisection_to_json(outcome.search)}};
}

Json design_certificate_file_json(const ConsistencySet& set, const DesignOutcome& outcome,
                                  const BisectionConfig& cfg) {
  const double h = outcome.best.h;
  return {{"kind", "design"},
          {"version", kVersion},
          {"h", h},
          {"K", matrix_to_json(outcome.best.K)},
          {"margin", cfg.margin_at(h)},
          {"consistency_set", consistency_set_to_json(set)},
          {"certificate", design_certificate_to_json(outcome.best)},
          {"analysis_certificate", outcome.best_analysis
                                       ? analysis_certificate_to_json(*outcome.best_analysis)
                                       : Json(nullptr)},
          {"iteration", design_outcome_to_json(outcome)}};
}

VerifyReport verify_certificate(const Json& j, const SolverOptions& solver) {
  VerifyReport rep;
  const Json& kind = require_field(j, "kind", "");
  if (!kind.is_string()) throw SchemaError("kind", "expected a string");
  rep.kind = kind.get<std::string>();
  rep.h = number_field(j, "h", "");
  const FeedbackGain gain(matrix_from_json(require_field(j, "K", ""), "K"));
  const double margin = number_field(j, "margin", "");
  if (!(rep.h > 0.0)) throw SchemaError("h", "must be positive");
  if (!(margin > 0.0)) throw SchemaError("margin", "must be positive");
  const Json& cert = require_field(j, "certificate", "");

  LmiProblem resolve;
  LmiProblem witness_problem;
  std::map<std::string, Matrix> values;
  if (rep.kind == "model-based") {
    const Json& s = require_field(j, "system", "");
    const LtiSystem sys(matrix_from_json(require_field(s, "A", "system"), "system.A"),
                        matrix_from_json(require_field(s, "B", "system"), "system.B"),
                        matrix_from_json(require_field(s, "Bd", "system"), "system.Bd"));
    gain.check_against(sys);
    resolve = assemble_model_based(sys, gain, rep.h);
    witness_problem = resolve;
    const AnalysisCertificate c = analysis_certificate_from_json(cert);
    values = {{"P1", c.P1}, {"P2", c.P2}, {"P3", c.P3}, {"R", c.R}};
  } else if (rep.kind == "analysis" || rep.kind == "design") {
    ConsistencySet set = consistency_set_from_json(require_field(j, "consistency_set", ""));
    set = dualize(set);
    resolve = assemble_analysis(set, gain, rep.h);
    if (rep.kind == "analysis") {
      witness_problem = resolve;
      const AnalysisCertificate c = analysis_certificate_from_json(cert);
      values = {{"P1", c.P1}, {"P2", c.P2}, {"P3", c.P3}, {"R", c.R},
                {"lambda1", scalar_matrix(c.lambda1)}, {"lambda2", scalar_matrix(c.lambda2)}};
    } else {
      const DesignCertificate c = design_certificate_from_json(cert);
      const LmiProblem design = assemble_design(set, c.Q1, c.R, rep.h);
      const Vector x = design.variables.pack(
          {{"K", c.K}, {"Q2", c.Q2}, {"Q3", c.Q3},
           {"lambda1", scalar_matrix(c.lambda1)}, {"lambda2", scalar_matrix(c.lambda2)}});
      const auto ev = design.oriented_max_eigenvalues(x);
      rep.design_witness_strict =
          std::all_of(ev.begin(), ev.end(), [](double e) { return e < 0.0; });
      if (present(j, "analysis_certificate")) {
        // The design variables may be mapped from an analysis solve, which
        // keeps strictness but not the margin; check the solver witness.
        witness_problem = resolve;
        const AnalysisCertificate a = analysis_certificate_from_json(j.at("analysis_certificate"));
        values = {{"P1", a.P1}, {"P2", a.P2}, {"P3", a.P3}, {"R", a.R},
                  {"lambda1", scalar_matrix(a.lambda1)}, {"lambda2", scalar_matrix(a.lambda2)}};
      } else {
        witness_problem = design;
        values = {{"K", c.K}, {"Q2", c.Q2}, {"Q3", c.Q3},
                  {"lambda1", scalar_matrix(c.lambda1)}, {"lambda2", scalar_matrix(c.lambda2)}};
      }
    }
  } else {
    throw SchemaError("kind", "unknown certificate kind '" + rep.kind + "'");
  }

  try {
    rep.witness_ok = verify_witness(witness_problem, witness_problem.variables.pack(values), margin);
  } catch (const std::invalid_argument& e) {
    throw SchemaError("certificate", e.what());
  }
  const FeasibilityResult r = solve_feasibility(resolve, margin, solver);
  rep.resolve = r.status;
  std::ostringstream os;
  os << rep.kind << " certificate at h = " << rep.h << ": re-solve " << to_string(r.status)
     << ", recorded witness " << (rep.witness_ok ? "verified" : "not verified");
  if (rep.design_witness_strict) {
    os << ", design variables " << (*rep.design_witness_strict ? "strictly feasible" : "infeasible");
  }
  os << " (" << r.solver_diagnostics << ")";
  rep.detail = os.str();
  return rep;
}

std::string table_csv(const ResultTable& table, const std::string& which) {
  std::ostringstream os;
  os << "d_bar,seed,h,status,runtime_s,message\n";
  for (const auto& r : table.rows) {
    if (r.table != which) continue;
    os << level_tag(r.d_bar) << ',' << r.seed << ',' << (r.h ? fmt("%.6g", *r.h) : "") << ','
       << r.status << ',' << fmt("%.3f", r.runtime_s) << ',' << csv_field(r.message) << '\n';
  }
  return os.str();
}

std::string summary_csv(const ResultTable& table, const ExperimentConfig& cfg) {
  std::ostringstream os;
  os << "table,d_bar,median_h,paper_h,relative_deviation,rows_ok,rows\n";
  for (const auto& r : table.rows) {
    if (r.table != "model") continue;
    os << "model,0," << (r.h ? fmt("%.6g", *r.h) : "") << ',' << kPaperModelBound << ','
       << (r.h ? fmt("%.4f", (*r.h - kPaperModelBound) / kPaperModelBound) : "") << ','
       << (r.status == "ok" ? 1 : 0) << ",1\n";
  }
  for (const auto& name : cfg.tables) {
    const auto& paper = name == "analysis" ? paper_analysis_bounds() : paper_design_bounds();
    const auto& levels = paper_noise_levels();
    for (double d : cfg.noise_levels) {
      int ok = 0;
      int total = 0;
      for (const auto& r : table.rows) {
        if (r.table == name && r.d_bar == d) {
          ++total;
          ok += r.status == "ok" ? 1 : 0;
        }
      }
      const auto med = table.median(name, d);
      std::optional<double> ref;
      for (std::size_t i = 0; i < levels.size(); ++i) {
        if (std::abs(levels[i] - d) < 1e-12) ref = paper[i];
      }
      os << name << ',' << level_tag(d) << ',' << (med ? fmt("%.6g", *med) : "") << ','
         << (ref ? fmt("%g", *ref) : "") << ','
         << (med && ref ? fmt("%.4f", (*med - *ref) / *ref) : "") << ',' << ok << ',' << total
         << '\n';
    }
  }
  return os.str();
}

Json result_table_json(const ResultTable& table, const ExperimentConfig& cfg) {
  Json rows = Json::array();
  for (const auto& r : table.rows) {
    Json row = {{"table", r.table},
                {"d_bar", r.d_bar},
                {"seed", r.seed},
                {"h", r.h ? Json(*r.h) : Json(nullptr)},
                {"status", r.status},
                {"runtime_s", r.runtime_s},
                {"message", r.message}};
    if (r.K.size() > 0) row["K"] = matrix_to_json(r.K);
    if (r.certificate) row["certificate"] = r.certificate->string();
    rows.push_back(std::move(row));
  }
  return {{"version", table.version},
          {"config_hash", table.config_hash},
          {"config", cfg.to_json()},
          {"rows", rows}};
}

std::string comparison_plot_svg(const std::string& title, const std::vector<double>& levels,
                                const std::vector<double>& paper,
                                const std::vector<std::optional<double>>& medians,
                                const std::vector<std::pair<double, double>>& points,
                                bool log_scale) {
  const double W = 640, H = 420, L = 70, R = 20, T = 40, B = 50;
  double xmax = 0.0;
  double ylo = std::numeric_limits<double>::infinity();
  double yhi = 0.0;
  auto take = [&](double y) {
    if (!(y > 0.0) || !std::isfinite(y)) return;
    ylo = std::min(ylo, y);
    yhi = std::max(yhi, y);
  };
  for (double d : levels) xmax = std::max(xmax, d);
  for (double p : paper) take(p);
  for (const auto& m : medians) if (m) take(*m);
  for (const auto& [d, h] : points) {
    xmax = std::max(xmax, d);
    take(h);
  }
  if (!std::isfinite(ylo)) {
    ylo = 0.1;
    yhi = 1.0;
  }
  xmax = xmax > 0.0 ? 1.1 * xmax : 1.0;
  double y0 = 0.0, y1 = 1.1 * yhi;
  double step = 0.0;
  if (!log_scale) {
    const double raw = y1 / 5.0;
    const double base = std::pow(10.0, std::floor(std::log10(raw)));
    for (double f : {1.0, 2.0, 2.5, 5.0, 10.0}) {
      if (f * base >= raw) {
        step = f * base;
        break;
      }
    }
    y1 = step * std::ceil(y1 / step);
  }
  if (log_scale) {
    y0 = std::floor(std::log10(ylo));
    y1 = std::ceil(std::log10(yhi));
    if (y1 <= y0) y1 = y0 + 1;
  }
  auto X = [&](double d) { return L + (W - L - R) * d / xmax; };
  auto Y = [&](double h) {
    const double v = log_scale ? std::log10(h) : h;
    return H - B - (H - T - B) * (v - y0) / (y1 - y0);
  };

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
     << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << W / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << title
     << "</text>\n";
  os << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B
     << "\" stroke=\"black\"/>\n";
  os << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B
     << "\" stroke=\"black\"/>\n";
  for (double d : levels) {
    os << "<line x1=\"" << X(d) << "\" y1=\"" << H - B << "\" x2=\"" << X(d) << "\" y2=\""
       << H - B + 5 << "\" stroke=\"black\"/>";
    os << "<text x=\"" << X(d) << "\" y=\"" << H - B + 18 << "\" text-anchor=\"middle\">"
       << level_tag(d) << "</text>\n";
  }
  const int ticks = static_cast<int>(std::lround(log_scale ? y1 - y0 : y1 / step));
  for (int i = 0; i <= ticks; ++i) {
    const double v = log_scale ? std::pow(10.0, y0 + i) : step * i;
    const double y = log_scale ? Y(v) : H - B - (H - T - B) * v / y1;
    os << "<line x1=\"" << L - 5 << "\" y1=\"" << y << "\" x2=\"" << L << "\" y2=\"" << y
       << "\" stroke=\"black\"/>";
    os << "<text x=\"" << L - 8 << "\" y=\"" << y + 4 << "\" text-anchor=\"end\">"
       << fmt("%g", v) << "</text>\n";
  }
  os << "<text x=\"" << W / 2 << "\" y=\"" << H - 12 << "\" text-anchor=\"middle\">noise bound d</text>\n";
  os << "<text x=\"16\" y=\"" << H / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
     << H / 2 << ")\">MSI bound h" << (log_scale ? " (log scale)" : "") << "</text>\n";

  for (const auto& [d, h] : points) {
    if (h > 0.0) {
      os << "<circle cx=\"" << X(d) << "\" cy=\"" << Y(h) << "\" r=\"2.5\" fill=\"#999\"/>\n";
    }
  }
  auto polyline = [&](const std::vector<std::optional<double>>& ys, const char* color,
                      const char* dash) {
    os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\"" << dash
       << " points=\"";
    for (std::size_t i = 0; i < levels.size() && i < ys.size(); ++i) {
      if (ys[i] && *ys[i] > 0.0) os << X(levels[i]) << ',' << Y(*ys[i]) << ' ';
    }
    os << "\"/>\n";
    for (std::size_t i = 0; i < levels.size() && i < ys.size(); ++i) {
      if (ys[i] && *ys[i] > 0.0) {
        os << "<circle cx=\"" << X(levels[i]) << "\" cy=\"" << Y(*ys[i]) << "\" r=\"4\" fill=\""
           << color << "\"/>\n";
      }
    }
  };
  std::vector<std::optional<double>> paper_opt(paper.begin(), paper.end());
  polyline(paper_opt, "#c0392b", " stroke-dasharray=\"6 4\"");
  polyline(medians, "#2471a3", "");
  os << "<rect x=\"" << W - R - 170 << "\" y=\"" << T << "\" width=\"165\" height=\"58\" "
     << "fill=\"white\" stroke=\"#ccc\"/>\n";
  os << "<line x1=\"" << W - R - 160 << "\" y1=\"" << T + 15 << "\" x2=\"" << W - R - 130
     << "\" y2=\"" << T + 15 << "\" stroke=\"#c0392b\" stroke-width=\"2\" "
     << "stroke-dasharray=\"6 4\"/><text x=\"" << W - R - 122 << "\" y=\"" << T + 19
     << "\">paper</text>\n";
  os << "<line x1=\"" << W - R - 160 << "\" y1=\"" << T + 32 << "\" x2=\"" << W - R - 130
     << "\" y2=\"" << T + 32 << "\" stroke=\"#2471a3\" stroke-width=\"2\"/><text x=\""
     << W - R - 122 << "\" y=\"" << T + 36 << "\">median over seeds</text>\n";
  os << "<circle cx=\"" << W - R - 145 << "\" cy=\"" << T + 48
     << "\" r=\"2.5\" fill=\"#999\"/><text x=\"" << W - R - 122 << "\" y=\"" << T + 52
     << "\">single seed</text>\n";
  os << "</svg>\n";
  return os.str();
}

ResultTable run_reproduce_example(const ExperimentConfig& cfg) {
  cfg.validate();
  ResultTable out;
  out.config_hash = cfg.hash();
  const fs::path cert_dir = cfg.output / "certificates";
  SerialWriter writer;

  // Model-based baseline with the true plant.
  {
    ResultRow row;
    row.table = "model";
    const auto t0 = std::chrono::steady_clock::now();
    try {
      const LtiSystem sys = cfg.system();
      const FeedbackGain gain = cfg.feedback();
      const AnalysisOutcome a = analyze_msi(sys, gain, cfg.bisection, cfg.solver);
      row.K = gain.K();
      row.message = a.search.message;
      if (a.certificate) {
        row.h = a.certificate->h;
        row.status = "ok";
        row.certificate = cert_dir / "model.json";
        Json cert = model_certificate_json(sys, gain, a, cfg.bisection);
        cert["config_hash"] = out.config_hash;
        writer.submit(*row.certificate, cert.dump(2) + "\n");
      } else {
        row.status = "no-certificate";
      }
    } catch (const std::exception& e) {
      row.status = "error";
      row.message = e.what();
    }
    row.runtime_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    out.rows.push_back(std::move(row));
  }

  struct Task {
    std::string table;
    double d_bar;
    std::uint64_t seed;
  };
  std::vector<Task> tasks;
  for (const auto& t : cfg.tables) {
    for (double d : cfg.noise_levels) {
      for (std::uint64_t s : cfg.seeds) tasks.push_back({t, d, s});
    }
  }
  std::vector<ResultRow> slots(tasks.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t k; (k = next.fetch_add(1)) < tasks.size();) {
      Json cert;
      slots[k] = run_row(cfg, tasks[k].table, tasks[k].d_bar, tasks[k].seed, cert);
      if (!cert.is_null()) {
        cert["seed"] = tasks[k].seed;
        cert["d_bar"] = tasks[k].d_bar;
        cert["config_hash"] = out.config_hash;
        slots[k].certificate = cert_dir / certificate_name(tasks[k].table, tasks[k].d_bar,
                                                           tasks[k].seed);
        writer.submit(*slots[k].certificate, cert.dump(2) + "\n");
      }
    }
  };
  const std::size_t n_threads =
      std::min<std::size_t>(static_cast<std::size_t>(cfg.jobs), std::max<std::size_t>(tasks.size(), 1));
  std::vector<std::thread> pool;
  for (std::size_t i = 1; i < n_threads; ++i) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (auto& r : slots) out.rows.push_back(std::move(r));

  for (const auto& name : cfg.tables) {
    const std::string file = name == "analysis" ? "table1_analysis" : "table2_design";
    writer.submit(cfg.output / (file + ".csv"), table_csv(out, name));

    const auto& paper = name == "analysis" ? paper_analysis_bounds() : paper_design_bounds();
    std::vector<std::optional<double>> medians;
    for (double d : paper_noise_levels()) medians.push_back(out.median(name, d));
    std::vector<std::pair<double, double>> points;
    for (const auto& r : out.rows) {
      if (r.table == name && r.h) points.emplace_back(r.d_bar, *r.h);
    }
    const std::string title = name == "analysis" ? "MSI bound for the fixed gain"
                                                 : "MSI bound after gain iteration";
    writer.submit(cfg.output / (file + ".svg"),
                  comparison_plot_svg(title, paper_noise_levels(), paper, medians, points,
                                      name == "design"));
  }
  writer.submit(cfg.output / "summary.csv", summary_csv(out, cfg));
  writer.submit(cfg.output / "results.json", result_table_json(out, cfg).dump(2) + "\n");
  writer.finish();
  return out;
}

}  // namespace ddmsi
