#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "ddmsi/io.hpp"
#include "ddmsi/msi_search.hpp"
#include "ddmsi/sdp.hpp"
#include "ddmsi/system_model.hpp"

namespace ddmsi {

inline constexpr const char* kVersion = "0.1.0";

enum class Mode { Simulate, EstimateDeriv, BuildSet, Analyze, Design, ReproduceExample };

const char* to_string(Mode mode);
/// Accepts the CLI subcommand names; throws std::invalid_argument otherwise.
Mode parse_mode(const std::string& name);

/// `count` consecutive sampling gaps of length `gap`.
struct GapSegment {
  int count = 0;
  double gap = 0.0;
};

struct SimulationSettings {
  double gap = 0.5;       // periodic closed-loop sampling gap
  double horizon = 20.0;
  std::optional<double> output_dt;
  std::vector<double> x0{1.0, 0.0};
};

/// Defaults reproduce the second-order example (double integrator with
/// friction, N = 100, gaps 1.5 then 3, K = -[3.75 11.5]).
struct ExperimentConfig {
  Mode mode = Mode::ReproduceExample;

  Matrix A;
  Matrix B;
  Matrix Bd;
  /// False when only the dataset may be used (the plant is "unknown").
  bool system_known = true;
  std::optional<std::filesystem::path> dataset;

  std::optional<Matrix> gain;
  std::vector<double> noise_levels{0.001, 0.005, 0.01, 0.02, 0.03, 0.04, 0.05};
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  int samples = 100;
  std::vector<GapSegment> gaps{{49, 1.5}, {50, 3.0}};
  double input_low = -1.0;
  double input_high = 1.0;
  std::optional<std::vector<double>> x0;

  SimulationSettings simulation;
  std::optional<double> a_bar;
  std::optional<double> b_bar;

  BisectionConfig bisection;
  IterationSchedule iteration;
  SolverOptions solver;

  /// Tables produced by reproduce-example: "analysis" and/or "design".
  std::vector<std::string> tables{"analysis", "design"};
  std::filesystem::path output{"out"};
  int jobs = 1;

  ExperimentConfig();

  /// Unknown keys and type mismatches raise SchemaError.
  static ExperimentConfig from_json(const Json& j);
  Json to_json() const;

  /// Checks the fields `mode` needs; throws std::invalid_argument.
  void validate() const;
  std::string hash() const { return config_hash(to_json()); }

  LtiSystem system() const;
  FeedbackGain feedback() const;
  /// Sampling instants t_0 = 0, t_1, ... built from `gaps`.
  std::vector<double> sampling_times() const;
};

/// Open-loop experiment with a uniform input, a disturbance uniform in the
/// ball of radius `d_bar`, and the matching pointwise noise model.
DatasetFile generate_example_dataset(const ExperimentConfig& cfg, double d_bar,
                                     std::uint64_t seed, Matrix* realized = nullptr);

struct ResultRow {
  std::string table;  // "model", "analysis" or "design"
  double d_bar = 0.0;
  std::uint64_t seed = 0;
  std::optional<double> h;
  double runtime_s = 0.0;
  std::string status;  // "ok", "no-certificate", "error"
  std::string message;
  Matrix K;
  std::optional<std::filesystem::path> certificate;
};

struct ResultTable {
  std::vector<ResultRow> rows;
  std::string config_hash;
  std::string version = kVersion;

  bool all_ok() const;
  /// Median of the successful rows of `table` at `d_bar`.
  std::optional<double> median(const std::string& table, double d_bar) const;
};

/// Reference bounds reported in the paper for the example, one per level.
const std::vector<double>& paper_noise_levels();
const std::vector<double>& paper_analysis_bounds();
const std::vector<double>& paper_design_bounds();
inline constexpr double kPaperModelBound = 1.62;

/// Runs the model-based baseline, then one analysis and/or design row per
/// (noise level, seed) on `cfg.jobs` workers. Writes CSV, JSON, certificates
/// and SVG plots under `cfg.output`. Row failures are recorded, not thrown.
ResultTable run_reproduce_example(const ExperimentConfig& cfg);

/// Self-contained certificate file: kind, bound, gain, the data the LMIs
/// were built from, the witness and the strictness margin.
Json model_certificate_json(const LtiSystem& sys, const FeedbackGain& gain,
                            const AnalysisOutcome& outcome, const BisectionConfig& cfg);
Json analysis_certificate_file_json(const ConsistencySet& set, const FeedbackGain& gain,
                                    const AnalysisOutcome& outcome,
                                    const BisectionConfig& cfg);
Json design_certificate_file_json(const ConsistencySet& set, const DesignOutcome& outcome,
                                  const BisectionConfig& cfg);

struct VerifyReport {
  std::string kind;
  double h = 0.0;
  FeasibilityStatus resolve = FeasibilityStatus::SolverFailure;
  /// Recorded witness passes the eigenvalue checks at half the margin.
  bool witness_ok = false;
  /// Design certificates: the stored design variables satisfy every design
  /// constraint strictly.
  std::optional<bool> design_witness_strict;
  std::string detail;

  bool pass() const { return resolve == FeasibilityStatus::Feasible; }
};

/// Re-solves feasibility at the recorded h with the recorded K and
/// re-checks the stored witness.
VerifyReport verify_certificate(const Json& certificate, const SolverOptions& solver = {});

std::string table_csv(const ResultTable& table, const std::string& which);
std::string summary_csv(const ResultTable& table, const ExperimentConfig& cfg);
Json result_table_json(const ResultTable& table, const ExperimentConfig& cfg);

/// Static bound-versus-noise plot: per-seed points, medians, paper values.
std::string comparison_plot_svg(const std::string& title, const std::vector<double>& levels,
                                const std::vector<double>& paper,
                                const std::vector<std::optional<double>>& medians,
                                const std::vector<std::pair<double, double>>& points,
                                bool log_scale);

}  // namespace ddmsi
