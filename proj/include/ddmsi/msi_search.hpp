#pragma once

#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ddmsi/data_consistency.hpp"
#include "ddmsi/lmi_assembly.hpp"
#include "ddmsi/sdp.hpp"
#include "ddmsi/system_model.hpp"

namespace ddmsi {

struct BisectionConfig {
  double h_min = 0.01;
  double h_max = 2.0;
  double abs_tol = 0.005;
  int max_iters = 60;
  int prescan_points = 8;
  /// Fixed strictness margin; default_margin(h) when empty.
  std::optional<double> margin;

  void check() const;
  double margin_at(double h) const { return margin ? *margin : default_margin(h); }
};

struct IterationSchedule {
  double h_growth_factor = 1.25;
  int max_outer_iters = 40;
  int stall_limit = 3;
  /// The iteration never tries bounds above this value.
  double h_limit = 1e3;
  /// Relaxed analysis/design rounds at one trial bound before it counts as
  /// a failure (1 = a single design solve).
  int inner_rounds = 4;

  void check() const;
};

/// One feasibility query made by a search.
struct Probe {
  double h = 0.0;
  FeasibilityStatus status = FeasibilityStatus::SolverFailure;
  std::string stage;  // "initial", "prescan", "bisect"
};

struct BisectionResult {
  std::optional<double> h_star;
  std::optional<FeasibilityResult> witness;  // solve at h_star
  std::vector<Probe> trace;
  /// Some probe was infeasible below a feasible one.
  bool non_monotone = false;
  std::string message;
};

using FeasibilityFn = std::function<FeasibilityResult(double)>;

/// Largest h in [h_min, h_max] found feasible, to within abs_tol. A uniform
/// prescan picks the bracket above the largest feasible prescan point.
/// Returns no h_star (with a message) when h_min itself is not feasible.
BisectionResult msi_bisection(const FeasibilityFn& feasible, const BisectionConfig& cfg);

struct AnalysisOutcome {
  std::optional<AnalysisCertificate> certificate;
  BisectionResult search;
};

/// Bisection over the model-based delay LMIs.
AnalysisOutcome analyze_msi(const LtiSystem& sys, const FeedbackGain& gain,
                            const BisectionConfig& cfg,
                            const SolverOptions& solver = {});

/// Bisection over the robust analysis LMIs. The set is dualized first when
/// needed (throws if the inertia assumption fails).
AnalysisOutcome analyze_msi(const ConsistencySet& set, const FeedbackGain& gain,
                            const BisectionConfig& cfg,
                            const SolverOptions& solver = {});

/// Single robust analysis solve at a fixed h.
std::optional<AnalysisCertificate> certify_analysis(const ConsistencySet& set,
                                                    const FeedbackGain& gain, double h,
                                                    const BisectionConfig& cfg,
                                                    const SolverOptions& solver = {});

struct DesignStep {
  int iteration = 0;
  double h_current = 0.0;
  double h_trial = 0.0;
  double growth = 0.0;
  int rounds = 0;  // design solves spent on this trial bound
  FeasibilityStatus analysis_status = FeasibilityStatus::SolverFailure;
  FeasibilityStatus design_status = FeasibilityStatus::SolverFailure;
  bool accepted = false;
};

struct DesignOutcome {
  AnalysisCertificate initial;          // analyze_msi(set, K0)
  DesignCertificate best;
  /// Analysis witness for (best.K, best.h), when one was solved for.
  std::optional<AnalysisCertificate> best_analysis;
  std::vector<DesignStep> trace;
  BisectionResult initial_search;
  std::map<std::string, std::string> metadata;  // iteration choices
};

/// Maps analysis witnesses to design variables: Q = P^{-1} for
/// P = [P1 0; P2 P3], multipliers inverted.
DesignCertificate design_from_analysis(const AnalysisCertificate& cert, const Matrix& K);

/// Alternates robust analysis (fixed K) and robust design (fixed Q1 = P1^{-1}
/// and R) while growing h. When the design fails at a trial bound, its least
/// violating K is fed back into an analysis solve at the same bound and the
/// pair is retried, up to `inner_rounds` times. Throws std::runtime_error if
/// the initial analysis finds no certificate.
DesignOutcome design_iterate(const ConsistencySet& set, const FeedbackGain& K0,
                             const BisectionConfig& cfg, const IterationSchedule& sched,
                             const SolverOptions& solver = {});

}  // namespace ddmsi
