#include "ddmsi/msi_search.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace ddmsi {

namespace {

Matrix symmetric_inverse(const Matrix& S) {
  const Matrix inv = S.inverse();
  return 0.5 * (inv + inv.transpose());
}

AnalysisCertificate analysis_from_result(const FeasibilityResult& r, double h) {
  AnalysisCertificate c;
  c.h = h;
  c.P1 = r.values.at("P1");
  c.P2 = r.values.at("P2");
  c.P3 = r.values.at("P3");
  c.R = r.values.at("R");
  if (auto it = r.values.find("lambda1"); it != r.values.end()) c.lambda1 = it->second(0, 0);
  if (auto it = r.values.find("lambda2"); it != r.values.end()) c.lambda2 = it->second(0, 0);
  c.margin = r.achieved_margin;
  return c;
}

FeasibilityResult solve_analysis_at(const ConsistencySet& set, const FeedbackGain& gain,
                                    double h, const BisectionConfig& cfg,
                                    const SolverOptions& solver) {
  return solve_feasibility(assemble_analysis(set, gain, h), cfg.margin_at(h), solver);
}

const ConsistencySet& with_dual(const ConsistencySet& set, ConsistencySet& storage) {
  if (set.Pc_dual) return set;
  storage = dualize(set);
  return storage;
}

// The analysis conditions are homogeneous in (P, R, lambda); rescale the
// handed-off pair so that the larger of ||P1||, ||R|| is one.
void normalize_pair(Matrix& P1, Matrix& R) {
  const double scale = std::max(P1.norm(), R.norm());
  if (scale > 0.0 && std::isfinite(scale)) {
    P1 /= scale;
    R /= scale;
  }
}

AnalysisOutcome finish(BisectionResult search) {
  AnalysisOutcome out;
  if (search.h_star) out.certificate = analysis_from_result(*search.witness, *search.h_star);
  out.search = std::move(search);
  return out;
}

}  // namespace

void BisectionConfig::check() const {
  if (!(h_min > 0.0)) throw std::invalid_argument("BisectionConfig: h_min must be positive");
  if (!(h_min < h_max)) throw std::invalid_argument("BisectionConfig: need h_min < h_max");
  if (!(abs_tol > 0.0)) throw std::invalid_argument("BisectionConfig: abs_tol must be positive");
  if (max_iters < 1) throw std::invalid_argument("BisectionConfig: max_iters must be >= 1");
  if (prescan_points < 1) {
    throw std::invalid_argument("BisectionConfig: prescan_points must be >= 1");
  }
  if (margin && !(*margin > 0.0)) {
    throw std::invalid_argument("BisectionConfig: margin must be positive");
  }
}

void IterationSchedule::check() const {
  if (!(h_growth_factor > 1.0)) {
    throw std::invalid_argument("IterationSchedule: h_growth_factor must exceed 1");
  }
  if (max_outer_iters < 1) {
    throw std::invalid_argument("IterationSchedule: max_outer_iters must be >= 1");
  }
  if (stall_limit < 1) throw std::invalid_argument("IterationSchedule: stall_limit must be >= 1");
  if (!(h_limit > 0.0)) throw std::invalid_argument("IterationSchedule: h_limit must be positive");
  if (inner_rounds < 1) throw std::invalid_argument("IterationSchedule: inner_rounds must be >= 1");
}

BisectionResult msi_bisection(const FeasibilityFn& feasible, const BisectionConfig& cfg) {
  cfg.check();
  BisectionResult out;
  auto probe = [&](double h, const char* stage) {
    FeasibilityResult r = feasible(h);
    out.trace.push_back({h, r.status, stage});
    return r;
  };

  FeasibilityResult lo_result = probe(cfg.h_min, "initial");
  if (!lo_result.feasible()) {
    out.message = "no certificate >= h_min (" + std::string(to_string(lo_result.status)) + ")";
    return out;
  }

  double lo = cfg.h_min;
  double hi = cfg.h_max;
  bool hi_known_infeasible = false;
  const int P = cfg.prescan_points;
  for (int i = 1; i <= P; ++i) {
    const double h = cfg.h_min + (cfg.h_max - cfg.h_min) * i / P;
    FeasibilityResult r = probe(h, "prescan");
    if (r.feasible()) {
      lo = h;
      lo_result = std::move(r);
    }
  }
  // Bracket: largest feasible prescan point and the next one above it.
  for (int i = 1; i <= P; ++i) {
    const double h = cfg.h_min + (cfg.h_max - cfg.h_min) * i / P;
    if (h > lo) {
      hi = h;
      hi_known_infeasible = true;
      break;
    }
  }

  if (hi_known_infeasible) {
    for (int it = 0; it < cfg.max_iters && hi - lo > cfg.abs_tol; ++it) {
      const double mid = 0.5 * (lo + hi);
      FeasibilityResult r = probe(mid, "bisect");
      if (r.feasible()) {
        lo = mid;
        lo_result = std::move(r);
      } else {
        hi = mid;
      }
    }
  }

  for (const auto& a : out.trace) {
    if (a.status == FeasibilityStatus::Feasible) continue;
    for (const auto& b : out.trace) {
      if (b.status == FeasibilityStatus::Feasible && b.h > a.h) out.non_monotone = true;
    }
  }

  out.h_star = lo;
  out.witness = std::move(lo_result);
  std::ostringstream msg;
  msg << "h* = " << lo;
  if (hi_known_infeasible) msg << " (first failing bound " << hi << ")";
  else msg << " (h_max reached)";
  if (out.non_monotone) msg << "; non-monotone feasibility observed";
  out.message = msg.str();
  return out;
}

AnalysisOutcome analyze_msi(const LtiSystem& sys, const FeedbackGain& gain,
                            const BisectionConfig& cfg, const SolverOptions& solver) {
  gain.check_against(sys);
  return finish(msi_bisection(
      [&](double h) {
        return solve_feasibility(assemble_model_based(sys, gain, h), cfg.margin_at(h),
                                 solver);
      },
      cfg));
}

AnalysisOutcome analyze_msi(const ConsistencySet& set, const FeedbackGain& gain,
                            const BisectionConfig& cfg, const SolverOptions& solver) {
  ConsistencySet storage;
  const ConsistencySet& s = with_dual(set, storage);
  return finish(msi_bisection(
      [&](double h) { return solve_analysis_at(s, gain, h, cfg, solver); }, cfg));
}

std::optional<AnalysisCertificate> certify_analysis(const ConsistencySet& set,
                                                    const FeedbackGain& gain, double h,
                                                    const BisectionConfig& cfg,
                                                    const SolverOptions& solver) {
  ConsistencySet storage;
  const ConsistencySet& s = with_dual(set, storage);
  FeasibilityResult r = solve_analysis_at(s, gain, h, cfg, solver);
  if (!r.feasible()) return std::nullopt;
  return analysis_from_result(r, h);
}

DesignCertificate design_from_analysis(const AnalysisCertificate& cert, const Matrix& K) {
  DesignCertificate d;
  d.h = cert.h;
  d.K = K;
  d.Q1 = symmetric_inverse(cert.P1);
  d.Q3 = cert.P3.inverse();
  d.Q2 = -d.Q3 * cert.P2 * d.Q1;
  d.R = cert.R;
  d.lambda1 = cert.lambda1 > 0.0 ? 1.0 / cert.lambda1 : 0.0;
  d.lambda2 = cert.lambda2 > 0.0 ? 1.0 / cert.lambda2 : 0.0;
  d.margin = cert.margin;
  return d;
}

DesignOutcome design_iterate(const ConsistencySet& set, const FeedbackGain& K0,
                             const BisectionConfig& cfg, const IterationSchedule& sched,
                             const SolverOptions& solver) {
  cfg.check();
  sched.check();
  ConsistencySet storage;
  const ConsistencySet& s = with_dual(set, storage);

  DesignOutcome out;
  AnalysisOutcome init = analyze_msi(s, K0, cfg, solver);
  out.initial_search = init.search;
  if (!init.certificate) {
    throw std::runtime_error("design_iterate: initialization infeasible: " +
                             init.search.message);
  }
  out.initial = *init.certificate;
  out.best = design_from_analysis(out.initial, K0.K());
  out.best_analysis = out.initial;
  out.metadata["handoff"] = "Q1 = P1^-1, R kept from the latest analysis solve";
  out.metadata["growth"] = "multiplicative, halved toward 1 on failure, restored on success";
  out.metadata["analysis_step"] = "fixed-h feasibility with the newly designed K";
  out.metadata["on_design_failure"] =
      "least violating K re-analysed at the trial bound; its (P1, R) seed a retry";
  out.metadata["normalization"] = "handed-off (P1, R) scaled to max(|P1|, |R|) = 1";

  out.metadata["inner_rounds"] = std::to_string(sched.inner_rounds);

  // (P1, R) handed to the next design solve, with the bound they certify.
  Matrix P1 = out.initial.P1;
  Matrix R = out.initial.R;
  normalize_pair(P1, R);
  double h = out.initial.h;
  double growth = sched.h_growth_factor;
  int stall = 0;
  for (int it = 0; it < sched.max_outer_iters && h < sched.h_limit; ++it) {
    DesignStep step;
    step.iteration = it;
    step.h_current = h;
    step.growth = growth;
    step.h_trial = std::min(h * growth, sched.h_limit);
    const double margin = cfg.margin_at(step.h_trial);

    Matrix P1_try = P1;
    Matrix R_try = R;
    normalize_pair(P1_try, R_try);
    for (int round = 0; round < sched.inner_rounds && !step.accepted; ++round) {
      step.rounds = round + 1;
      const Matrix Q1 = symmetric_inverse(P1_try);
      FeasibilityResult r =
          solve_feasibility(assemble_design(s, Q1, R_try, step.h_trial), margin, solver);
      step.design_status = r.status;
      if (r.values.empty()) break;
      const Matrix K = r.values.at("K");
      if (r.feasible()) {
        DesignCertificate d;
        d.h = step.h_trial;
        d.K = K;
        d.Q1 = Q1;
        d.Q2 = r.values.at("Q2");
        d.Q3 = r.values.at("Q3");
        d.R = R_try;
        d.lambda1 = r.values.at("lambda1")(0, 0);
        d.lambda2 = r.values.at("lambda2")(0, 0);
        d.margin = r.achieved_margin;
        out.best = d;
        out.best_analysis.reset();
        step.accepted = true;
        P1 = P1_try;
        R = R_try;
        // Fresh analysis witness for the next handoff; the pair just used
        // stays valid at h_trial if this solve does not succeed.
        FeasibilityResult a = solve_analysis_at(s, FeedbackGain(K), step.h_trial, cfg, solver);
        step.analysis_status = a.status;
        if (a.feasible()) {
          out.best_analysis = analysis_from_result(a, step.h_trial);
          P1 = a.values.at("P1");
          R = a.values.at("R");
        }
        break;
      }
      if (round + 1 == sched.inner_rounds) break;

      // Least violating K from the failed design: re-solve the analysis at
      // the same bound and retry with its (P1, R).
      FeasibilityResult a = solve_analysis_at(s, FeedbackGain(K), step.h_trial, cfg, solver);
      step.analysis_status = a.status;
      if (a.values.empty()) break;
      if (a.feasible()) {
        const AnalysisCertificate c = analysis_from_result(a, step.h_trial);
        out.best = design_from_analysis(c, K);
        out.best_analysis = c;
        step.accepted = true;
        P1 = c.P1;
        R = c.R;
        break;
      }
      P1_try = a.values.at("P1");
      R_try = a.values.at("R");
      normalize_pair(P1_try, R_try);
      if (!(min_eigenvalue(P1_try) > 0.0) || !(min_eigenvalue(R_try) > 0.0)) break;
    }

    if (step.accepted) {
      h = step.h_trial;
      stall = 0;
      growth = sched.h_growth_factor;
    } else {
      growth = 1.0 + (growth - 1.0) / 2.0;
      ++stall;
    }
    out.trace.push_back(step);
    if (stall >= sched.stall_limit) break;
  }
  return out;
}

}  // namespace ddmsi
