#include <algorithm>

#include "ddmsi/msi_search.hpp"
#include "doctest.h"
#include "support.hpp"

using namespace ddmsi;
using namespace ddmsi::testing;

namespace {

FeasibilityFn threshold(double h_max_feasible) {
  return [h_max_feasible](double h) {
    FeasibilityResult r;
    r.status = h <= h_max_feasible ? FeasibilityStatus::Feasible : FeasibilityStatus::Infeasible;
    return r;
  };
}

ConsistencySet certain_scalar_set(double d_bar) {
  DataSet d;
  d.tau = {0.0, 1.0, 2.0, 3.0};
  d.X = mat({{1.0, -0.5, 0.3, 2.0}});
  d.U = mat({{0.2, 1.0, -1.0, 0.5}});
  d.Xdot = d.X + d.U;
  d.Bd = Matrix::Identity(1, 1);
  return dualize(build_consistency_set(d, NoiseBound::from_pointwise(d_bar, 4, 1)));
}

}  // namespace

TEST_CASE("msi_bisection: synthetic threshold") {
  BisectionConfig cfg;
  const BisectionResult r = msi_bisection(threshold(1.62), cfg);
  REQUIRE(r.h_star);
  CHECK(*r.h_star <= 1.62);
  CHECK(*r.h_star >= 1.62 - cfg.abs_tol);
  CHECK(!r.non_monotone);
  CHECK(r.witness);
  CHECK(r.trace.front().stage == "initial");

  const BisectionResult top = msi_bisection(threshold(10.0), cfg);
  REQUIRE(top.h_star);
  CHECK(*top.h_star == cfg.h_max);
  CHECK(top.message.find("h_max reached") != std::string::npos);
}

TEST_CASE("msi_bisection: infeasible at h_min gives no certificate") {
  BisectionConfig cfg;
  const BisectionResult r = msi_bisection(threshold(0.001), cfg);
  CHECK(!r.h_star);
  CHECK(!r.witness);
  CHECK(r.trace.size() == 1);
  CHECK(r.message.find("no certificate") != std::string::npos);
}

TEST_CASE("msi_bisection: prescan keeps the upper feasible region and flags the gap") {
  BisectionConfig cfg;
  const FeasibilityFn islands = [](double h) {
    FeasibilityResult r;
    const bool ok = h <= 0.3 || (h >= 1.0 && h <= 1.5);
    r.status = ok ? FeasibilityStatus::Feasible : FeasibilityStatus::Infeasible;
    return r;
  };
  const BisectionResult r = msi_bisection(islands, cfg);
  REQUIRE(r.h_star);
  CHECK(*r.h_star == doctest::Approx(1.5).epsilon(cfg.abs_tol));
  CHECK(r.non_monotone);
}

TEST_CASE("msi_bisection: configuration errors") {
  BisectionConfig bad;
  bad.h_min = 2.0;
  bad.h_max = 1.0;
  CHECK_THROWS_AS(msi_bisection(threshold(1.0), bad), std::invalid_argument);
  BisectionConfig tol;
  tol.abs_tol = 0.0;
  CHECK_THROWS_AS(msi_bisection(threshold(1.0), tol), std::invalid_argument);
  BisectionConfig margin;
  margin.margin = -1.0;
  CHECK_THROWS_AS(msi_bisection(threshold(1.0), margin), std::invalid_argument);
  IterationSchedule sched;
  sched.h_growth_factor = 1.0;
  CHECK_THROWS_AS(sched.check(), std::invalid_argument);
}

TEST_CASE("analyze_msi: model-based example") {
  BisectionConfig cfg;
  const AnalysisOutcome a = analyze_msi(example_system(), example_gain(), cfg);
  REQUIRE(a.certificate);
  CHECK(a.certificate->h >= 1.61);
  CHECK(a.certificate->h <= 1.63);
  CHECK(a.certificate->margin < 0.0);
  // A fresh solve at the reported bound is feasible again.
  const double h = a.certificate->h;
  CHECK(solve_feasibility(assemble_model_based(example_system(), example_gain(), h),
                          cfg.margin_at(h))
            .feasible());
}

TEST_CASE("analyze_msi: zero gain is never certified") {
  BisectionConfig cfg;
  const AnalysisOutcome a = analyze_msi(example_system(), FeedbackGain(Matrix::Zero(1, 2)), cfg);
  CHECK(!a.certificate);
  const AnalysisOutcome d = analyze_msi(example_set(0.01, 1), FeedbackGain(Matrix::Zero(1, 2)), cfg);
  CHECK(!d.certificate);
}

TEST_CASE("analyze_msi: data-driven bounds follow the noise level") {
  BisectionConfig cfg;
  const AnalysisOutcome low = analyze_msi(example_set(0.001, 1), example_gain(), cfg);
  const AnalysisOutcome mid = analyze_msi(example_set(0.03, 1), example_gain(), cfg);
  REQUIRE(low.certificate);
  REQUIRE(mid.certificate);
  CHECK(low.certificate->h == doctest::Approx(1.59).epsilon(0.2));
  CHECK(mid.certificate->h == doctest::Approx(1.0).epsilon(0.2));
  CHECK(mid.certificate->h < low.certificate->h);

  // The robust bound never exceeds the model-based one for the same gain.
  const AnalysisOutcome model = analyze_msi(example_system(), example_gain(), cfg);
  REQUIRE(model.certificate);
  CHECK(low.certificate->h <= model.certificate->h + cfg.abs_tol);

  const double h = mid.certificate->h;
  CHECK(solve_feasibility(assemble_analysis(example_set(0.03, 1), example_gain(), h),
                          cfg.margin_at(h))
            .feasible());
}

TEST_CASE("analyze_msi: near-noiseless data approach the model-based bound") {
  // Smallest level whose set still passes the inertia check at the default
  // tolerance; much smaller levels make Pc numerically singular.
  const double d_bar = 3e-4;
  const ExperimentData ex = example_data(d_bar, 1);
  const ConsistencySet set =
      build_consistency_set(ex.data, NoiseBound::from_pointwise(d_bar, 100, 2));
  BisectionConfig cfg;
  const AnalysisOutcome a = analyze_msi(set, example_gain(), cfg);
  REQUIRE(a.certificate);
  CHECK(std::abs(a.certificate->h - 1.62) <= 0.05);

  const ExperimentData tiny = example_data(1e-6, 1);
  CHECK_THROWS(dualize(build_consistency_set(tiny.data, NoiseBound::from_pointwise(1e-6, 100, 2))));
}

TEST_CASE("design_iterate: enlarges the bound at the largest noise level") {
  const ConsistencySet set = example_set(0.05, 1);
  BisectionConfig cfg;
  IterationSchedule sched;
  const DesignOutcome d = design_iterate(set, example_gain(), cfg, sched);
  CHECK(d.best.h >= 2.0);
  CHECK(d.best.h >= d.initial.h);
  // Accepted bounds never decrease along the trace.
  double h = d.initial.h;
  for (const auto& step : d.trace) {
    CHECK(step.h_current >= h);
    h = step.h_current;
    if (step.accepted) CHECK(step.h_trial > step.h_current);
  }
  REQUIRE(d.best_analysis);
  CHECK(d.best_analysis->h == d.best.h);
  CHECK(certify_analysis(set, FeedbackGain(d.best.K), d.best.h, cfg).has_value());
  CHECK(!d.metadata.empty());
}

TEST_CASE("design_iterate: certain unstable scalar plant") {
  const ConsistencySet set = certain_scalar_set(1e-3);
  BisectionConfig cfg;
  cfg.h_max = 0.2;
  IterationSchedule sched;
  sched.max_outer_iters = 3;
  const DesignOutcome d = design_iterate(set, FeedbackGain(mat({{-3.0}})), cfg, sched);
  REQUIRE(d.trace.size() == 3);
  double h = d.initial.h;
  for (const auto& step : d.trace) {
    CHECK(step.accepted);
    CHECK(step.h_trial > h);
    h = step.h_trial;
  }
  CHECK(d.best.h == doctest::Approx(h));
  CHECK(1.0 + d.best.K(0, 0) < 0.0);
}

TEST_CASE("design_iterate: refuses a gain without an initial certificate") {
  BisectionConfig cfg;
  CHECK_THROWS_AS(design_iterate(example_set(0.01, 1), FeedbackGain(Matrix::Zero(1, 2)), cfg, {}),
                  std::runtime_error);
}
