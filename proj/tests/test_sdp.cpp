#include <mutex>

#include "ddmsi/lmi_assembly.hpp"
#include "ddmsi/sdp.hpp"
#include "doctest.h"
#include "support.hpp"

using namespace ddmsi;
using namespace ddmsi::testing;

namespace {

// One scalar variable x with the given 1x1 constraints a_i + b_i x < 0.
LmiProblem scalar_problem(const std::vector<std::pair<double, double>>& rows) {
  LmiProblem p;
  p.variables.add_scalar("x");
  for (const auto& [a, b] : rows) {
    AffineMatrix e = AffineMatrix::constant(Matrix::Constant(1, 1, a), 1);
    e.add_term(0, Matrix::Constant(1, 1, b));
    p.add_constraint("c", e, Sense::NegativeDefinite);
  }
  return p;
}

SolverOptions with_backend(SolverBackend b) {
  SolverOptions o;
  o.backend = b;
  if (b == SolverBackend::Scs) o.tolerance = 1e-7;
  return o;
}

}  // namespace

TEST_CASE("scalar feasibility on both backends") {
  for (SolverBackend b : {SolverBackend::Clarabel, SolverBackend::Scs}) {
    CAPTURE(to_string(b));
    // x < -1
    const LmiProblem one = scalar_problem({{1.0, 1.0}});
    const FeasibilityResult r = solve_feasibility(one, 1e-3, with_backend(b));
    REQUIRE(r.feasible());
    CHECK(r.values.at("x")(0, 0) < -1.0);
    CHECK(verify_witness(one, r.x, 1e-3));
    CHECK(r.achieved_margin < 0.0);

    // x < -1 and -x < -1
    const LmiProblem both = scalar_problem({{1.0, 1.0}, {1.0, -1.0}});
    const FeasibilityResult s = solve_feasibility(both, 1e-3, with_backend(b));
    CHECK(s.status == FeasibilityStatus::Infeasible);
    CHECK(s.dual_bound < 1e-3);
  }
}

TEST_CASE("positive definite sense and hard constraints") {
  LmiProblem p;
  p.variables.add("P", 2, 2, VariableKind::Symmetric);
  const AffineMatrix P = p.variables.expr("P");
  p.add_constraint("P > 0", P, Sense::PositiveDefinite, true);
  // trace-like bound: P < 3 I
  p.add_constraint("P < 3I", P - AffineMatrix::constant(3.0 * Matrix::Identity(2, 2), 3),
                   Sense::NegativeDefinite);
  const FeasibilityResult r = solve_feasibility(p, 1e-4);
  REQUIRE(r.feasible());
  const Matrix value = r.values.at("P");
  CHECK(min_eigenvalue(value) >= 0.5e-4);
  CHECK(max_eigenvalue(value) <= 3.0 - 0.5e-4);
}

TEST_CASE("verify_witness rejects wrong or short assignments") {
  const LmiProblem one = scalar_problem({{1.0, 1.0}});
  CHECK(verify_witness(one, Vector::Constant(1, -2.0), 1e-3));
  CHECK(!verify_witness(one, Vector::Constant(1, -1.0), 1e-3));
  CHECK(!verify_witness(one, Vector::Constant(1, 0.0), 1e-3));
  CHECK(!verify_witness(one, Vector(), 1e-3));
  CHECK(!verify_witness(one, Vector::Constant(1, std::nan("")), 1e-3));
}

TEST_CASE("margin must be positive") {
  const LmiProblem one = scalar_problem({{1.0, 1.0}});
  CHECK_THROWS_AS(solve_feasibility(one, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(solve_feasibility(one, -1e-3), std::invalid_argument);
}

TEST_CASE("model-based example at h = 1 has a verified witness") {
  const LmiProblem p = assemble_model_based(example_system(), example_gain(), 1.0);
  const double margin = default_margin(1.0);
  const FeasibilityResult r = solve_feasibility(p, margin);
  REQUIRE(r.feasible());
  CHECK(verify_witness(p, r.x, margin));
  for (double ev : p.oriented_max_eigenvalues(r.x)) CHECK(ev <= -0.5 * margin);
  CHECK(min_eigenvalue(r.values.at("P1")) > 0.0);
  CHECK(min_eigenvalue(r.values.at("R")) > 0.0);
}

TEST_CASE("repeated solves are deterministic") {
  const LmiProblem p = assemble_analysis(example_set(0.02, 1), example_gain(), 1.0);
  const FeasibilityResult a = solve_feasibility(p, default_margin(1.0));
  const FeasibilityResult b = solve_feasibility(p, default_margin(1.0));
  CHECK(a.status == b.status);
  CHECK(a.x == b.x);
}

TEST_CASE("observer sees every solve") {
  std::mutex mu;
  int calls = 0;
  int feasible = 0;
  SolverOptions o;
  o.observer = [&](const LmiProblem& problem, const FeasibilityResult& r) {
    std::lock_guard<std::mutex> lock(mu);
    ++calls;
    if (r.feasible()) {
      ++feasible;
      CHECK(verify_witness(problem, r.x, default_margin(problem.h)));
    }
  };
  for (double h : {0.5, 1.0, 2.0}) {
    solve_feasibility(assemble_model_based(example_system(), example_gain(), h),
                      default_margin(h), o);
  }
  CHECK(calls == 3);
  CHECK(feasible == 2);
}

TEST_CASE("parse_backend") {
  CHECK(parse_backend("clarabel") == SolverBackend::Clarabel);
  CHECK(parse_backend("scs") == SolverBackend::Scs);
  CHECK(std::string(to_string(SolverBackend::Scs)) == "scs");
  CHECK_THROWS_AS(parse_backend("mosek"), std::invalid_argument);
  CHECK(std::string(to_string(FeasibilityStatus::Marginal)) == "Marginal");
}
