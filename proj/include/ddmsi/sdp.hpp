#pragma once

#include <functional>
#include <limits>
#include <map>
#include <string>

#include "ddmsi/lmi.hpp"

namespace ddmsi {

enum class FeasibilityStatus { Feasible, Infeasible, Marginal, SolverFailure };

const char* to_string(FeasibilityStatus status);

struct FeasibilityResult {
  FeasibilityStatus status = FeasibilityStatus::SolverFailure;
  Vector x;                              // flattened decision vector
  std::map<std::string, Matrix> values;  // every declared variable
  /// Worst constraint eigenvalue at `x`, oriented so that satisfied
  /// constraints are negative.
  double achieved_margin = 0.0;
  /// Optimal strictness level reported by the conic program (scaled units).
  double solver_level = 0.0;
  /// Upper bound on the attainable level implied by the solver's dual point
  /// (+inf when unavailable). Below the margin it proves infeasibility
  /// within the variable box.
  double dual_bound = std::numeric_limits<double>::infinity();
  std::string solver_diagnostics;

  bool feasible() const { return status == FeasibilityStatus::Feasible; }
};

enum class SolverBackend {
  Clarabel,  // interior point (default)
  Scs,       // first-order splitting; cheaper but far less accurate
};

const char* to_string(SolverBackend backend);
/// Accepts "clarabel" or "scs"; throws std::invalid_argument otherwise.
SolverBackend parse_backend(const std::string& name);

struct SolverOptions {
  SolverBackend backend = SolverBackend::Clarabel;
  /// Iteration cap; 0 selects the backend default (200 for Clarabel,
  /// 50000 for SCS).
  int max_iters = 0;
  /// Feasibility and gap tolerance handed to the backend.
  double tolerance = 1e-9;
  /// Bound on each column-normalised decision variable.
  double box = 1e4;
  bool verbose = false;
  /// Called after every solve (from the solving thread).
  std::function<void(const LmiProblem&, const FeasibilityResult&)> observer;
};

/// Decides whether every constraint can hold with strictness `margin`
/// (NegativeDefinite: F <= -margin I, PositiveDefinite: G >= margin I).
/// A Feasible status is only returned after direct eigenvalue verification of
/// every constraint at the returned point with half the margin. Infeasible
/// means the dual point bounds the level below the margin (or the backend
/// solved to tolerance); other early stops are reported as SolverFailure.
FeasibilityResult solve_feasibility(const LmiProblem& problem, double margin,
                                    const SolverOptions& options = {});

/// Independent re-check used by tests and the verify command.
bool verify_witness(const LmiProblem& problem, const Vector& x, double margin);

}  // namespace ddmsi
