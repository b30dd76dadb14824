#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ddmsi/data.hpp"

namespace ddmsi {

/// Relative eigenvalue threshold: |lambda| <= kTolEig * ||Pc||_2 counts as zero.
inline constexpr double kTolEig = 1e-9;
/// dualize() refuses matrices with a larger 2-norm condition number.
inline constexpr double kMaxDualCondition = 1e12;

struct Inertia {
  int negative = 0;
  int zero = 0;
  int positive = 0;

  bool operator==(const Inertia&) const = default;
};

Inertia inertia(const Matrix& symmetric, double tol_rel = kTolEig);

/// Uncertainty description of every (A, B) consistent with the data:
///   [[A B]^T; I]^T Pc [[A B]^T; I] >= 0.
struct ConsistencySet {
  int n = 0;
  int m = 0;
  int m_d = 0;
  Matrix Pc;                    // (2n+m) x (2n+m)
  Inertia pc_inertia;
  std::optional<Matrix> Pc_dual;  // [-R~ S~^T; S~ -Q~]
  std::optional<double> condition;

  Matrix Qc() const { return Pc.topLeftCorner(n + m, n + m); }
  Matrix Sc() const { return Pc.topRightCorner(n + m, n); }
  Matrix Rc() const { return Pc.bottomRightCorner(n, n); }
};

ConsistencySet build_consistency_set(const DataSet& data, const NoiseBound& noise);

/// Builds a set directly from a given Pc (e.g. loaded from a cache file).
ConsistencySet consistency_set_from_matrix(Matrix Pc, int n, int m, int m_d);

struct Membership {
  bool member = false;
  double margin = 0.0;  // smallest eigenvalue of the quadratic form
};

/// Dual-form test on the n x n matrix [[A B]^T; I]^T Pc [[A B]^T; I].
Membership membership_test(const Matrix& A, const Matrix& B,
                           const ConsistencySet& set, double tol = 0.0);

/// Primal-form test on the (n+m) x (n+m) matrix [[A B]; I]^T Pc_dual [[A B]; I].
/// Requires the dual multiplier.
Membership primal_membership_test(const Matrix& A, const Matrix& B,
                                  const ConsistencySet& set, double tol = 0.0);

struct InertiaReport {
  bool invertible = false;
  int positive_count = 0;
  bool pass = false;
};

InertiaReport check_assumption_inertia(const ConsistencySet& set, int m_d,
                                       double tol_eig = kTolEig);

struct ConditionCheck {
  std::optional<bool> pass;  // empty when the condition could not be evaluated
  std::string detail;
};

struct AppendixBReport {
  ConditionCheck z_full_row_rank;        // (i)
  ConditionCheck bd_invertible;          // (ii)
  ConditionCheck strict_noise_bound;     // (iii), needs the realised D-hat
  ConditionCheck sd_zero;
  std::vector<std::string> warnings;

  /// All four evaluated and passing.
  bool all_pass() const;
};

AppendixBReport check_appendix_b(const DataSet& data, const NoiseBound& noise,
                                 const std::optional<Matrix>& realized = {});

/// Inverts Pc and forms the dual multiplier [-R~ S~^T; S~ -Q~].
/// Throws std::runtime_error if the inertia check fails or Pc is too
/// ill-conditioned.
ConsistencySet dualize(const ConsistencySet& set);

/// Reverses dualize(): rebuilds Pc from a dual multiplier.
Matrix undualize(const Matrix& Pc_dual, int n, int m);

}  // namespace ddmsi
