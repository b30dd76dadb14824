#pragma once

#include "ddmsi/data_consistency.hpp"
#include "ddmsi/lmi.hpp"
#include "ddmsi/system_model.hpp"

namespace ddmsi {

/// Multipliers are kept above this floor instead of zero.
inline constexpr double kMultiplierFloor = 1e-9;

/// Default strictness margin for a given sampling bound.
inline double default_margin(double h) { return 1e-7 * (1.0 + h); }

/// Witness values of the time-delay certificate.
struct AnalysisCertificate {
  double h = 0.0;
  Matrix P1, P2, P3, R;
  double lambda1 = 0.0;  // unused (0) for model-based certificates
  double lambda2 = 0.0;
  double margin = 0.0;   // worst oriented constraint eigenvalue (< 0)
};

struct DesignCertificate {
  double h = 0.0;
  Matrix K;
  Matrix Q1, Q2, Q3, R;
  double lambda1 = 0.0;  // multiplier of the Schur-complemented condition
  double lambda2 = 0.0;
  double margin = 0.0;
};

/// Model-based delay LMIs for a known plant:
///   [P2'Acl + Acl'P2, *; P1 - P2 + P3'Acl, -P3 - P3' + hR] < 0
///   the 3n x 3n extension with row [-h(BK)'P2, -h(BK)'P3, -hR] < 0
/// with Acl = A + BK, P1 > 0, R > 0.
LmiProblem assemble_model_based(const LtiSystem& sys, const FeedbackGain& gain,
                                double h);

/// Outer factors of the robust analysis conditions (rows follow the block
/// order [identity; Lyapunov-multiplied rows; uncertainty channel]).
Matrix analysis_factor_first(const Matrix& K, double h);   // (7n+m) x 3n
Matrix analysis_factor_second(const Matrix& K, double h);  // (8n+m) x 4n

/// Robust analysis over every (A, B) in the consistency set. Needs the dual
/// multiplier (see dualize()).
LmiProblem assemble_analysis(const ConsistencySet& set, const FeedbackGain& gain,
                             double h);

/// Robust gain synthesis for fixed Q1 (= P1^{-1}) and R. Affine in
/// {K, Q2, Q3, lambda1~, lambda2~}.
LmiProblem assemble_design(const ConsistencySet& set, const Matrix& Q1_fixed,
                           const Matrix& R_fixed, double h);

/// Fixed-variable outer factors of the design conditions evaluated at a
/// concrete K: (8n+m) x (4n+m).
Matrix design_factor_first(const Matrix& K, const Matrix& R_fixed, double h);
Matrix design_factor_second(const Matrix& K, double h);

}  // namespace ddmsi
