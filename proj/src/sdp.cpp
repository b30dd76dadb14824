#include "ddmsi/sdp.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "scs.h"

extern "C" {
struct DdmsiConicInfo {
  int status;
  int iterations;
  double obj_val;
  double res_primal;
  double res_dual;
  double gap_rel;
  double solve_time;
};

int ddmsi_conic_solve(std::size_t n, std::size_t m, const std::size_t* colptr,
                      const std::size_t* rowval, const double* nzval, const double* b,
                      const double* c, std::size_t nonneg, const std::size_t* psd_dims,
                      std::size_t n_psd, int max_iter, double tol, int verbose,
                      double* x_out, double* z_out, DdmsiConicInfo* info);
}

namespace ddmsi {

namespace {

constexpr double kSqrt2 = 1.4142135623730951;

// Packed symmetric matrix with off-diagonal entries scaled by sqrt(2). SCS
// walks the lower triangle column by column, Clarabel the upper one.
void append_svec(const Matrix& M, bool lower, std::vector<double>& out) {
  const Eigen::Index n = M.rows();
  for (Eigen::Index j = 0; j < n; ++j) {
    const Eigen::Index first = lower ? j : 0;
    const Eigen::Index last = lower ? n : j + 1;
    for (Eigen::Index i = first; i < last; ++i) {
      const double v = 0.5 * (M(i, j) + M(j, i));
      out.push_back(i == j ? v : kSqrt2 * v);
    }
  }
}

double spectral_norm(const Matrix& M) {
  if (M.size() == 0) return 0.0;
  Eigen::JacobiSVD<Matrix> svd(M);
  return svd.singularValues()(0);
}

// maximize t  s.t.  A [y; t] + s = b,  s in R_+^box_rows x PSD x ... x PSD
struct ConicProblem {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> b;
  std::vector<double> cost;
  std::vector<std::size_t> colptr;
  std::vector<std::size_t> rowidx;
  std::vector<double> values;
  std::size_t box_rows = 0;
  std::vector<std::size_t> psd_sizes;
  std::vector<double> var_scale;  // x_j = y_j / var_scale[j]
};

// With `all_soft`, hard constraints share the level t as well.
ConicProblem build_conic(const LmiProblem& problem, double margin, double box, bool lower,
                         bool all_soft = false) {
  ConicProblem cp;
  const int p = problem.variables.num_scalars();
  const auto np = static_cast<std::size_t>(p);

  std::vector<double> row_scale;
  for (const auto& c : problem.constraints) {
    row_scale.push_back(1.0 / std::max(1.0, spectral_norm(c.expr.constant_term())));
  }
  cp.var_scale.assign(np, 0.0);
  for (std::size_t i = 0; i < problem.constraints.size(); ++i) {
    for (const auto& [var, coeff] : problem.constraints[i].expr.terms()) {
      cp.var_scale[static_cast<std::size_t>(var)] +=
          std::pow(row_scale[i] * coeff.norm(), 2);
    }
  }
  for (double& s : cp.var_scale) s = s > 0.0 ? std::sqrt(s) : 1.0;

  cp.cols = np + 1;
  std::vector<std::vector<std::pair<std::size_t, double>>> columns(cp.cols);
  auto put = [&](std::size_t col, double v) {
    if (v != 0.0) columns[col].emplace_back(cp.b.size(), v);
  };

  // |y_j| <= box as two orthant rows.
  for (std::size_t j = 0; j < np; ++j) {
    put(j, 1.0);
    cp.b.push_back(box);
    put(j, -1.0);
    cp.b.push_back(box);
  }
  cp.box_rows = cp.b.size();

  // Oriented constraint sign*F(x) <= -t I, i.e. slack -sign*F(x) - t I >= 0.
  // Hard constraints use the fixed margin in place of t.
  for (std::size_t i = 0; i < problem.constraints.size(); ++i) {
    const auto& c = problem.constraints[i];
    const double sign = c.sense == Sense::NegativeDefinite ? 1.0 : -1.0;
    const double rs = row_scale[i];
    const auto r = c.expr.rows();
    cp.psd_sizes.push_back(static_cast<std::size_t>(r));

    std::vector<double> rhs;
    Matrix constant = -sign * rs * c.expr.constant_term();
    const bool hard = c.hard && !all_soft;
    if (hard) constant -= rs * margin * Matrix::Identity(r, r);
    append_svec(constant, lower, rhs);
    std::vector<std::vector<double>> block;
    std::vector<std::size_t> block_cols;
    for (const auto& [var, coeff] : c.expr.terms()) {
      const auto j = static_cast<std::size_t>(var);
      block.emplace_back();
      append_svec(sign * rs * coeff / cp.var_scale[j], lower, block.back());
      block_cols.push_back(j);
    }
    if (!hard) {
      block.emplace_back();
      append_svec(Matrix::Identity(r, r), lower, block.back());
      block_cols.push_back(np);
    }

    for (std::size_t k = 0; k < rhs.size(); ++k) {
      for (std::size_t q = 0; q < block.size(); ++q) put(block_cols[q], block[q][k]);
      cp.b.push_back(rhs[k]);
    }
  }
  cp.rows = cp.b.size();

  cp.colptr.push_back(0);
  for (const auto& col : columns) {
    for (const auto& [row, v] : col) {
      cp.rowidx.push_back(row);
      cp.values.push_back(v);
    }
    cp.colptr.push_back(cp.values.size());
  }
  cp.cost.assign(cp.cols, 0.0);
  cp.cost[np] = -1.0;
  return cp;
}

enum class Outcome { Solved, Inaccurate, Failed };

struct BackendRun {
  Outcome outcome = Outcome::Failed;
  std::vector<double> y;  // normalised variables followed by t
  std::vector<double> z;  // dual cone variable, empty if unavailable
  std::string diagnostics;
};

// Projects z onto the (self-dual) cone: orthant rows clipped at zero, PSD
// blocks by eigenvalue clipping.
void project_dual(const ConicProblem& cp, std::vector<double>& z, bool lower) {
  for (std::size_t k = 0; k < cp.box_rows; ++k) z[k] = std::max(z[k], 0.0);
  std::size_t pos = cp.box_rows;
  for (std::size_t d : cp.psd_sizes) {
    const auto n = static_cast<Eigen::Index>(d);
    Matrix S(n, n);
    std::size_t q = pos;
    for (Eigen::Index j = 0; j < n; ++j) {
      const Eigen::Index first = lower ? j : 0;
      const Eigen::Index last = lower ? n : j + 1;
      for (Eigen::Index i = first; i < last; ++i) {
        const double v = i == j ? z[q] : z[q] / kSqrt2;
        S(i, j) = v;
        S(j, i) = v;
        ++q;
      }
    }
    Eigen::SelfAdjointEigenSolver<Matrix> es(S);
    const Matrix clipped = es.eigenvectors() *
                           es.eigenvalues().cwiseMax(0.0).asDiagonal() *
                           es.eigenvectors().transpose();
    std::vector<double> packed;
    append_svec(clipped, lower, packed);
    std::copy(packed.begin(), packed.end(), z.begin() + static_cast<std::ptrdiff_t>(pos));
    pos = q;
  }
}

// Upper bound on the optimal level t from an approximate dual point z.
// For z in the cone, weak duality with the residual r = A'z + c gives
//   t (1 + r_t) <= b'z + box * sum_{j != t} |r_j|.
// Before that, z is moved by least-norm corrections that cancel r and
// projected back onto the cone.
double dual_level_bound(const ConicProblem& cp, std::vector<double> z, bool lower,
                        double box) {
  constexpr double kInf = std::numeric_limits<double>::infinity();
  if (z.size() != cp.rows) return kInf;
  for (double v : z) {
    if (!std::isfinite(v)) return kInf;
  }
  Matrix A = Matrix::Zero(static_cast<Eigen::Index>(cp.rows),
                          static_cast<Eigen::Index>(cp.cols));
  for (std::size_t j = 0; j < cp.cols; ++j) {
    for (std::size_t k = cp.colptr[j]; k < cp.colptr[j + 1]; ++k) {
      A(static_cast<Eigen::Index>(cp.rowidx[k]), static_cast<Eigen::Index>(j)) = cp.values[k];
    }
  }
  const Vector c = Eigen::Map<const Vector>(cp.cost.data(), static_cast<Eigen::Index>(cp.cols));
  const Vector b = Eigen::Map<const Vector>(cp.b.data(), static_cast<Eigen::Index>(cp.rows));
  // Corrections only touch the PSD rows: box rows carry b = box.
  const auto psd_rows = static_cast<Eigen::Index>(cp.rows - cp.box_rows);
  const Matrix Ap = A.bottomRows(psd_rows);
  const Eigen::LDLT<Matrix> normal(Ap.transpose() * Ap);

  project_dual(cp, z, lower);
  Eigen::Map<Vector> zv(z.data(), static_cast<Eigen::Index>(z.size()));
  for (int round = 0; round < 3; ++round) {
    const Vector r = A.transpose() * zv + c;
    zv.tail(psd_rows) -= Ap * normal.solve(r);
    project_dual(cp, z, lower);
  }
  const Vector r = A.transpose() * zv + c;
  const double r_t = r(r.size() - 1);
  if (!(1.0 + r_t > 0.5)) return kInf;
  const double slack = box * r.head(r.size() - 1).cwiseAbs().sum();
  return (b.dot(zv) + slack) / (1.0 + r_t);
}

BackendRun run_scs(const ConicProblem& cp, const SolverOptions& options) {
  std::vector<scs_int> colptr(cp.colptr.begin(), cp.colptr.end());
  std::vector<scs_int> rowidx(cp.rowidx.begin(), cp.rowidx.end());
  std::vector<scs_int> psd(cp.psd_sizes.begin(), cp.psd_sizes.end());
  std::vector<double> values = cp.values;
  std::vector<double> b = cp.b;
  std::vector<double> cost = cp.cost;

  ScsMatrix A{values.data(), rowidx.data(), colptr.data(), static_cast<scs_int>(cp.rows),
              static_cast<scs_int>(cp.cols)};
  ScsData data{};
  data.m = static_cast<scs_int>(cp.rows);
  data.n = static_cast<scs_int>(cp.cols);
  data.A = &A;
  data.P = nullptr;
  data.b = b.data();
  data.c = cost.data();

  ScsCone cone{};
  cone.l = static_cast<scs_int>(cp.box_rows);
  cone.s = psd.data();
  cone.ssize = static_cast<scs_int>(psd.size());

  ScsSettings settings{};
  scs_set_default_settings(&settings);
  settings.verbose = options.verbose ? 1 : 0;
  settings.max_iters = options.max_iters > 0 ? options.max_iters : 50000;
  settings.eps_abs = options.tolerance;
  settings.eps_rel = options.tolerance;

  BackendRun run;
  run.y.assign(cp.cols, 0.0);
  std::vector<double> sy(cp.rows, 0.0);
  std::vector<double> ss(cp.rows, 0.0);
  ScsSolution sol{run.y.data(), sy.data(), ss.data()};
  ScsInfo info{};
  const scs_int flag = scs(&data, &cone, &settings, &sol, &info);
  run.z = sy;

  std::ostringstream diag;
  diag << "scs status=" << info.status << " iters=" << info.iter
       << " res_pri=" << info.res_pri << " res_dual=" << info.res_dual
       << " gap=" << info.gap;
  run.diagnostics = diag.str();
  if (flag == SCS_SOLVED) run.outcome = Outcome::Solved;
  else if (flag == SCS_SOLVED_INACCURATE) run.outcome = Outcome::Inaccurate;
  return run;
}

const char* clarabel_status(int code) {
  static const char* names[] = {"unsolved",        "solved",
                                "primal infeasible", "dual infeasible",
                                "almost solved",   "almost primal infeasible",
                                "almost dual infeasible", "max iterations",
                                "max time",        "numerical error",
                                "insufficient progress", "callback terminated"};
  return code >= 0 && code < 12 ? names[code] : "unknown";
}

BackendRun run_clarabel(const ConicProblem& cp, const SolverOptions& options) {
  BackendRun run;
  run.y.assign(cp.cols, 0.0);
  std::vector<double> z(cp.rows, 0.0);
  DdmsiConicInfo info{};
  const int rc = ddmsi_conic_solve(
      cp.cols, cp.rows, cp.colptr.data(), cp.rowidx.data(), cp.values.data(), cp.b.data(),
      cp.cost.data(), cp.box_rows, cp.psd_sizes.data(), cp.psd_sizes.size(),
      options.max_iters > 0 ? options.max_iters : 200, options.tolerance,
      options.verbose ? 1 : 0, run.y.data(), z.data(), &info);
  std::ostringstream diag;
  if (rc != 0) {
    diag << "clarabel call failed (code " << rc << ")";
    run.diagnostics = diag.str();
    return run;
  }
  diag << "clarabel status=" << clarabel_status(info.status) << " iters=" << info.iterations
       << " res_pri=" << info.res_primal << " res_dual=" << info.res_dual
       << " gap_rel=" << info.gap_rel;
  run.diagnostics = diag.str();
  run.z = std::move(z);
  switch (info.status) {
    case 1: run.outcome = Outcome::Solved; break;
    case 4:   // almost solved
    case 7:   // max iterations
    case 10:  // insufficient progress
      run.outcome = Outcome::Inaccurate;
      break;
    default: run.outcome = Outcome::Failed;
  }
  return run;
}

}  // namespace

const char* to_string(FeasibilityStatus status) {
  switch (status) {
    case FeasibilityStatus::Feasible: return "Feasible";
    case FeasibilityStatus::Infeasible: return "Infeasible";
    case FeasibilityStatus::Marginal: return "Marginal";
    case FeasibilityStatus::SolverFailure: return "SolverFailure";
  }
  return "Unknown";
}

const char* to_string(SolverBackend backend) {
  return backend == SolverBackend::Scs ? "scs" : "clarabel";
}

SolverBackend parse_backend(const std::string& name) {
  if (name == "clarabel") return SolverBackend::Clarabel;
  if (name == "scs") return SolverBackend::Scs;
  throw std::invalid_argument("unknown solver backend '" + name + "'");
}

bool verify_witness(const LmiProblem& problem, const Vector& x, double margin) {
  if (x.size() != problem.variables.num_scalars() || !x.allFinite()) return false;
  for (double ev : problem.oriented_max_eigenvalues(x)) {
    if (!(ev <= -0.5 * margin)) return false;
  }
  return true;
}

FeasibilityResult solve_feasibility(const LmiProblem& problem, double margin,
                                    const SolverOptions& options) {
  if (!(margin > 0.0)) throw std::invalid_argument("solve_feasibility: margin must be positive");
  const bool scs_backend = options.backend == SolverBackend::Scs;
  const ConicProblem cp = build_conic(problem, margin, options.box, scs_backend);
  BackendRun run = scs_backend ? run_scs(cp, options) : run_clarabel(cp, options);

  FeasibilityResult result;
  const int p = problem.variables.num_scalars();
  Vector x(p);
  for (int j = 0; j < p; ++j) {
    const auto js = static_cast<std::size_t>(j);
    x(j) = run.y[js] / cp.var_scale[js];
  }
  result.x = x;
  result.solver_level = run.y[cp.cols - 1];
  std::ostringstream diag;
  diag << run.diagnostics;

  result.dual_bound = run.z.empty() ? std::numeric_limits<double>::infinity()
                                     : dual_level_bound(cp, run.z, scs_backend, options.box);
  diag << " dual_bound=" << result.dual_bound;
  bool certified_infeasible = result.dual_bound < margin;
  if (!certified_infeasible && !(result.solver_level >= margin) &&
      std::any_of(problem.constraints.begin(), problem.constraints.end(),
                  [](const LmiConstraint& c) { return c.hard; })) {
    // Relaxation with every constraint on the common level: it attains the
    // margin whenever the original problem does.
    const ConicProblem relaxed = build_conic(problem, margin, options.box, scs_backend, true);
    const BackendRun rr = scs_backend ? run_scs(relaxed, options) : run_clarabel(relaxed, options);
    const double bound = rr.z.empty()
                             ? std::numeric_limits<double>::infinity()
                             : dual_level_bound(relaxed, rr.z, scs_backend, options.box);
    diag << " relaxed_dual_bound=" << bound;
    if (bound < result.dual_bound) result.dual_bound = bound;
    certified_infeasible = result.dual_bound < margin;
  }

  if (run.outcome == Outcome::Failed || !x.allFinite() ||
      !std::isfinite(result.solver_level)) {
    result.status = certified_infeasible ? FeasibilityStatus::Infeasible
                                         : FeasibilityStatus::SolverFailure;
    result.achieved_margin = std::numeric_limits<double>::quiet_NaN();
    result.solver_diagnostics = diag.str();
    if (options.observer) options.observer(problem, result);
    return result;
  }

  result.values = problem.variables.unpack(x);
  const auto eigs = problem.oriented_max_eigenvalues(x);
  result.achieved_margin = eigs.empty() ? -std::numeric_limits<double>::infinity()
                                        : *std::max_element(eigs.begin(), eigs.end());
  diag << " level=" << result.solver_level << " verified_margin=" << result.achieved_margin;

  if (result.solver_level >= margin) {
    result.status = verify_witness(problem, x, margin) ? FeasibilityStatus::Feasible
                                                       : FeasibilityStatus::Marginal;
  } else if (run.outcome == Outcome::Inaccurate && !certified_infeasible) {
    result.status = FeasibilityStatus::SolverFailure;
  } else {
    result.status = FeasibilityStatus::Infeasible;
  }
  result.solver_diagnostics = diag.str();
  if (options.observer) options.observer(problem, result);
  return result;
}

}  // namespace ddmsi
