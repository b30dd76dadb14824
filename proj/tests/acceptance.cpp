// Acceptance run: one PASS/FAIL line per criterion.
//
//   acceptance [--out DIR] [--expected-failures 7,...]
//
// Criteria listed under --expected-failures still print FAIL; they only stop
// affecting the exit status (and a listed criterion that passes is reported).

#include <algorithm>
#include <chrono>
#include <limits>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <mutex>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "ddmsi/data_consistency.hpp"
#include "ddmsi/deriv_estimation.hpp"
#include "ddmsi/experiments.hpp"
#include "ddmsi/lmi_assembly.hpp"
#include "ddmsi/msi_search.hpp"
#include "ddmsi/sdp.hpp"
#include "ddmsi/system_model.hpp"

using namespace ddmsi;
using Clock = std::chrono::steady_clock;

namespace {

struct Line {
  int id;
  bool pass;
  std::string detail;
};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

LtiSystem example_system() {
  Matrix A(2, 2);
  A << 0.0, 1.0, 0.0, -0.1;
  Matrix B(2, 1);
  B << 0.0, 0.1;
  return LtiSystem(A, B);
}

FeedbackGain example_gain() {
  Matrix K(1, 2);
  K << -3.75, -11.5;
  return FeedbackGain(K);
}

// Collects every Feasible solve and re-checks it with its own eigenvalue
// evaluation of each constraint.
class WitnessAudit {
 public:
  void operator()(const LmiProblem& problem, const FeasibilityResult& r) {
    if (!r.feasible()) return;
    const double margin = default_margin(problem.h);
    bool ok = r.x.size() == problem.variables.num_scalars() && r.x.allFinite();
    for (const auto& c : problem.constraints) {
      if (!ok) break;
      Matrix F = c.expr.evaluate(r.x);
      if (c.sense == Sense::PositiveDefinite) F = -F;
      const Matrix S = 0.5 * (F + F.transpose());
      ok = Eigen::SelfAdjointEigenSolver<Matrix>(S, Eigen::EigenvaluesOnly).eigenvalues().maxCoeff() <=
           -0.5 * margin;
    }
    std::lock_guard<std::mutex> lock(mu_);
    ++checked_;
    if (!ok) ++failed_;
  }
  int checked() const { return checked_; }
  int failed() const { return failed_; }

 private:
  std::mutex mu_;
  int checked_ = 0;
  int failed_ = 0;
};

struct Certified {
  std::string label;
  Matrix K;
  double h;
};

Line criterion_1(const SolverOptions& solver, std::vector<Certified>& certs) {
  const auto t0 = Clock::now();
  BisectionConfig cfg;
  const AnalysisOutcome a = analyze_msi(example_system(), example_gain(), cfg, solver);
  const double elapsed = seconds_since(t0);
  if (!a.certificate) return {1, false, "no certificate: " + a.search.message};
  const double h = a.certificate->h;
  certs.push_back({"model", example_gain().K(), h});
  const bool pass = h >= 1.61 && h <= 1.63 && elapsed < 30.0;
  return {1, pass, "h* = " + fmt("%.5f", h) + " in [1.61, 1.63], " + fmt("%.2f", elapsed) + " s < 30 s"};
}

void criteria_2_3(const SolverOptions& solver, const std::string& out, std::vector<Certified>& certs,
                  std::vector<Line>& lines) {
  ExperimentConfig cfg;
  cfg.output = out;
  cfg.solver = solver;
  const auto t0 = Clock::now();
  const ResultTable t = run_reproduce_example(cfg);
  const double elapsed = seconds_since(t0);

  for (const auto& r : t.rows) {
    if (r.table == "model" || !r.h) continue;
    certs.push_back({r.table + " d=" + fmt("%g", r.d_bar) + " seed=" + std::to_string(r.seed),
                     r.K, *r.h});
  }

  // Table 1.
  {
    std::ostringstream d;
    bool pass = elapsed < 300.0;
    double prev = std::numeric_limits<double>::infinity();
    const auto& levels = paper_noise_levels();
    const auto& paper = paper_analysis_bounds();
    d << "medians";
    for (std::size_t i = 0; i < levels.size(); ++i) {
      const auto med = t.median("analysis", levels[i]);
      if (!med) {
        pass = false;
        d << " [" << levels[i] << ": none]";
        continue;
      }
      const double rel = std::abs(*med - paper[i]) / paper[i];
      pass = pass && rel <= 0.2 && *med <= prev;
      prev = *med;
      d << " " << fmt("%.4g", *med) << " (" << fmt("%+.1f", 100.0 * (*med - paper[i]) / paper[i])
        << "%)";
    }
    int rows = 0;
    double worst = 0.0;
    for (const auto& r : t.rows) {
      if (r.table != "analysis") continue;
      ++rows;
      if (r.status != "ok" || !r.h) {
        pass = false;
        continue;
      }
      worst = std::max(worst, *r.h);
    }
    pass = pass && rows == static_cast<int>(levels.size() * cfg.seeds.size()) && worst <= 1.63;
    d << "; max h* " << fmt("%.4g", worst) << " <= 1.63; " << rows << " rows; sweep "
      << fmt("%.1f", elapsed) << " s < 300 s";
    lines.push_back({2, pass, d.str()});
  }

  // Table 2.
  {
    std::ostringstream d;
    bool pass = true;
    double min_05 = std::numeric_limits<double>::infinity();
    double min_01 = std::numeric_limits<double>::infinity();
    int n05 = 0, n01 = 0;
    for (const auto& r : t.rows) {
      if (r.table != "design") continue;
      const double h = r.h && r.status == "ok" ? *r.h : 0.0;
      if (r.d_bar == 0.05) {
        min_05 = std::min(min_05, h);
        ++n05;
      }
      if (r.d_bar == 0.01) {
        min_01 = std::min(min_01, h);
        ++n01;
      }
    }
    pass = n05 == 5 && n01 == 5 && min_05 >= 2.0 && min_01 >= 8.0;
    d << "every seed: h >= " << fmt("%.4g", min_05) << " at d=0.05 (>= 2.0), h >= "
      << fmt("%.4g", min_01) << " at d=0.01 (>= 8); medians";
    double prev = std::numeric_limits<double>::infinity();
    for (double lv : paper_noise_levels()) {
      const auto med = t.median("design", lv);
      if (!med) {
        pass = false;
        continue;
      }
      pass = pass && *med <= prev;
      prev = *med;
      d << " " << fmt("%.4g", *med);
    }
    d << " non-increasing";
    lines.push_back({3, pass, d.str()});
  }
}

Line criterion_4() {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.1, 1.0);
  int candidates = 0, disagreements = 0, members = 0;
  for (int instance = 0; instance < 20; ++instance) {
    const int N = 1 + instance % 3;
    DataSet d;
    for (int k = 0; k < N; ++k) d.tau.push_back(k);
    d.X = Matrix::NullaryExpr(1, N, [&] { return g(rng); });
    d.U = Matrix::NullaryExpr(1, N, [&] { return g(rng); });
    d.Xdot = Matrix::NullaryExpr(1, N, [&] { return g(rng); });
    const double bd = (instance % 2 ? -1.0 : 1.0) * unit(rng);
    d.Bd = Matrix::Constant(1, 1, bd);
    const Matrix L = Matrix::NullaryExpr(N, N, [&] { return g(rng); });
    NoiseBound nb;
    nb.Qd = -(L * L.transpose() + 0.1 * Matrix::Identity(N, N));
    nb.Sd = Matrix::NullaryExpr(N, 1, [&] { return 0.3 * g(rng); });
    nb.Rd = Matrix::Constant(1, 1, unit(rng));
    const ConsistencySet set = build_consistency_set(d, nb);
    // Candidates around the least-squares fit, at growing distances.
    const Matrix Z = d.Z();
    const Matrix fit = d.Xdot * Z.completeOrthogonalDecomposition().pseudoInverse();
    for (int c = 0; c < 5; ++c) {
      const double spread = 0.05 * std::pow(4.0, c);
      const double a = fit(0, 0) + spread * g(rng), b = fit(0, 1) + spread * g(rng);
      // With bd != 0 the only disturbance explaining the data is this one.
      const Matrix D = (d.Xdot - a * d.X - b * d.U) / bd;
      const double value = (D * nb.Qd * D.transpose() + D * nb.Sd + nb.Sd.transpose() * D.transpose() + nb.Rd)(0, 0);
      const bool member = membership_test(Matrix::Constant(1, 1, a), Matrix::Constant(1, 1, b), set).member;
      ++candidates;
      members += member ? 1 : 0;
      if (std::abs(value) > 1e-6 && member != (value >= 0.0)) ++disagreements;
    }
  }
  return {4, candidates == 100 && disagreements == 0,
          std::to_string(candidates) + " candidates, " + std::to_string(disagreements) +
              " disagreements outside the 1e-6 band (" + std::to_string(members) + " members)"};
}

Line criterion_5() {
  const ExperimentData ex = generate_experiment_data(example_system(), ExperimentConfig{}.sampling_times(),
                                                     uniform_box_input(1, -1.0, 1.0),
                                                     uniform_ball_disturbance(2, 0.02), 3);
  const ConsistencySet set = dualize(build_consistency_set(ex.data, NoiseBound::from_pointwise(0.02, 100, 2)));
  const double roundtrip = (undualize(*set.Pc_dual, 2, 1) - set.Pc).norm() / set.Pc.norm();

  std::mt19937_64 rng(99);
  std::normal_distribution<double> g(0.0, 1.0);
  int disagreements = 0, members = 0;
  const double band = 1e-9 * set.Pc.norm();
  for (int i = 0; i < 500; ++i) {
    const double scale = std::pow(10.0, -4.0 + (i % 4));
    const Matrix A = example_system().A() + scale * Matrix::NullaryExpr(2, 2, [&] { return g(rng); });
    const Matrix B = example_system().B() + scale * Matrix::NullaryExpr(2, 1, [&] { return g(rng); });
    const Membership dual = membership_test(A, B, set);
    const Membership primal = primal_membership_test(A, B, set);
    members += dual.member ? 1 : 0;
    if (std::abs(dual.margin) > band && std::abs(primal.margin) > band && dual.member != primal.member) {
      ++disagreements;
    }
  }
  return {5, disagreements == 0 && roundtrip <= 1e-8,
          "500 candidates, " + std::to_string(disagreements) + " disagreements (" +
              std::to_string(members) + " members); round trip " + fmt("%.2e", roundtrip) + " <= 1e-8"};
}

Line criterion_6() {
  const auto tau = ExperimentConfig{}.sampling_times();
  const std::vector<double> levels{0.001, 0.005, 0.01, 0.02, 0.03, 0.04, 0.05};
  int conditions_hold = 0, inertia_pass = 0;
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    const double d_bar = levels[seed % levels.size()];
    const ExperimentData ex = generate_experiment_data(example_system(), tau, uniform_box_input(1, -1.0, 1.0),
                                                       uniform_ball_disturbance(2, d_bar), seed);
    const NoiseBound nb = NoiseBound::from_pointwise(d_bar, 100, 2);
    if (!check_appendix_b(ex.data, nb, ex.disturbances).all_pass()) continue;
    ++conditions_hold;
    if (check_assumption_inertia(build_consistency_set(ex.data, nb), 2).pass) ++inertia_pass;
  }

  const ExperimentData base = generate_experiment_data(example_system(), tau, uniform_box_input(1, -1.0, 1.0),
                                                       uniform_ball_disturbance(2, 0.01), 1);
  const NoiseBound nb = NoiseBound::from_pointwise(0.01, 100, 2);
  // (i) no excitation: Z loses rank.
  DataSet no_input = base.data;
  no_input.U.setZero();
  const bool fails_i = !check_appendix_b(no_input, nb, base.disturbances).z_full_row_rank.pass.value_or(true) &&
                       !check_assumption_inertia(build_consistency_set(no_input, nb), 2).pass;
  // (ii) singular disturbance channel.
  DataSet singular_bd = base.data;
  singular_bd.Bd(1, 1) = 0.0;
  const bool fails_ii = !check_appendix_b(singular_bd, nb, base.disturbances).bd_invertible.pass.value_or(true) &&
                        !check_assumption_inertia(build_consistency_set(singular_bd, nb), 2).pass;
  // (iii) a realised disturbance far outside the bound and orthogonal to the
  // rows of Z: the data equation still holds but Rd - D D' is indefinite.
  DataSet outside = base.data;
  const Matrix Z = outside.Z();
  const Matrix proj = Z.transpose() * (Z * Z.transpose()).inverse() * Z;
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g(0.0, 1.0);
  const Matrix raw = Matrix::NullaryExpr(2, 100, [&] { return g(rng); });
  Matrix D = raw * (Matrix::Identity(100, 100) - proj);
  D *= 10.0 * std::sqrt(nb.Rd(0, 0)) / D.norm() * std::sqrt(2.0);
  outside.Xdot = example_system().A() * outside.X + example_system().B() * outside.U + outside.Bd * D;
  const bool fails_iii = !check_appendix_b(outside, nb, D).strict_noise_bound.pass.value_or(true) &&
                         !check_assumption_inertia(build_consistency_set(outside, nb), 2).pass;

  const bool pass = conditions_hold == 100 && inertia_pass == 100 && fails_i && fails_ii && fails_iii;
  return {6, pass,
          std::to_string(inertia_pass) + "/" + std::to_string(conditions_hold) +
              " datasets meeting (i)-(iii) pass the inertia check; constructed violations fail: (i) " +
              (fails_i ? "yes" : "no") + ", (ii) " + (fails_ii ? "yes" : "no") + ", (iii) " +
              (fails_iii ? "yes" : "no")};
}

Line criterion_7() {
  std::mt19937_64 rng(2024);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  int violations = 0;
  double worst = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 1 + trial % 3;
    const int m = 1 + trial % 2;
    const double a_bar = 0.1 + 3.0 * unit(rng);
    const double b_bar = 0.1 + 3.0 * unit(rng);
    Matrix A = Matrix::NullaryExpr(n, n, [&] { return normal(rng); });
    Matrix B = Matrix::NullaryExpr(n, m, [&] { return normal(rng); });
    A *= a_bar * unit(rng) / Eigen::JacobiSVD<Matrix>(A).singularValues()(0);
    B *= b_bar * unit(rng) / Eigen::JacobiSVD<Matrix>(B).singularValues()(0);
    const Vector x = Vector::NullaryExpr(n, [&] { return normal(rng); });
    const Vector u = Vector::NullaryExpr(m, [&] { return normal(rng); });
    const double h = 1e-3 + 2.0 * unit(rng);
    const ZohMaps z = discretize_zoh(A, B, h);
    Matrix X(n, 2);
    X.col(0) = x;
    X.col(1) = z.state * x + z.input * u;
    const double err = (euler_derivative(X, h).col(0) - (A * x + B * u)).norm();
    const double bound = derivative_error_bound(x, u, NormPrior(a_bar, b_bar), h);
    worst = std::max(worst, err / bound);
    if (err > bound * (1.0 + 1e-10) + 1e-14) ++violations;
  }
  return {7, violations == 0,
          "200 draws (a_bar, b_bar in [0.1, 3.1], norms uniform up to the bounds, h in [0.001, 2.001]): " +
              std::to_string(violations) + " violations, worst error/bound " + fmt("%.3f", worst)};
}

Line criterion_8(const std::vector<Certified>& certs) {
  const LtiSystem sys = example_system();
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  int runs = 0, divergences = 0;
  double worst = 0.0;
  std::string worst_label;
  for (const auto& c : certs) {
    const double T = 100.0 * c.h;
    for (int s = 0; s < 100; ++s) {
      std::vector<double> times{0.0};
      while (times.back() < T) {
        // gap uniform in (0, h*]
        const double gap = c.h * std::max(1.0 - unit(rng), 1e-12);
        times.push_back(times.back() + gap);
      }
      Vector x0(2);
      x0 << normal(rng), normal(rng);
      SimulationOptions opts;
      opts.output_dt = c.h;
      const Trajectory traj =
          simulate_sampled_closed_loop(sys, FeedbackGain(c.K), SamplingSequence(times), x0, T, opts);
      const double ratio = traj.states.col(traj.states.cols() - 1).norm() / x0.norm();
      ++runs;
      if (!(ratio <= 1e-3)) ++divergences;
      if (!(ratio <= worst)) {
        worst = ratio;
        worst_label = c.label;
      }
    }
  }
  return {8, runs == 100 * static_cast<int>(certs.size()) && divergences == 0,
          std::to_string(certs.size()) + " certificates x 100 sequences: " + std::to_string(divergences) +
              " with |x(100 h*)| > 1e-3 |x0|; worst ratio " + fmt("%.2e", worst) + " (" + worst_label + ")"};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria"};
  std::string out = "acceptance_out";
  std::vector<int> expected_failures;
  app.add_option("--out", out, "Directory for the example sweep outputs");
  app.add_option("--expected-failures", expected_failures, "Criteria known to be unattainable")
      ->delimiter(',');
  CLI11_PARSE(app, argc, argv);
  const std::set<int> expected(expected_failures.begin(), expected_failures.end());

  WitnessAudit audit;
  SolverOptions solver;
  solver.observer = [&audit](const LmiProblem& p, const FeasibilityResult& r) { audit(p, r); };

  std::vector<Line> lines;
  std::vector<Certified> certs;
  try {
    lines.push_back(criterion_1(solver, certs));
    criteria_2_3(solver, out, certs, lines);
    lines.push_back(criterion_4());
    lines.push_back(criterion_5());
    lines.push_back(criterion_6());
    lines.push_back(criterion_7());
    lines.push_back(criterion_8(certs));
  } catch (const std::exception& e) {
    std::cout << "aborted: " << e.what() << "\n";
    return 1;
  }
  lines.push_back({9, audit.checked() > 0 && audit.failed() == 0,
                   std::to_string(audit.checked() - audit.failed()) + "/" + std::to_string(audit.checked()) +
                       " Feasible results re-verified by eigenvalues at half the margin"});

  std::sort(lines.begin(), lines.end(), [](const Line& a, const Line& b) { return a.id < b.id; });
  int unexpected = 0;
  for (const auto& l : lines) {
    std::string note;
    if (!l.pass && expected.count(l.id)) note = " [expected failure]";
    if (l.pass && expected.count(l.id)) note = " [listed as expected failure but passed]";
    if (!l.pass && !expected.count(l.id)) ++unexpected;
    std::cout << "criterion " << l.id << ": " << (l.pass ? "PASS" : "FAIL") << note << ": " << l.detail << "\n";
  }
  std::cout << unexpected << " unexpected failure(s)\n";
  return unexpected == 0 ? 0 : 1;
}
