// Command-line front end: dataset generation, derivative estimation, set
// construction, analysis, design, the example sweep and certificate checks.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "ddmsi/data_consistency.hpp"
#include "ddmsi/deriv_estimation.hpp"
#include "ddmsi/experiments.hpp"
#include "ddmsi/io.hpp"
#include "ddmsi/msi_search.hpp"

namespace fs = std::filesystem;
using namespace ddmsi;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFatal = 1;
constexpr int kExitPartial = 2;

struct SharedFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::optional<double> margin;
  std::optional<double> h_max;
  std::optional<double> tol;
  std::optional<int> jobs;
  std::string dataset;
  std::string backend;
  bool verbose = false;
};

ExperimentConfig load_config(const SharedFlags& f, Mode mode) {
  ExperimentConfig cfg = f.config.empty() ? ExperimentConfig{}
                                          : ExperimentConfig::from_json(read_json_file(f.config));
  cfg.mode = mode;
  if (f.seed) cfg.seeds = {*f.seed};
  if (!f.out.empty()) cfg.output = f.out;
  if (f.margin) cfg.bisection.margin = *f.margin;
  if (f.h_max) cfg.bisection.h_max = *f.h_max;
  if (f.tol) cfg.bisection.abs_tol = *f.tol;
  if (f.jobs) cfg.jobs = *f.jobs;
  if (!f.dataset.empty()) cfg.dataset = f.dataset;
  if (!f.backend.empty()) cfg.solver.backend = parse_backend(f.backend);
  cfg.solver.verbose = f.verbose;
  cfg.validate();
  return cfg;
}

void announce(const fs::path& p) { std::cout << "wrote " << p.string() << "\n"; }

int cmd_simulate(const ExperimentConfig& cfg) {
  const double d_bar = cfg.noise_levels.front();
  const std::uint64_t seed = cfg.seeds.front();
  Matrix realized;
  const DatasetFile ds = generate_example_dataset(cfg, d_bar, seed, &realized);
  const fs::path data_path = cfg.output / "dataset.json";
  save_dataset(data_path, ds.data, ds.noise, ds.meta);
  announce(data_path);

  if (cfg.gain) {
    const LtiSystem sys = cfg.system();
    const FeedbackGain gain = cfg.feedback();
    gain.check_against(sys);
    const Vector x0 = Eigen::Map<const Vector>(cfg.simulation.x0.data(),
                                               static_cast<Eigen::Index>(cfg.simulation.x0.size()));
    SimulationOptions opts;
    opts.output_dt = cfg.simulation.output_dt;
    const Trajectory traj = simulate_sampled_closed_loop(
        sys, gain, SamplingSequence::periodic(cfg.simulation.gap, cfg.simulation.horizon), x0,
        cfg.simulation.horizon, opts);
    const fs::path traj_path = cfg.output / "trajectory.json";
    write_json_file(traj_path, trajectory_to_json(traj));
    announce(traj_path);
  }
  return kExitOk;
}

int cmd_estimate_deriv(const ExperimentConfig& cfg) {
  const DatasetFile in = load_dataset(*cfg.dataset);
  const auto& tau = in.data.tau;
  if (tau.size() < 2) throw std::invalid_argument("estimate-deriv: need at least two samples");
  const double h = tau[1] - tau[0];
  for (std::size_t k = 1; k + 1 < tau.size(); ++k) {
    if (std::abs((tau[k + 1] - tau[k]) - h) > 1e-9 * std::max(1.0, std::abs(h))) {
      throw std::invalid_argument("estimate-deriv: samples are not equidistant");
    }
  }
  const NormPrior prior(*cfg.a_bar, *cfg.b_bar);
  const DerivEstimate est = estimate_derivatives(in.data.X, in.data.U, prior, h);
  const int N = static_cast<int>(est.xdot_est.cols());
  const int n = in.data.states();

  DataSet out;
  out.tau.assign(tau.begin(), tau.begin() + N);
  out.X = in.data.X.leftCols(N);
  out.U = in.data.U.leftCols(N);
  out.Xdot = est.xdot_est;
  out.Bd = Matrix::Identity(n, n);
  const NoiseBound noise = bounds_to_noise_model(est.per_sample_bound, N, n);
  if (is_degenerate(noise)) {
    std::cerr << "warning: all derivative error bounds are zero; the noise model is degenerate\n";
  }
  DatasetMeta meta = in.meta;
  meta.generator = "forward-difference estimate (a_bar = " + std::to_string(*cfg.a_bar) +
                   ", b_bar = " + std::to_string(*cfg.b_bar) + ")";
  const fs::path path = cfg.output / "dataset_estimated.json";
  save_dataset(path, out, noise, meta);
  announce(path);
  return kExitOk;
}

int cmd_build_set(const ExperimentConfig& cfg) {
  const DatasetFile ds = load_dataset(*cfg.dataset);
  ConsistencySet set = build_consistency_set(ds.data, ds.noise);
  const InertiaReport inertia_rep = check_assumption_inertia(set, ds.data.disturbances());
  const AppendixBReport appendix = check_appendix_b(ds.data, ds.noise);
  if (inertia_rep.pass) set = dualize(set);

  Json j = consistency_set_to_json(set);
  j["inertia_check"] = {{"pass", inertia_rep.pass},
                        {"invertible", inertia_rep.invertible},
                        {"positive_count", inertia_rep.positive_count}};
  auto cond = [](const ConditionCheck& c) {
    return Json{{"pass", c.pass ? Json(*c.pass) : Json(nullptr)}, {"detail", c.detail}};
  };
  j["sufficient_conditions"] = {{"z_full_row_rank", cond(appendix.z_full_row_rank)},
                                {"bd_invertible", cond(appendix.bd_invertible)},
                                {"strict_noise_bound", cond(appendix.strict_noise_bound)},
                                {"sd_zero", cond(appendix.sd_zero)},
                                {"warnings", appendix.warnings}};
  const fs::path path = cfg.output / "consistency_set.json";
  write_json_file(path, j);
  announce(path);
  std::cout << "inertia check: " << (inertia_rep.pass ? "pass" : "FAIL") << "\n";
  return inertia_rep.pass ? kExitOk : kExitPartial;
}

int cmd_analyze(const ExperimentConfig& cfg) {
  const FeedbackGain gain = cfg.feedback();
  Json cert;
  AnalysisOutcome a;
  if (cfg.dataset) {
    const DatasetFile ds = load_dataset(*cfg.dataset);
    const ConsistencySet set = dualize(build_consistency_set(ds.data, ds.noise));
    a = analyze_msi(set, gain, cfg.bisection, cfg.solver);
    if (a.certificate) {
      cert = analysis_certificate_file_json(set, gain, a, cfg.bisection);
      if (ds.meta.seed) cert["seed"] = *ds.meta.seed;
    }
  } else {
    const LtiSystem sys = cfg.system();
    a = analyze_msi(sys, gain, cfg.bisection, cfg.solver);
    if (a.certificate) cert = model_certificate_json(sys, gain, a, cfg.bisection);
  }
  std::cout << a.search.message << "\n";
  if (!a.certificate) return kExitPartial;
  cert["config_hash"] = cfg.hash();
  const fs::path path = cfg.output / "certificate.json";
  write_json_file(path, cert);
  announce(path);
  return kExitOk;
}

int cmd_design(const ExperimentConfig& cfg) {
  const DatasetFile ds = load_dataset(*cfg.dataset);
  const ConsistencySet set = dualize(build_consistency_set(ds.data, ds.noise));
  const DesignOutcome d = design_iterate(set, cfg.feedback(), cfg.bisection, cfg.iteration,
                                         cfg.solver);
  std::cout << "initial h = " << d.initial.h << ", designed h = " << d.best.h << ", K = ["
            << d.best.K << "]\n";
  Json cert = design_certificate_file_json(set, d, cfg.bisection);
  if (ds.meta.seed) cert["seed"] = *ds.meta.seed;
  cert["config_hash"] = cfg.hash();
  const fs::path path = cfg.output / "design_certificate.json";
  write_json_file(path, cert);
  announce(path);
  return kExitOk;
}

int cmd_reproduce(const ExperimentConfig& cfg) {
  const ResultTable t = run_reproduce_example(cfg);
  std::cout << summary_csv(t, cfg);
  std::cout << "results in " << cfg.output.string() << " (config " << t.config_hash << ")\n";
  return t.all_ok() ? kExitOk : kExitPartial;
}

int cmd_verify(const std::vector<std::string>& files, const SharedFlags& f) {
  SolverOptions solver;
  if (!f.backend.empty()) solver.backend = parse_backend(f.backend);
  solver.verbose = f.verbose;
  int failed = 0;
  for (const auto& file : files) {
    const VerifyReport r = verify_certificate(read_json_file(file), solver);
    std::cout << (r.pass() ? "PASS " : "FAIL ") << file << ": " << r.detail << "\n";
    failed += r.pass() ? 0 : 1;
  }
  if (failed == 0) return kExitOk;
  return failed == static_cast<int>(files.size()) ? kExitFatal : kExitPartial;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Data-driven maximum sampling interval certification"};
  app.require_subcommand(1);
  SharedFlags f;
  app.add_option("--config", f.config, "Experiment configuration (JSON)")->envname("DDMSI_CONFIG");
  app.add_option("--seed", f.seed, "Use this single seed")->envname("DDMSI_SEED");
  app.add_option("--out", f.out, "Output directory")->envname("DDMSI_OUT");
  app.add_option("--margin", f.margin, "Fixed strictness margin")->envname("DDMSI_MARGIN");
  app.add_option("--h-max", f.h_max, "Upper end of the bisection interval")
      ->envname("DDMSI_H_MAX");
  app.add_option("--tol", f.tol, "Bisection tolerance on h")->envname("DDMSI_TOL");
  app.add_option("--jobs", f.jobs, "Worker threads for sweeps")->envname("DDMSI_JOBS");
  app.add_option("--dataset", f.dataset, "Dataset file (JSON)")->envname("DDMSI_DATASET");
  app.add_option("--backend", f.backend, "SDP backend: clarabel or scs")->envname("DDMSI_BACKEND");
  app.add_flag("--verbose", f.verbose, "Solver output");

  std::optional<Mode> mode;
  auto add_mode = [&](Mode m, const char* help) {
    CLI::App* sub = app.add_subcommand(to_string(m), help);
    sub->fallthrough();
    sub->callback([&mode, m] { mode = m; });
  };
  add_mode(Mode::Simulate, "Generate a noisy experiment dataset (and a closed-loop trajectory)");
  add_mode(Mode::EstimateDeriv, "Replace derivatives by forward differences with error bounds");
  add_mode(Mode::BuildSet, "Build and check the consistency set of a dataset");
  add_mode(Mode::Analyze, "Bisect for the largest certified sampling interval of a gain");
  add_mode(Mode::Design, "Iterate gain design and analysis to enlarge the bound");
  add_mode(Mode::ReproduceExample, "Run the example sweep and emit tables and plots");
  std::vector<std::string> cert_files;
  CLI::App* verify = app.add_subcommand("verify", "Re-check certificate files");
  verify->fallthrough();
  verify->add_option("certificates", cert_files, "Certificate files")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (verify->parsed()) return cmd_verify(cert_files, f);
    const ExperimentConfig cfg = load_config(f, *mode);
    switch (*mode) {
      case Mode::Simulate: return cmd_simulate(cfg);
      case Mode::EstimateDeriv: return cmd_estimate_deriv(cfg);
      case Mode::BuildSet: return cmd_build_set(cfg);
      case Mode::Analyze: return cmd_analyze(cfg);
      case Mode::Design: return cmd_design(cfg);
      case Mode::ReproduceExample: return cmd_reproduce(cfg);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFatal;
  }
  return kExitFatal;
}
