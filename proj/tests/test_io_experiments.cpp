#include <filesystem>
#include <fstream>
#include <sstream>

#include "ddmsi/experiments.hpp"
#include "ddmsi/io.hpp"
#include "doctest.h"
#include "support.hpp"

using namespace ddmsi;
using namespace ddmsi::testing;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("ddmsi_test_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// CSV text without the runtime column (fifth field).
std::string without_runtime(const std::string& csv) {
  std::istringstream in(csv);
  std::string line, out;
  while (std::getline(in, line)) {
    std::vector<std::string> fields;
    std::stringstream ls(line);
    for (std::string f; std::getline(ls, f, ',');) fields.push_back(f);
    if (fields.size() > 4) fields.erase(fields.begin() + 4);
    for (std::size_t i = 0; i < fields.size(); ++i) out += (i ? "," : "") + fields[i];
    out += "\n";
  }
  return out;
}

ExperimentConfig small_sweep(const fs::path& out, int jobs) {
  ExperimentConfig cfg;
  cfg.noise_levels = {0.01, 0.05};
  cfg.seeds = {1, 2};
  cfg.tables = {"analysis"};
  cfg.bisection.abs_tol = 0.02;
  cfg.output = out;
  cfg.jobs = jobs;
  return cfg;
}

}  // namespace

TEST_CASE("dataset files round-trip exactly") {
  const ExperimentData ex = example_data(0.02, 3);
  const NoiseBound nb = NoiseBound::from_pointwise(0.02, 100, 2);
  DatasetMeta meta;
  meta.seed = 3;
  meta.generator = "test";
  const fs::path dir = scratch("roundtrip");
  save_dataset(dir / "d.json", ex.data, nb, meta);
  const DatasetFile back = load_dataset(dir / "d.json");
  CHECK(back.data.X == ex.data.X);
  CHECK(back.data.U == ex.data.U);
  CHECK(back.data.Xdot == ex.data.Xdot);
  CHECK(back.data.Bd == ex.data.Bd);
  CHECK(back.data.tau == ex.data.tau);
  CHECK(back.noise.Qd == nb.Qd);
  CHECK(back.noise.Rd == nb.Rd);
  CHECK(back.meta.seed == meta.seed);
  CHECK(back.meta.generator == "test");
}

TEST_CASE("dataset schema errors name the field") {
  const ExperimentData ex = example_data(0.02, 1);
  const Json good = dataset_to_json(ex.data, NoiseBound::from_pointwise(0.02, 100, 2), {});

  Json missing = good;
  missing.erase("Xdot");
  try {
    dataset_from_json(missing);
    FAIL("accepted a dataset without Xdot");
  } catch (const SchemaError& e) {
    CHECK(e.path() == "Xdot");
  }

  Json wrong_n = good;
  wrong_n["N"] = 99;
  CHECK_THROWS_AS(dataset_from_json(wrong_n), SchemaError);

  Json ragged = good;
  ragged["X"][0].erase(0);
  CHECK_THROWS_AS(dataset_from_json(ragged), SchemaError);

  CHECK_THROWS_AS(read_json_file(scratch("none") / "missing.json"), std::exception);
}

TEST_CASE("consistency set JSON round trip") {
  const ConsistencySet set = example_set(0.02, 1);
  const ConsistencySet back = consistency_set_from_json(consistency_set_to_json(set));
  CHECK(back.Pc == set.Pc);
  CHECK(back.n == set.n);
  CHECK(back.m == set.m);
  CHECK(back.pc_inertia == set.pc_inertia);
}

TEST_CASE("experiment configuration") {
  const ExperimentConfig defaults;
  CHECK_NOTHROW(defaults.validate());
  CHECK(defaults.sampling_times().size() == 100);
  CHECK(defaults.sampling_times().back() == doctest::Approx(49 * 1.5 + 50 * 3.0));

  const ExperimentConfig back = ExperimentConfig::from_json(defaults.to_json());
  CHECK(back.hash() == defaults.hash());
  CHECK(back.to_json() == defaults.to_json());

  ExperimentConfig changed = defaults;
  changed.seeds = {7};
  CHECK(changed.hash() != defaults.hash());

  Json unknown = defaults.to_json();
  unknown["unexpected"] = 1;
  CHECK_THROWS_AS(ExperimentConfig::from_json(unknown), SchemaError);

  ExperimentConfig gaps = defaults;
  gaps.gaps = {{10, 1.0}};
  CHECK_THROWS_AS(gaps.validate(), std::invalid_argument);

  ExperimentConfig no_data = defaults;
  no_data.mode = Mode::BuildSet;
  CHECK_THROWS_AS(no_data.validate(), std::invalid_argument);

  CHECK(parse_mode("reproduce-example") == Mode::ReproduceExample);
  CHECK_THROWS_AS(parse_mode("nope"), std::invalid_argument);
}

TEST_CASE("example dataset generation is seeded") {
  const ExperimentConfig cfg;
  const DatasetFile a = generate_example_dataset(cfg, 0.02, 4);
  const DatasetFile b = generate_example_dataset(cfg, 0.02, 4);
  const DatasetFile c = generate_example_dataset(cfg, 0.02, 5);
  CHECK(a.data.Xdot == b.data.Xdot);
  CHECK(a.data.Xdot != c.data.Xdot);
  CHECK(a.meta.seed == std::optional<std::uint64_t>(4));
}

TEST_CASE("reproduce-example: small sweep, determinism and verification") {
  const fs::path one = scratch("sweep1");
  const fs::path two = scratch("sweep2");
  const ResultTable t1 = run_reproduce_example(small_sweep(one, 1));
  const ResultTable t2 = run_reproduce_example(small_sweep(two, 2));
  CHECK(t1.all_ok());
  CHECK(t1.rows.size() == 5);  // model row plus 2 levels x 2 seeds

  const std::string csv1 = slurp(one / "table1_analysis.csv");
  CHECK(!csv1.empty());
  CHECK(without_runtime(csv1) == without_runtime(slurp(two / "table1_analysis.csv")));
  CHECK(fs::exists(one / "summary.csv"));
  CHECK(fs::exists(one / "results.json"));
  const std::string svg = slurp(one / "table1_analysis.svg");
  CHECK(svg.rfind("<svg", 0) == 0);
  CHECK(svg.find("</svg>") != std::string::npos);

  // Larger noise, smaller bound.
  const auto low = t1.median("analysis", 0.01);
  const auto high = t1.median("analysis", 0.05);
  REQUIRE(low);
  REQUIRE(high);
  CHECK(*high < *low);

  int verified = 0;
  for (const auto& row : t1.rows) {
    REQUIRE(row.certificate);
    const Json cert = read_json_file(*row.certificate);
    CHECK(cert.at("config_hash") == t1.config_hash);
    if (row.table != "model") CHECK(cert.at("seed") == row.seed);
    const VerifyReport r = verify_certificate(cert);
    CHECK(r.pass());
    CHECK(r.witness_ok);
    CHECK(r.h == doctest::Approx(*row.h));
    verified += r.pass() ? 1 : 0;
  }
  CHECK(verified == 5);

  // A tampered bound no longer verifies.
  Json tampered = read_json_file(*t1.rows.front().certificate);
  tampered["h"] = 3.0;
  CHECK(!verify_certificate(tampered).pass());
}

TEST_CASE("design certificates carry an analysis witness that verifies") {
  const fs::path out = scratch("design");
  ExperimentConfig cfg;
  cfg.noise_levels = {0.05};
  cfg.seeds = {2};
  cfg.tables = {"design"};
  cfg.output = out;
  const ResultTable t = run_reproduce_example(cfg);
  REQUIRE(t.all_ok());
  const ResultRow& row = t.rows.back();
  REQUIRE(row.certificate);
  const Json cert = read_json_file(*row.certificate);
  CHECK(cert.contains("analysis_certificate"));
  const VerifyReport r = verify_certificate(cert);
  CHECK(r.pass());
  CHECK(r.witness_ok);
  REQUIRE(r.design_witness_strict);
  CHECK(*r.design_witness_strict);
  CHECK(*row.h >= 2.0);
}
