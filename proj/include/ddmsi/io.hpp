#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>

#include "json.hpp"

#include "ddmsi/data.hpp"
#include "ddmsi/data_consistency.hpp"
#include "ddmsi/lmi.hpp"
#include "ddmsi/msi_search.hpp"
#include "ddmsi/system_model.hpp"

namespace ddmsi {

using Json = nlohmann::json;

/// Malformed input file; `path()` names the offending field, e.g. "noise.Rd".
class SchemaError : public std::runtime_error {
 public:
  SchemaError(std::string path, const std::string& what);
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

// Matrices are stored row-major as arrays of rows.
Json matrix_to_json(const Matrix& M);
Matrix matrix_from_json(const Json& j, const std::string& path);
Json vector_to_json(const std::vector<double>& v);
std::vector<double> vector_from_json(const Json& j, const std::string& path);

/// Field lookup helpers that raise SchemaError with the full field path.
const Json& require_field(const Json& obj, const std::string& key, const std::string& parent);
double number_field(const Json& obj, const std::string& key, const std::string& parent);
int int_field(const Json& obj, const std::string& key, const std::string& parent);

struct DatasetMeta {
  std::optional<std::uint64_t> seed;
  std::string generator;
};

struct DatasetFile {
  DataSet data;
  NoiseBound noise;
  DatasetMeta meta;
};

Json dataset_to_json(const DataSet& data, const NoiseBound& noise, const DatasetMeta& meta);
DatasetFile dataset_from_json(const Json& j);
void save_dataset(const std::filesystem::path& path, const DataSet& data,
                  const NoiseBound& noise, const DatasetMeta& meta);
DatasetFile load_dataset(const std::filesystem::path& path);

Json consistency_set_to_json(const ConsistencySet& set);
ConsistencySet consistency_set_from_json(const Json& j);

Json trajectory_to_json(const Trajectory& traj);

/// Debug dump: variables and every constraint's coefficient matrices.
Json lmi_problem_to_json(const LmiProblem& problem);

Json bisection_to_json(const BisectionResult& result);
Json analysis_certificate_to_json(const AnalysisCertificate& cert);
Json design_certificate_to_json(const DesignCertificate& cert);
AnalysisCertificate analysis_certificate_from_json(const Json& j);
DesignCertificate design_certificate_from_json(const Json& j);
Json design_outcome_to_json(const DesignOutcome& outcome);

/// 64-bit FNV-1a of the compact dump, as 16 hex digits.
std::string config_hash(const Json& config);

Json read_json_file(const std::filesystem::path& path);
/// Writes `j` (indented) to `path`, creating parent directories.
void write_json_file(const std::filesystem::path& path, const Json& j);

}  // namespace ddmsi
