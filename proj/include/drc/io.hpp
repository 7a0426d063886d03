#pragma once

// Configuration parsing and result serialization.
//
// Configs are JSON objects carrying "schema_version": 1; unknown keys are rejected and every
// error names the offending field path. Matrices are nested row arrays, a number (times I,
// where a square size is implied), the string "identity", or "@file.csv" resolved against
// the directory of the config file.

#include <drc/bench_example.hpp>
#include <drc/experiment.hpp>
#include <drc/sdp_synthesis.hpp>

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace drc::io {

using json = nlohmann::json;

inline constexpr int kSchemaVersion = 1;

/// Schema or value error in a configuration; `path` is the dotted field path.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& path, const std::string& what)
      : std::runtime_error(path.empty() ? what : path + ": " + what), path_(path) {}
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

/// printf %.17g: 17 significant digits, enough to round-trip any double.
std::string format_double(double v);

std::uint64_t fnv1a(const std::string& bytes);

json load_json_file(const std::filesystem::path& file);

/// Loads a config file, checks it is an object with the supported schema_version.
json load_config(const std::filesystem::path& file);

void check_keys(const json& obj, const std::vector<std::string>& allowed, const std::string& path);

Eigen::MatrixXd read_csv_matrix(const std::filesystem::path& file);
std::string matrix_csv(const Eigen::MatrixXd& a);

/// Nested rows or "@file.csv".
Eigen::MatrixXd parse_matrix(const json& j, const std::string& path, const std::filesystem::path& base);

/// Like parse_matrix, but also accepts "identity" and a number c meaning c I of the given size.
Eigen::MatrixXd parse_square(const json& j, const std::string& path, const std::filesystem::path& base,
                             Eigen::Index size);

/// Array of numbers, or a number broadcast to `size`.
Eigen::VectorXd parse_vector(const json& j, const std::string& path, Eigen::Index size);

/// Array of numbers or {"start", "stop", "count"}.
std::vector<double> parse_grid(const json& j, const std::string& path);

json matrix_to_json(const Eigen::MatrixXd& a);
json vector_to_json(const Eigen::VectorXd& v);

/// {"preset": "random_walk", "T"} or {"T", "A", "B"} with A, B one matrix or a list of T.
LtvSystem<double> parse_system(const json& j, const std::string& path, const std::filesystem::path& base);
json system_to_json(const LtvSystem<double>& sys);

/// {"Q", "R"}; missing entries default to identity.
CostSpec<double> parse_cost(const json* j, const std::string& path, const std::filesystem::path& base,
                            int state_dim, int input_dim);
json cost_to_json(const CostSpec<double>& cost);

SolverOpts parse_solver(const json* j, const std::string& path);
json solver_to_json(const SolverOpts& opts);

json gain_to_json(const Gain& K);
Gain gain_from_json(const json& j, const std::string& path);

// Command records.

struct SynthesizeConfig {
  Method method = Method::Mro;
  LtvSystem<double> system;
  CostSpec<double> cost;
  Ambiguity ambiguity;
  bool jittered = false;
  SolverOpts solver;
};

struct WorstCaseConfig {
  Eigen::MatrixXd C;
  Ambiguity ambiguity;
  bool jittered = false;
};

struct ExampleConfig {
  double c = 1.5;
  std::vector<double> rho;
};

struct EvaluateConfig {
  LtvSystem<double> system;
  CostSpec<double> cost;
  Gain K;
  Eigen::VectorXd mu;
  Eigen::MatrixXd Sigma;
};

SynthesizeConfig parse_synthesize_config(const json& root, const std::filesystem::path& base);
WorstCaseConfig parse_worst_case_config(const json& root, const std::filesystem::path& base);
ExampleConfig parse_example_config(const json& root, const std::filesystem::path& base);
EvaluateConfig parse_evaluate_config(const json& root, const std::filesystem::path& base);
ExperimentConfig parse_experiment_config(const json& root, const std::filesystem::path& base);

/// Canonical config record; parse_experiment_config(experiment_config_to_json(c)) reproduces c.
json experiment_config_to_json(const ExperimentConfig& cfg);

// Results.

json synthesis_to_json(const SynthesisResult& res, double radius);
SynthesisResult synthesis_from_json(const json& j);

json worst_case_to_json(const DualResult<double>& res, const PushforwardMap<double>& map,
                        const WorstCaseMoments<double>& moments, const Ambiguity& amb);

std::string figure1_json(const std::vector<example::Figure1Row>& rows);

json experiment_to_json(const ExperimentConfig& cfg, const ExperimentResult& res,
                        const std::vector<SummaryRow>& summary);

/// CSV with header radius,method,mean,q20,q80.
std::string summary_csv(const std::vector<SummaryRow>& rows);

}  // namespace drc::io
