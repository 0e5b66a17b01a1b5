#pragma once

// Reproducible experiment runner: configuration, experiments, persistence
// and the acceptance checks behind `verify`.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "haarweight/analysis.hpp"
#include "haarweight/reducing.hpp"
#include "haarweight/stopping.hpp"
#include "haarweight/weight.hpp"

namespace haarweight {

inline constexpr int kSchemaVersion = 1;
inline constexpr const char* kLibraryVersion = "1.0.0";

/// One suite weight: a generated family or a weight file.
struct SuiteEntry {
  std::string label;
  std::optional<WeightFamily> family;
  std::optional<std::filesystem::path> file;
};

struct ExperimentConfig {
  int schema_version = kSchemaVersion;
  std::string experiment_id = "desk";
  std::filesystem::path output_dir = "results";
  std::uint64_t seed = 20240601;
  /// Seed offset for the re-seeded stability run of the block energy.
  std::uint64_t reseed = 1;
  std::vector<double> p{2.0, 3.0};
  std::vector<std::string> experiments;
  std::size_t functions = 100;
  std::vector<Spectrum> spectra{Spectrum::Flat, Spectrum::Geometric, Spectrum::Spike};
  double target_decay = 0.5;
  /// Fixed thresholds replacing calibration.
  std::optional<Lambdas> lambdas;
  ReducingOptions reducing;

  std::vector<std::pair<int, int>> transform_cells;
  std::size_t transform_functions = 100;
  int transform_n = 2;

  std::size_t sandwich_directions = 1000;
  std::size_t block_functions = 10;

  std::vector<double> cross_alphas{0.3, 0.6};
  int cross_level = 10;
  std::size_t cross_functions = 50;

  std::vector<double> sweep_alphas;
  int sweep_level = 10;

  std::vector<double> sharpness_alphas;
  int sharpness_level = 10;
  std::vector<double> sharpness_rotating_alphas;
  int sharpness_rotating_level = 8;
  double sharpness_rotating_omega = 6.283185307179586;

  std::size_t apinf_functions = 50;

  std::vector<SuiteEntry> suite;

  /// Throws ConfigError listing every problem found.
  static ExperimentConfig from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
  static ExperimentConfig load(const std::filesystem::path& path);
  nlohmann::json to_json() const;
};

/// The desk-scale configuration used when a key is absent.
ExperimentConfig default_config();
const std::vector<std::string>& experiment_names();

/// A file produced by a run, path relative to the output directory.
struct OutputFile {
  std::string path;
  std::string text;
};

struct RunOptions {
  /// Empty selects the configured list, or every experiment.
  std::vector<std::string> experiments;
  bool dump_stopping = false;
  int workers = 1;
};

struct RunOutput {
  nlohmann::json report;
  std::vector<OutputFile> files;
};

RunOutput run_experiments(const ExperimentConfig& cfg, const RunOptions& opts);

/// Writes every file, report.json and manifest.json (with SHA-256 hashes).
void write_run(const RunOutput& run, const ExperimentConfig& cfg, const std::filesystem::path& out_dir);

/// Thresholds for every (suite weight, p): calibrated constants, characteristic, lambdas.
nlohmann::json calibration_report(const ExperimentConfig& cfg, int workers);

/// Builds or loads the suite weight called `label`.
MatrixWeight suite_weight(const ExperimentConfig& cfg, const std::string& label);

std::string sha256_hex(const std::string& data);

struct CriterionResult {
  int id = 0;
  std::string name;
  bool pass = false;
  std::string measured;
  std::string bound;
};

/// Criteria 1 to 12 from a full run report.
std::vector<CriterionResult> evaluate_criteria(const nlohmann::json& report);
/// Criterion 13: identical CSV bodies in two independent runs.
CriterionResult determinism_criterion(const RunOutput& first, const RunOutput& second);

/// One "[PASS|FAIL] id name | measured | bound" line per criterion.
void print_criteria(const std::vector<CriterionResult>& results, std::ostream& log);

/// Runs everything twice, writes the first run, prints the criteria table;
/// returns the number of failing criteria.
int verify(const ExperimentConfig& cfg, const std::filesystem::path& out_dir, int workers, std::ostream& log);

/// Worker count from HAARWEIGHT_WORKERS, 1 when unset or invalid.
int default_workers();

}  // namespace haarweight
