#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "chbsim/config.hpp"
#include "chbsim/data.hpp"
#include "chbsim/engine.hpp"
#include "chbsim/models.hpp"
#include "chbsim/trace.hpp"

namespace chbsim {

/// Everything resolved from a config before any algorithm runs.
struct PreparedExperiment {
  LossModel model = LossModel::linear();
  FederatedDataset data;
  SmoothnessEstimate smoothness;
  double L = 0.0;  ///< value substituted for the symbol L
  double mu = 0.0;
  HyperParams params;
  FStar f_star;
  Vector initial;
  Metadata metadata;
};

/// Builds the dataset, estimates smoothness, resolves symbolic parameters and
/// computes f*. Throws DataError for dataset failures, ConfigError for bad parameters.
PreparedExperiment prepare_experiment(const ExperimentConfig& config);

FederatedDataset build_dataset(const ExperimentConfig& config);

struct AlgorithmResult {
  Algorithm algorithm = Algorithm::CHB;
  Trace trace;
  std::filesystem::path csv_path;
};

struct RunSummary {
  std::vector<AlgorithmResult> results;
  bool any_diverged = false;
};

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 1;
inline constexpr int kExitData = 2;
inline constexpr int kExitDivergence = 3;

/// Runs every configured algorithm (concurrently, one engine each), writes
/// `<output>/<ALG>.csv` and `<output>/summary.txt`.
RunSummary run_experiments(const ExperimentConfig& config, const PreparedExperiment& prepared);

/// Per-algorithm communications, iterations, final objective and |grad|^2,
/// with reference columns when the config supplies them.
void write_summary(std::ostream& out, const ExperimentConfig& config, const RunSummary& summary);

/// The CLI `run` command: exit code per the kExit* constants.
int run_command(const std::filesystem::path& config_path, std::ostream& out, std::ostream& err);

/// Materializes the configured dataset as one LIBSVM file per worker under
/// config.output; returns the written paths.
std::vector<std::filesystem::path> generate_data(const ExperimentConfig& config);

}  // namespace chbsim
