#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "chbsim/engine.hpp"
#include "chbsim/models.hpp"
#include "chbsim/theory.hpp"
#include "chbsim/trace.hpp"

namespace chbsim {

/// A real that may depend on quantities known only after smoothness
/// estimation. Grammar: a literal, `1/L`, `c/L`, or `c/(alpha^2*M^2)`.
struct SymbolicValue {
  enum class Kind { Literal, OverL, OverAlphaSqMSq };
  Kind kind = Kind::Literal;
  double coeff = 0.0;
  std::string text;

  static SymbolicValue literal(double v);
  /// Throws std::invalid_argument on anything outside the grammar.
  static SymbolicValue parse(std::string_view text);
  /// alpha is only consulted for OverAlphaSqMSq.
  double resolve(double L, double alpha, int workers) const;
};

enum class DataSource { SyntheticControlled, SyntheticLowRank, SyntheticClusters, Libsvm };

std::string_view to_string(DataSource source);

/// Which smoothness constant the symbol `L` stands for.
enum class SmoothnessSource { SumLocal, Pooled };

struct ReferenceRow {
  std::string algorithm;
  std::string comms;
  std::string iterations;
};

struct ExperimentConfig {
  ModelKind task = ModelKind::LinearRegression;
  DataSource data = DataSource::SyntheticControlled;
  std::filesystem::path libsvm_path;
  bool shuffle = false;

  int workers = 9;
  int dim = 50;
  int samples_per_worker = 50;
  /// "increasing" (L_m = (ratio^(m-1))^2) or "common" (L_m = value)
  std::string smoothness_profile = "increasing";
  double smoothness_value = 1.3;
  int rank = 25;
  double spectrum_decay = 1.0;
  int total_samples = 200;
  int classes = 2;
  double separation = 1.0;
  int hidden = 30;

  std::vector<Algorithm> algorithms{Algorithm::CHB, Algorithm::HB, Algorithm::LAG, Algorithm::GD};
  SymbolicValue alpha = SymbolicValue{SymbolicValue::Kind::OverL, 1.0, "1/L"};
  double beta = 0.4;
  SymbolicValue eps1 = SymbolicValue{SymbolicValue::Kind::OverAlphaSqMSq, 0.1, "0.1/(alpha^2*M^2)"};
  std::optional<double> eta1;  ///< default (1 - alpha L)/(2 alpha) clamped at 0
  double lambda = 0.0;
  double rho1 = 1.0, rho2 = 1.0, rho3 = 1.0;
  SmoothnessSource L_source = SmoothnessSource::SumLocal;

  StoppingRule stop{StopMode::TargetGap, 1e-7, 100000};
  std::string f_star = "auto";  ///< auto | normal-equations | long-hb | best-seen
  long f_star_budget = 1000000;

  std::uint64_t seed = 1;
  std::filesystem::path output = "out";
  std::vector<ReferenceRow> reference;
};

/// Line-oriented `key = value`, `#` starts a comment. Relative paths resolve
/// against base_dir. Errors carry the offending line number.
ExperimentConfig parse_config(std::string_view text,
                              const std::filesystem::path& base_dir = ".");
ExperimentConfig load_config(const std::filesystem::path& path);

}  // namespace chbsim
