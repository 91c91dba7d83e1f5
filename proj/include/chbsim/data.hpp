#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "chbsim/types.hpp"

namespace chbsim {

/// Ordered key/value pairs describing how a dataset was produced.
using Provenance = std::vector<std::pair<std::string, std::string>>;

struct FederatedDataset {
  int d = 0;
  std::vector<Shard> shards;
  Provenance provenance;

  int workers() const { return static_cast<int>(shards.size()); }
  std::size_t total_samples() const;
  Shard pooled() const { return concatenate(shards); }
  /// Throws PreconditionError unless M >= 1 and every shard is nonempty with width d.
  void validate() const;
};

struct LibsvmData {
  std::vector<Sample> samples;
  int d = 0;
};

/// Dense samples from `<label> <index>:<value> ...` lines (1-based, strictly
/// increasing indices; LF or CRLF). Blank lines are skipped.
/// d = max(d_hint, largest index seen).
LibsvmData parse_libsvm(std::istream& in, std::optional<int> d_hint = std::nullopt);
LibsvmData load_libsvm(const std::string& path, std::optional<int> d_hint = std::nullopt);

/// Writes nonzero entries only, reals with 17 significant digits.
void write_libsvm(std::ostream& out, const std::vector<Sample>& samples);

enum class PartitionPolicy { ContiguousEven };

/// Splits in order: the first N mod M shards get ceil(N/M) samples, the rest floor(N/M).
/// A shuffle seed permutes the samples first (Fisher-Yates on SeededRng).
FederatedDataset partition(const std::vector<Sample>& samples, int d, int workers,
                           PartitionPolicy policy = PartitionPolicy::ContiguousEven,
                           std::optional<std::uint64_t> shuffle_seed = std::nullopt);

enum class SynthTask { Linear, Logistic };

/// Per-worker smoothness targets.
struct SmoothnessTargets {
  std::vector<double> values;

  /// L_m = (ratio^(m-1))^2, m = 1..M.
  static SmoothnessTargets increasing(int workers, double ratio);
  static SmoothnessTargets common(int workers, double value);
};

/// Rescaled Gaussian features with an exactly controlled Gram spectrum.
///
/// Worker m draws a d x d standard-normal matrix, takes Q_m from its QR
/// factorization and builds Lambda_m = diag(linspace(-s_m, s_m, d)). With
/// n_per_worker == d the feature matrix is Q_m Lambda_m Q_m'; for larger n
/// a second n x d draw supplies orthonormal columns U_m and X = U_m Lambda_m Q_m'.
/// Either way X'X = Q_m Lambda_m^2 Q_m', so l_max = s_m^2. The scale is
/// s_m = sqrt(L_m) (linear) or 2 sqrt(L_m - lambda) (logistic, 0.25 bound).
/// Labels are uniform on {-1, +1}. Worker m consumes substream m of the seed.
FederatedDataset synth_controlled(int workers, int d, int n_per_worker,
                                  const SmoothnessTargets& targets, SynthTask task,
                                  double lambda, std::uint64_t seed);

/// Least-squares data whose pooled Gram has rank `rank` < d: every feature
/// vector lies in a common random rank-dimensional subspace, with coordinate i
/// scaled by i^(-decay). Labels uniform on {-1, +1}.
FederatedDataset synth_low_rank(int workers, int d, int rank, int n_per_worker, double decay,
                                std::uint64_t seed);

/// Gaussian class clusters for classifier training: class centers drawn as
/// separation * N(0, I), samples center + N(0, I), labels 0..classes-1,
/// split contiguously across workers.
FederatedDataset synth_clusters(int workers, int d, int total_samples, int classes,
                                double separation, std::uint64_t seed);

}  // namespace chbsim
