#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace chbsim {

using Metadata = std::vector<std::pair<std::string, std::string>>;

struct IterationTrace {
  long k = 0;
  double objective = 0.0;       ///< f(theta^k)
  double f_gap = 0.0;           ///< f(theta^k) - f*
  double grad_norm_sq = 0.0;    ///< |grad f(theta^k)|^2, exact gradient
  double agg_grad_norm_sq = 0.0;///< |aggregate used by the server|^2
  double lyapunov = 0.0;        ///< f_gap + eta1 |theta^k - theta^{k-1}|^2
  int comms_this_iter = 0;
  long comms_cumulative = 0;
  std::vector<bool> transmit_flags;
  std::int64_t wallclock_ns = 0;
  /// |theta^k - theta^{k-1}|^2; kept in memory for audits, not written to CSV.
  double step_norm_sq = 0.0;
};

enum class StopMode { TargetGap, MaxIterations, GradThreshold };

std::string_view to_string(StopMode mode);
StopMode parse_stop_mode(std::string_view name);

struct StoppingRule {
  StopMode mode = StopMode::MaxIterations;
  double target = 0.0;
  long max_k = 1000;
};

/// True when the rule's criterion is met or the max_k backstop is reached.
bool should_stop(const StoppingRule& rule, const IterationTrace& rec);

class Trace {
 public:
  /// rec.k must be one past the last record (1 for an empty trace) and
  /// comms_this_iter must equal the number of set flags. comms_cumulative is
  /// recomputed as the running sum.
  void append(IterationTrace rec);

  const std::vector<IterationTrace>& records() const { return records_; }
  bool empty() const { return records_.empty(); }
  std::size_t size() const { return records_.size(); }
  const IterationTrace& back() const { return records_.back(); }

  Metadata& metadata() { return metadata_; }
  const Metadata& metadata() const { return metadata_; }
  void set_meta(const std::string& key, const std::string& value);
  /// Empty string when absent.
  std::string meta(std::string_view key) const;

  bool diverged = false;
  /// S_m per worker as counted by the engine.
  std::vector<long> worker_transmissions;
  /// Largest relative gap seen between the recursive aggregate and a from-scratch
  /// sum of the worker caches.
  double max_aggregate_drift = 0.0;

  /// S_m recomputed from the transmit flags of the first k records (all when k < 0).
  std::vector<long> transmissions_from_flags(long k = -1) const;

 private:
  std::vector<IterationTrace> records_;
  Metadata metadata_;
};

inline constexpr std::string_view kCsvHeader =
    "k,objective,f_gap,grad_norm_sq,agg_grad_norm_sq,lyapunov,comms_iter,comms_cum,flags";

/// 17-significant-digit decimal form of a double (round-trips exactly).
std::string format_real(double x);

/// `# key=value` metadata lines, the header row, then one row per record.
void write_csv(const Trace& trace, std::ostream& out);
void write_csv(const Trace& trace, const Metadata& extra, std::ostream& out);

/// Inverse of write_csv. Throws ParseError on schema violations.
Trace read_csv(std::istream& in);

}  // namespace chbsim
