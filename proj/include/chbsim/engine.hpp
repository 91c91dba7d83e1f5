#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "chbsim/data.hpp"
#include "chbsim/models.hpp"
#include "chbsim/trace.hpp"
#include "chbsim/types.hpp"

namespace chbsim {

enum class Algorithm { HB, CHB, GD, LAG };

std::string_view to_string(Algorithm alg);
Algorithm parse_algorithm(std::string_view name);
/// CHB and LAG censor uploads; HB and GD always transmit.
bool censors(Algorithm alg);
/// HB and CHB carry momentum; GD and LAG run with beta = 0.
bool uses_momentum(Algorithm alg);

struct HyperParams {
  double alpha = 0.0;  ///< step size
  double beta = 0.0;   ///< momentum
  double eps1 = 0.0;   ///< censoring threshold
  double eta1 = 0.0;   ///< Lyapunov weight
  double rho1 = 1.0;
  double rho2 = 1.0;
  double rho3 = 1.0;
  double lambda = 0.0;
  double mu = 0.0;  ///< 0 = unknown
  double L = 0.0;

  /// alpha > 0, beta >= 0, eps1 >= 0, eta1 >= 0, everything finite.
  void validate() const;
};

using WorkerId = int;

struct WorkerState {
  WorkerId id = 0;
  Vector cached_grad;  ///< last transmitted local gradient
  long transmissions = 0;
  double smoothness = 0.0;
};

struct ServerState {
  Vector theta_curr;
  Vector theta_prev;
  Vector agg_grad;
  long k = 0;
};

/// |innovation|^2 <= eps1 |theta_curr - theta_prev|^2 (skip on equality).
bool should_skip(const Vector& innovation, const Vector& theta_curr, const Vector& theta_prev,
                 double eps1);

struct WorkerRound {
  bool transmit = false;
  std::optional<Vector> innovation;
  WorkerState state;
  Vector local_gradient;  ///< grad f_m(theta_curr), whether sent or not
};

/// One worker's step of the protocol. `eps1 == nullopt` disables censoring
/// (the worker always sends its innovation, as HB and GD require).
WorkerRound worker_round(const WorkerState& ws, const LossModel& model, const Shard& shard,
                         const Vector& theta_curr, const Vector& theta_prev,
                         std::optional<double> eps1);

using Innovation = std::pair<WorkerId, Vector>;

/// agg_prev + sum of innovations, added in list order. The list must be
/// sorted by strictly ascending id; duplicates raise ProtocolError.
Vector server_aggregate(const Vector& agg_prev, const std::vector<Innovation>& innovations);

/// theta_curr - alpha grad + beta (theta_curr - theta_prev); GD and LAG use beta = 0.
/// Non-finite output raises DivergenceError tagged with k.
Vector server_update(Algorithm alg, const Vector& theta_curr, const Vector& theta_prev,
                     const Vector& grad, double alpha, double beta, long k = 0);

/// Optimal value used for objective gaps.
struct FStar {
  double value = 0.0;
  /// Known minimizer; for least squares the gap is then evaluated as
  /// 1/2 sum_m |X_m (theta - theta*)|^2, which avoids cancellation in f - f*.
  std::optional<Vector> minimizer;
  std::string method = "none";
  bool approximate = false;
  /// Gap against the running minimum of the observed objective instead of `value`.
  bool best_seen = false;
};

struct RunOptions {
  StoppingRule stop;
  FStar f_star;
  std::optional<Vector> initial;  ///< theta^1; default initial_parameters(model, d, seed)
  std::uint64_t seed = 0;
  double divergence_limit = 1e12;
  /// Called with (k, theta^k) before each record is appended.
  std::function<void(long, const Vector&)> observer;
};

/// Bulk-synchronous run of Algorithm `alg`:
///   for k = 1, 2, ...: every worker (ascending id) runs worker_round at
///   theta^k; transmitted innovations update the aggregate; the server steps.
/// All four algorithms share this pipeline, so CHB with eps1 = 0 reproduces HB
/// and CHB with beta = 0 reproduces LAG bit for bit. Caches start at zero and
/// theta^0 = theta^1. Divergence (non-finite, or |theta| / f above the limit)
/// ends the run with `diverged` set instead of throwing.
Trace run_experiment(Algorithm alg, const HyperParams& params, const LossModel& model,
                     const FederatedDataset& fed, const RunOptions& options);

/// f(theta) = sum_m f_m(theta), summed in worker order.
double global_objective(const LossModel& model, const FederatedDataset& fed, const Vector& theta);
Vector global_gradient(const LossModel& model, const FederatedDataset& fed, const Vector& theta);

}  // namespace chbsim
