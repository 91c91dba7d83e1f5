#include "chbsim/engine.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <string>

#include "chbsim/errors.hpp"
#include "chbsim/rng.hpp"

namespace chbsim {

std::string_view to_string(Algorithm alg) {
  switch (alg) {
    case Algorithm::HB: return "HB";
    case Algorithm::CHB: return "CHB";
    case Algorithm::GD: return "GD";
    case Algorithm::LAG: return "LAG";
  }
  return "?";
}

Algorithm parse_algorithm(std::string_view name) {
  if (name == "HB") return Algorithm::HB;
  if (name == "CHB") return Algorithm::CHB;
  if (name == "GD") return Algorithm::GD;
  if (name == "LAG" || name == "LAG-WK") return Algorithm::LAG;
  throw ValidationError("unknown algorithm '" + std::string(name) + "'");
}

bool censors(Algorithm alg) { return alg == Algorithm::CHB || alg == Algorithm::LAG; }
bool uses_momentum(Algorithm alg) { return alg == Algorithm::CHB || alg == Algorithm::HB; }

void HyperParams::validate() const {
  auto finite = [](double v) { return std::isfinite(v); };
  if (!(alpha > 0.0) || !finite(alpha)) throw ValidationError("alpha must be positive");
  if (!(beta >= 0.0) || !finite(beta)) throw ValidationError("beta must be >= 0");
  if (!(eps1 >= 0.0) || !finite(eps1)) throw ValidationError("eps1 must be >= 0");
  if (!(eta1 >= 0.0) || !finite(eta1)) throw ValidationError("eta1 must be >= 0");
  if (!(lambda >= 0.0) || !finite(lambda)) throw ValidationError("lambda must be >= 0");
  if (!(mu >= 0.0) || !finite(mu)) throw ValidationError("mu must be >= 0");
  if (!finite(rho1) || !finite(rho2) || !finite(rho3) || !finite(L)) {
    throw ValidationError("rho1..rho3 and L must be finite");
  }
}

namespace {

void require_same_length(const Vector& a, const Vector& b, const char* what) {
  if (a.size() != b.size()) {
    throw PreconditionError(std::string(what) + ": length " + std::to_string(a.size()) +
                            " vs " + std::to_string(b.size()));
  }
}

}  // namespace

bool should_skip(const Vector& innovation, const Vector& theta_curr, const Vector& theta_prev,
                 double eps1) {
  require_same_length(innovation, theta_curr, "should_skip");
  require_same_length(theta_curr, theta_prev, "should_skip");
  return innovation.squaredNorm() <= eps1 * (theta_curr - theta_prev).squaredNorm();
}

WorkerRound worker_round(const WorkerState& ws, const LossModel& model, const Shard& shard,
                         const Vector& theta_curr, const Vector& theta_prev,
                         std::optional<double> eps1) {
  WorkerRound out;
  out.state = ws;
  out.local_gradient = eval_gradient(model, theta_curr, shard);
  require_same_length(out.local_gradient, ws.cached_grad, "worker_round cache");
  Vector delta = out.local_gradient - ws.cached_grad;
  if (eps1 && should_skip(delta, theta_curr, theta_prev, *eps1)) return out;
  out.transmit = true;
  out.innovation = std::move(delta);
  out.state.cached_grad = out.local_gradient;
  ++out.state.transmissions;
  return out;
}

Vector server_aggregate(const Vector& agg_prev, const std::vector<Innovation>& innovations) {
  Vector agg = agg_prev;
  for (std::size_t i = 0; i < innovations.size(); ++i) {
    const auto& [id, delta] = innovations[i];
    if (i > 0) {
      const WorkerId prev = innovations[i - 1].first;
      if (id == prev) throw ProtocolError("duplicate innovation from worker " + std::to_string(id));
      if (id < prev) throw PreconditionError("innovations must be sorted by worker id");
    }
    require_same_length(agg, delta, "server_aggregate");
    agg += delta;
  }
  return agg;
}

Vector server_update(Algorithm alg, const Vector& theta_curr, const Vector& theta_prev,
                     const Vector& grad, double alpha, double beta, long k) {
  require_same_length(theta_curr, theta_prev, "server_update");
  require_same_length(theta_curr, grad, "server_update");
  const double b = uses_momentum(alg) ? beta : 0.0;
  Vector next = theta_curr - alpha * grad + b * (theta_curr - theta_prev);
  if (!next.allFinite()) throw DivergenceError(k, next.norm());
  return next;
}

double global_objective(const LossModel& model, const FederatedDataset& fed, const Vector& theta) {
  double f = 0.0;
  for (const auto& shard : fed.shards) f += eval_loss(model, theta, shard);
  return f;
}

Vector global_gradient(const LossModel& model, const FederatedDataset& fed, const Vector& theta) {
  Vector g = Vector::Zero(theta.size());
  for (const auto& shard : fed.shards) g += eval_gradient(model, theta, shard);
  return g;
}

Trace run_experiment(Algorithm alg, const HyperParams& params, const LossModel& model,
                     const FederatedDataset& fed, const RunOptions& options) {
  params.validate();
  fed.validate();
  const auto n_params = static_cast<Eigen::Index>(model.parameter_count(fed.d));
  const int workers = fed.workers();

  ServerState server;
  server.theta_curr = options.initial ? *options.initial : initial_parameters(model, fed.d, options.seed);
  if (server.theta_curr.size() != n_params) {
    throw PreconditionError("initial theta has length " + std::to_string(server.theta_curr.size()) +
                            ", model expects " + std::to_string(n_params));
  }
  server.theta_prev = server.theta_curr;
  server.agg_grad = Vector::Zero(n_params);

  std::vector<WorkerState> states(static_cast<std::size_t>(workers));
  for (int m = 0; m < workers; ++m) {
    states[static_cast<std::size_t>(m)].id = m + 1;
    states[static_cast<std::size_t>(m)].cached_grad = Vector::Zero(n_params);
  }

  const std::optional<double> eps1 = censors(alg) ? std::optional<double>(params.eps1) : std::nullopt;
  const double beta = uses_momentum(alg) ? params.beta : 0.0;
  const FStar& fs = options.f_star;
  const bool quadratic_gap =
      !fs.best_seen && fs.minimizer && model.kind() == ModelKind::LinearRegression &&
      fs.minimizer->size() == n_params;

  Trace trace;
  trace.set_meta("algorithm", std::string(to_string(alg)));
  trace.set_meta("model", std::string(to_string(model.kind())));
  trace.set_meta("workers", std::to_string(workers));
  trace.set_meta("d", std::to_string(fed.d));
  trace.set_meta("parameters", std::to_string(n_params));
  trace.set_meta("seed", std::to_string(options.seed));
  trace.set_meta("rng", std::string(SeededRng::kIdentity));
  trace.set_meta("alpha", format_real(params.alpha));
  trace.set_meta("beta", format_real(beta));
  trace.set_meta("eps1", eps1 ? format_real(*eps1) : "none");
  trace.set_meta("eta1", format_real(params.eta1));
  trace.set_meta("rho1", format_real(params.rho1));
  trace.set_meta("rho2", format_real(params.rho2));
  trace.set_meta("rho3", format_real(params.rho3));
  trace.set_meta("lambda", format_real(model.lambda()));
  trace.set_meta("mu", format_real(params.mu));
  trace.set_meta("L", format_real(params.L));
  trace.set_meta("f_star", fs.best_seen ? "best-seen" : format_real(fs.value));
  trace.set_meta("f_star_method", fs.method);
  trace.set_meta("f_star_approximate", fs.approximate ? "true" : "false");
  trace.set_meta("f_gap_reference",
                 fs.best_seen ? "best-seen" : (quadratic_gap ? "quadratic-form" : "f_star"));
  trace.set_meta("stop_mode", std::string(to_string(options.stop.mode)));
  trace.set_meta("stop_target", format_real(options.stop.target));
  trace.set_meta("max_k", std::to_string(options.stop.max_k));
  for (const auto& [k, v] : fed.provenance) trace.set_meta("data." + k, v);

  double best_seen = std::numeric_limits<double>::infinity();
  std::vector<Innovation> innovations;
  innovations.reserve(static_cast<std::size_t>(workers));

  for (long k = 1;; ++k) {
    server.k = k;
    const auto t0 = std::chrono::steady_clock::now();
    IterationTrace rec;
    rec.k = k;
    rec.transmit_flags.assign(static_cast<std::size_t>(workers), false);
    Vector exact_grad = Vector::Zero(n_params);
    double objective = 0.0;
    innovations.clear();
    try {
      for (int m = 0; m < workers; ++m) {
        const auto& shard = fed.shards[static_cast<std::size_t>(m)];
        auto& ws = states[static_cast<std::size_t>(m)];
        WorkerRound round =
            worker_round(ws, model, shard, server.theta_curr, server.theta_prev, eps1);
        exact_grad += round.local_gradient;
        objective += eval_loss(model, server.theta_curr, shard);
        if (round.transmit) {
          rec.transmit_flags[static_cast<std::size_t>(m)] = true;
          ++rec.comms_this_iter;
          innovations.emplace_back(ws.id, std::move(*round.innovation));
        }
        ws = std::move(round.state);
      }
    } catch (const NumericDomainError&) {
      trace.diverged = true;
      break;
    }
    server.agg_grad = server_aggregate(server.agg_grad, innovations);

    Vector from_scratch = Vector::Zero(n_params);
    for (const auto& ws : states) from_scratch += ws.cached_grad;
    const double scale = std::max(from_scratch.norm(), std::numeric_limits<double>::min());
    trace.max_aggregate_drift =
        std::max(trace.max_aggregate_drift, (server.agg_grad - from_scratch).norm() / scale);

    double gap = 0.0;
    if (fs.best_seen) {
      best_seen = std::min(best_seen, objective);
      gap = objective - best_seen;
    } else if (quadratic_gap) {
      const Vector e = server.theta_curr - *fs.minimizer;
      for (const auto& shard : fed.shards) gap += 0.5 * (shard.features * e).squaredNorm();
    } else {
      gap = objective - fs.value;
    }
    rec.objective = objective;
    rec.f_gap = gap;
    rec.grad_norm_sq = exact_grad.squaredNorm();
    rec.agg_grad_norm_sq = server.agg_grad.squaredNorm();
    rec.step_norm_sq = (server.theta_curr - server.theta_prev).squaredNorm();
    rec.lyapunov = gap + params.eta1 * rec.step_norm_sq;
    rec.wallclock_ns = std::chrono::duration_cast<std::chrono::nanoseconds>(
                           std::chrono::steady_clock::now() - t0)
                           .count();
    if (options.observer) options.observer(k, server.theta_curr);
    trace.append(std::move(rec));

    const double theta_norm = server.theta_curr.norm();
    if (!std::isfinite(objective) || !(theta_norm <= options.divergence_limit) ||
        !(objective <= options.divergence_limit)) {
      trace.diverged = true;
      break;
    }
    if (should_stop(options.stop, trace.back())) break;
    try {
      Vector next = server_update(alg, server.theta_curr, server.theta_prev, server.agg_grad,
                                  params.alpha, beta, k);
      server.theta_prev = std::move(server.theta_curr);
      server.theta_curr = std::move(next);
    } catch (const DivergenceError&) {
      trace.diverged = true;
      break;
    }
  }

  trace.worker_transmissions.clear();
  for (const auto& ws : states) trace.worker_transmissions.push_back(ws.transmissions);
  trace.set_meta("diverged", trace.diverged ? "true" : "false");
  return trace;
}

}  // namespace chbsim
