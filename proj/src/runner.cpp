#include "chbsim/runner.hpp"

#include <cstdio>
#include <fstream>
#include <future>
#include <ostream>
#include <sstream>

#include "chbsim/errors.hpp"
#include "chbsim/theory.hpp"

namespace chbsim {

namespace {

LossModel make_model(const ExperimentConfig& c) {
  switch (c.task) {
    case ModelKind::LinearRegression: return LossModel::linear();
    case ModelKind::RidgeLogistic: return LossModel::logistic(c.lambda);
    case ModelKind::Lasso: return LossModel::lasso(c.lambda);
    case ModelKind::Mlp: return LossModel::mlp(MlpShape{c.dim, c.hidden, c.classes}, c.lambda);
  }
  throw UnsupportedModelError("unknown task");
}

std::string join_reals(const std::vector<double>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ' ';
    out += format_real(v[i]);
  }
  return out;
}

}  // namespace

FederatedDataset build_dataset(const ExperimentConfig& c) {
  switch (c.data) {
    case DataSource::SyntheticControlled: {
      const auto targets = c.smoothness_profile == "common"
                               ? SmoothnessTargets::common(c.workers, c.smoothness_value)
                               : SmoothnessTargets::increasing(c.workers, c.smoothness_value);
      const SynthTask task = c.task == ModelKind::RidgeLogistic ? SynthTask::Logistic : SynthTask::Linear;
      return synth_controlled(c.workers, c.dim, c.samples_per_worker, targets, task, c.lambda, c.seed);
    }
    case DataSource::SyntheticLowRank:
      return synth_low_rank(c.workers, c.dim, c.rank, c.samples_per_worker, c.spectrum_decay, c.seed);
    case DataSource::SyntheticClusters:
      return synth_clusters(c.workers, c.dim, c.total_samples, c.classes, c.separation, c.seed);
    case DataSource::Libsvm: {
      LibsvmData raw = load_libsvm(c.libsvm_path.string());
      FederatedDataset fed =
          partition(raw.samples, raw.d, c.workers, PartitionPolicy::ContiguousEven,
                    c.shuffle ? std::optional<std::uint64_t>(c.seed) : std::nullopt);
      fed.provenance.insert(fed.provenance.begin(), {"source", c.libsvm_path.filename().string()});
      return fed;
    }
  }
  throw DataError("unknown data source");
}

PreparedExperiment prepare_experiment(const ExperimentConfig& c) {
  PreparedExperiment p;
  p.model = make_model(c);
  p.data = build_dataset(c);
  const int M = p.data.workers();
  if (p.model.kind() == ModelKind::Mlp) {
    p.model = LossModel::mlp(MlpShape{p.data.d, c.hidden, c.classes}, c.lambda);
  } else {
    p.smoothness = estimate_smoothness(p.model, p.data);
    p.L = c.L_source == SmoothnessSource::SumLocal ? p.smoothness.sum_local() : p.smoothness.global;
    p.mu = strong_convexity(p.model, p.data);
  }

  HyperParams& h = p.params;
  try {
    h.alpha = c.alpha.resolve(p.L, 0.0, M);
    h.eps1 = c.eps1.resolve(p.L, h.alpha, M);
  } catch (const ValidationError& e) {
    throw ConfigError(e.what(), 0);
  }
  h.beta = c.beta;
  h.lambda = c.lambda;
  h.rho1 = c.rho1;
  h.rho2 = c.rho2;
  h.rho3 = c.rho3;
  h.L = p.L;
  h.mu = p.mu;
  if (c.eta1) {
    h.eta1 = *c.eta1;
  } else if (p.L > 0.0) {
    h.eta1 = std::max(0.0, (1.0 - h.alpha * p.L) / (2.0 * h.alpha));
  }
  try {
    h.validate();
  } catch (const ValidationError& e) {
    throw ConfigError(e.what(), 0);
  }

  if (c.f_star == "best-seen" || p.model.kind() == ModelKind::Mlp) {
    p.f_star.best_seen = true;
    p.f_star.method = "best-seen";
    p.f_star.approximate = true;
  } else {
    FStarOptions opts;
    opts.budget = c.f_star_budget;
    if (c.f_star == "normal-equations") opts.method = FStarMethod::NormalEquations;
    if (c.f_star == "long-hb") opts.method = FStarMethod::LongHeavyBall;
    p.f_star = f_star_oracle(p.model, p.data, opts);
  }
  p.initial = initial_parameters(p.model, p.data.d, c.seed);

  p.metadata.emplace_back("task", std::string(to_string(c.task)));
  p.metadata.emplace_back("data", std::string(to_string(c.data)));
  p.metadata.emplace_back("alpha_expr", c.alpha.text);
  p.metadata.emplace_back("eps1_expr", c.eps1.text);
  if (p.model.kind() != ModelKind::Mlp) {
    p.metadata.emplace_back("L_source", c.L_source == SmoothnessSource::SumLocal ? "sum-local" : "pooled");
    p.metadata.emplace_back("L_pooled", format_real(p.smoothness.global));
    p.metadata.emplace_back("L_sum_local", format_real(p.smoothness.sum_local()));
    p.metadata.emplace_back("L_m", join_reals(p.smoothness.per_worker));
  }
  return p;
}

RunSummary run_experiments(const ExperimentConfig& c, const PreparedExperiment& p) {
  RunOptions opts;
  opts.stop = c.stop;
  opts.f_star = p.f_star;
  opts.initial = p.initial;
  opts.seed = c.seed;

  std::vector<std::future<Trace>> jobs;
  for (Algorithm a : c.algorithms) {
    jobs.push_back(std::async(std::launch::async, [a, &p, opts] {
      return run_experiment(a, p.params, p.model, p.data, opts);
    }));
  }
  RunSummary summary;
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    AlgorithmResult r;
    r.algorithm = c.algorithms[i];
    r.trace = jobs[i].get();
    summary.any_diverged = summary.any_diverged || r.trace.diverged;
    summary.results.push_back(std::move(r));
  }

  std::filesystem::create_directories(c.output);
  for (auto& r : summary.results) {
    r.csv_path = c.output / (std::string(to_string(r.algorithm)) + ".csv");
    std::ofstream out(r.csv_path, std::ios::binary);
    if (!out) throw Error("cannot write " + r.csv_path.string());
    if (!r.trace.empty()) write_csv(r.trace, p.metadata, out);
  }
  std::ofstream s(c.output / "summary.txt", std::ios::binary);
  if (!s) throw Error("cannot write summary.txt");
  write_summary(s, c, summary);
  return summary;
}

void write_summary(std::ostream& out, const ExperimentConfig& c, const RunSummary& summary) {
  const bool with_ref = !c.reference.empty();
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-6s %10s %10s %24s %24s %9s", "alg", "comms", "iters",
                "final_objective", "final_grad_norm_sq", "diverged");
  out << buf;
  if (with_ref) out << "  ref_comms ref_iters";
  out << '\n';
  for (const auto& r : summary.results) {
    const std::string name(to_string(r.algorithm));
    long comms = 0, iters = 0;
    std::string obj = "nan", grad = "nan";
    if (!r.trace.empty()) {
      comms = r.trace.back().comms_cumulative;
      iters = r.trace.back().k;
      obj = format_real(r.trace.back().objective);
      grad = format_real(r.trace.back().grad_norm_sq);
    }
    std::snprintf(buf, sizeof buf, "%-6s %10ld %10ld %24s %24s %9s", name.c_str(), comms, iters,
                  obj.c_str(), grad.c_str(), r.trace.diverged ? "yes" : "no");
    out << buf;
    if (with_ref) {
      std::string rc = "-", ri = "-";
      for (const auto& row : c.reference) {
        if (row.algorithm == name) {
          rc = row.comms;
          ri = row.iterations;
        }
      }
      std::snprintf(buf, sizeof buf, "  %9s %9s", rc.c_str(), ri.c_str());
      out << buf;
    }
    out << '\n';
  }
  if (with_ref) out << "reference columns are published values, shown for comparison only\n";
}

namespace {

void write_condition_note(std::ostream& out, const PreparedExperiment& p) {
  if (p.model.kind() == ModelKind::Mlp || !(p.params.L > 0.0)) return;
  const ConditionReport r = condition_report(p.params, p.data.workers());
  out << "conditions (informational): sigma0=" << format_real(r.sigma0)
      << " sigma1_worst=" << format_real(r.sigma1_worst) << " gamma=" << format_real(r.gamma)
      << " feasible=" << (r.feasible ? "true" : "false") << '\n';
}

}  // namespace

int run_command(const std::filesystem::path& config_path, std::ostream& out, std::ostream& err) {
  ExperimentConfig cfg;
  PreparedExperiment prepared;
  try {
    cfg = load_config(config_path);
  } catch (const DataError& e) {
    err << "error: " << e.what() << '\n';
    return kExitData;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  }
  try {
    prepared = prepare_experiment(cfg);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const UnsupportedModelError& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const Error& e) {
    err << "data error: " << e.what() << '\n';
    return kExitData;
  }
  RunSummary summary;
  try {
    summary = run_experiments(cfg, prepared);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitData;
  }
  write_summary(out, cfg, summary);
  write_condition_note(out, prepared);
  for (const auto& r : summary.results) {
    if (r.trace.diverged) {
      err << to_string(r.algorithm) << " diverged at k=" << (r.trace.empty() ? 0 : r.trace.back().k)
          << '\n';
    }
  }
  return summary.any_diverged ? kExitDivergence : kExitOk;
}

std::vector<std::filesystem::path> generate_data(const ExperimentConfig& c) {
  const FederatedDataset fed = build_dataset(c);
  std::filesystem::create_directories(c.output);
  std::vector<std::filesystem::path> paths;
  for (int m = 0; m < fed.workers(); ++m) {
    char name[32];
    std::snprintf(name, sizeof name, "worker%03d.libsvm", m + 1);
    const auto path = c.output / name;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    write_libsvm(out, fed.shards[static_cast<std::size_t>(m)].to_samples());
    paths.push_back(path);
  }
  return paths;
}

}  // namespace chbsim
