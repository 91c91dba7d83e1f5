// Acceptance checks: one PASS/FAIL line per criterion, nonzero exit on any failure.
//
//   acceptance [--cli <path to chbsim>]
//
// Without --cli the determinism check drives run_command in process.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "../oracle.hpp"
#include "chbsim/config.hpp"
#include "chbsim/engine.hpp"
#include "chbsim/errors.hpp"
#include "chbsim/models.hpp"
#include "chbsim/plot.hpp"
#include "chbsim/rng.hpp"
#include "chbsim/runner.hpp"
#include "chbsim/theory.hpp"

using namespace chbsim;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string cli_path;
int failures = 0;

void criterion(int id, const char* name, double limit_s, const std::function<Outcome()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome out;
  try {
    out = body();
  } catch (const std::exception& e) {
    out = {false, std::string("exception: ") + e.what()};
  }
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const bool in_time = secs < limit_s;
  const bool ok = out.pass && in_time;
  if (!ok) ++failures;
  std::printf("%s %2d %-28s %6.2fs/%3.0fs  %s%s\n", ok ? "PASS" : "FAIL", id, name, secs, limit_s,
              out.detail.c_str(), in_time ? "" : " [over time limit]");
  std::fflush(stdout);
}

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

FederatedDataset increasing_linear() {
  return synth_controlled(9, 50, 50, SmoothnessTargets::increasing(9, 1.3), SynthTask::Linear, 0.0, 1);
}

RunOptions fixed_iterations(long k) {
  RunOptions o;
  o.stop = {StopMode::MaxIterations, 0.0, k};
  return o;
}

struct Recorded {
  Trace trace;
  std::vector<Vector> thetas;
};

Recorded run_recording(Algorithm alg, const HyperParams& p, const LossModel& model,
                       const FederatedDataset& fed, RunOptions o) {
  Recorded r;
  o.observer = [&r](long, const Vector& theta) { r.thetas.push_back(theta); };
  r.trace = run_experiment(alg, p, model, fed, o);
  return r;
}

Outcome identical(const Recorded& a, const Recorded& b, long k) {
  if (static_cast<long>(a.thetas.size()) != k || static_cast<long>(b.thetas.size()) != k) {
    return {false, "runs did not reach 200 iterations"};
  }
  for (long i = 0; i < k; ++i) {
    const Vector& x = a.thetas[static_cast<std::size_t>(i)];
    const Vector& y = b.thetas[static_cast<std::size_t>(i)];
    for (Eigen::Index j = 0; j < x.size(); ++j) {
      if (!(x[j] == y[j])) return {false, "theta differs at k=" + std::to_string(i + 1)};
    }
  }
  return {true, "200 iterates elementwise equal"};
}

HyperParams paper_settings(double L, int M) {
  HyperParams p;
  p.L = L;
  p.alpha = 1.0 / L;
  p.beta = 0.4;
  p.eps1 = 0.1 / (p.alpha * p.alpha * M * M);
  return p;
}

// -- 1, 2 -------------------------------------------------------------------

Outcome reduction_hb() {
  const auto fed = increasing_linear();
  const auto model = LossModel::linear();
  auto p = paper_settings(estimate_smoothness(model, fed).sum_local(), 9);
  const auto hb = run_recording(Algorithm::HB, p, model, fed, fixed_iterations(200));
  p.eps1 = 0.0;
  const auto chb = run_recording(Algorithm::CHB, p, model, fed, fixed_iterations(200));
  return identical(chb, hb, 200);
}

Outcome reduction_lag() {
  const auto fed = increasing_linear();
  const auto model = LossModel::linear();
  auto p = paper_settings(estimate_smoothness(model, fed).sum_local(), 9);
  const auto lag = run_recording(Algorithm::LAG, p, model, fed, fixed_iterations(200));
  p.beta = 0.0;
  const auto chb = run_recording(Algorithm::CHB, p, model, fed, fixed_iterations(200));
  Outcome o = identical(chb, lag, 200);
  if (o.pass) {
    for (std::size_t i = 0; i < 200; ++i) {
      if (chb.trace.records()[i].transmit_flags != lag.trace.records()[i].transmit_flags) {
        return {false, "transmit flags differ at k=" + std::to_string(i + 1)};
      }
    }
    o.detail += ", flags equal, LAG comms " + std::to_string(lag.trace.back().comms_cumulative);
  }
  return o;
}

// -- 3 ----------------------------------------------------------------------

Outcome gradient_checks() {
  SeededRng rng(31337);
  const int d = 6;
  const MlpShape shape{d, 8, 3};
  struct Case {
    LossModel model;
    int classes;
    bool binary;
  };
  const std::vector<Case> cases{{LossModel::linear(), 0, false},
                                {LossModel::logistic(0.01), 0, true},
                                {LossModel::lasso(0.2), 0, false},
                                {LossModel::mlp(shape, 0.01), 3, false}};
  double worst = 0.0;
  for (const auto& c : cases) {
    for (int trial = 0; trial < 10; ++trial) {
      Shard s;
      s.features.resize(12, d);
      s.labels.resize(12);
      for (Eigen::Index i = 0; i < s.features.size(); ++i) s.features.data()[i] = rng.normal();
      for (Eigen::Index i = 0; i < 12; ++i) {
        s.labels[i] = c.classes ? static_cast<double>(rng.below(static_cast<std::uint64_t>(c.classes)))
                                : (c.binary ? rng.sign() : rng.normal());
      }
      const auto n = static_cast<Eigen::Index>(c.model.parameter_count(d));
      Vector theta(n);
      for (Eigen::Index i = 0; i < n; ++i) {
        theta[i] = rng.normal() * 0.8;
        // keep lasso points away from the kinks
        if (c.model.kind() == ModelKind::Lasso && std::abs(theta[i]) < 0.05) theta[i] = 0.3;
      }
      const Vector g = eval_gradient(c.model, theta, s);
      Vector fd(n);
      for (Eigen::Index i = 0; i < n; ++i) {
        const double h = 1e-6 * (1.0 + std::abs(theta[i]));
        Vector tp = theta, tm = theta;
        tp[i] += h;
        tm[i] -= h;
        fd[i] = (eval_loss(c.model, tp, s) - eval_loss(c.model, tm, s)) / (tp[i] - tm[i]);
      }
      worst = std::max(worst, (g - fd).norm() / std::max(fd.norm(), 1e-300));
    }
  }
  return {worst <= 1e-5, "40 points, worst relative error " + fmt("%.2e", worst)};
}

// -- 4, 5 -------------------------------------------------------------------

struct RecipeRun {
  HyperParams p;
  double mu = 0.0;
  Trace trace;
};

const RecipeRun& recipe_run() {
  static const RecipeRun run = [] {
    RecipeRun r;
    // Full-rank Gram with condition number near 80: over 500 iterations the
    // gap falls by about six decades and stays far above the float64 floor.
    const auto fed = synth_low_rank(9, 50, 50, 50, 0.5, 1);
    const auto model = LossModel::linear();
    const double L = global_smoothness(model, fed);
    r.mu = strong_convexity(model, fed);
    r.p = rate_recipe(L, r.mu, 0.5, 9);
    RunOptions o = fixed_iterations(500);
    o.f_star = f_star_oracle(model, fed);
    r.trace = run_experiment(Algorithm::CHB, r.p, model, fed, o);
    return r;
  }();
  return run;
}

Outcome lyapunov_descent() {
  const auto& r = recipe_run();
  if (r.trace.size() != 500 || r.trace.diverged) return {false, "run did not complete 500 iterations"};
  if (!condition_report(r.p, 9).feasible) return {false, "recipe parameters infeasible"};
  const auto report = descent_audit(r.trace, r.p, 1e-9);
  std::string d = std::to_string(report.checked) + " steps, " +
                  std::to_string(report.violations.size()) + " violations, comms " +
                  std::to_string(r.trace.back().comms_cumulative);
  if (!report.passed()) d += ", first at k=" + std::to_string(report.violations.front().k);
  return {report.passed(), d};
}

Outcome linear_rate() {
  const auto& r = recipe_run();
  const double c = rate_constant(r.p, r.mu, 9);
  const double expected = (1.0 - 0.5) / (r.p.L / r.mu);
  if (std::abs(c - expected) > 1e-12 * expected) {
    return {false, "c=" + fmt("%.17g", c) + " differs from (1-delta)mu/L=" + fmt("%.17g", expected)};
  }
  const auto report = rate_audit(r.trace, c, 1e-9);
  return {report.passed(), "c=" + fmt("%.6g", c) + ", worst ratio " + fmt("%.6g", report.worst_ratio) +
                               " <= " + fmt("%.6g", 1.0 - c) + " over " + std::to_string(report.checked) +
                               " steps"};
}

// -- 6 ----------------------------------------------------------------------

Outcome communication_bound() {
  const auto fed = increasing_linear();
  const auto model = LossModel::linear();
  const auto est = estimate_smoothness(model, fed);
  double max_sq = 0.0;
  for (double l : est.per_worker) max_sq = std::max(max_sq, l * l);
  auto p = paper_settings(est.sum_local(), 9);
  // power iteration approaches l_max from below; the margin keeps L_m^2 <= eps1 for the true L_m
  p.eps1 = max_sq * 1.01;
  const Trace t = run_experiment(Algorithm::CHB, p, model, fed, fixed_iterations(200));
  const auto report = communication_audit(t, est.per_worker, p.eps1, 200);
  long worst = 0;
  for (const auto& e : report.workers) {
    if (!e.applies) return {false, "worker " + std::to_string(e.worker) + " outside the hypothesis"};
    worst = std::max(worst, e.transmissions);
  }
  return {report.passed(), "max S_m = " + std::to_string(worst) + " <= 100 at k=200"};
}

// -- 7, 8 -------------------------------------------------------------------

struct Comparison {
  std::vector<AlgorithmResult> results;
  const Trace& of(Algorithm a) const {
    for (const auto& r : results)
      if (r.algorithm == a) return r.trace;
    throw Error("missing algorithm");
  }
};

Comparison compare(const std::string& cfg_text) {
  const ExperimentConfig cfg = parse_config(cfg_text);
  const PreparedExperiment prep = prepare_experiment(cfg);
  Comparison c;
  RunOptions o;
  o.stop = cfg.stop;
  o.f_star = prep.f_star;
  o.initial = prep.initial;
  o.seed = cfg.seed;
  for (Algorithm a : cfg.algorithms) {
    AlgorithmResult r;
    r.algorithm = a;
    r.trace = run_experiment(a, prep.params, prep.model, prep.data, o);
    c.results.push_back(std::move(r));
  }
  return c;
}

std::string counts(const Comparison& c) {
  std::string s;
  for (const auto& r : c.results) {
    if (!s.empty()) s += ", ";
    s += std::string(to_string(r.algorithm)) + " " + std::to_string(r.trace.back().comms_cumulative) +
         "/" + std::to_string(r.trace.back().k);
  }
  return s;
}

bool reached(const Trace& t, double target) { return !t.diverged && t.back().f_gap <= target; }

const char* kIncreasing = R"(
task = linear
data = synthetic-controlled
workers = 9
dim = 50
samples_per_worker = 50
smoothness_profile = increasing
smoothness_value = 1.3
algorithms = CHB, HB, LAG, GD
alpha = 1/L
beta = 0.4
eps1 = 0.1/(alpha^2*M^2)
stop = target-gap
stop_target = 1e-7
max_iterations = 100000
seed = 1
)";

const char* kCommon = R"(
task = logistic
lambda = 0.001
data = synthetic-controlled
workers = 9
dim = 50
samples_per_worker = 50
smoothness_profile = common
smoothness_value = 4
algorithms = CHB, HB, LAG
alpha = 1/L
beta = 0.4
eps1 = 0.1/(alpha^2*M^2)
stop = target-gap
stop_target = 1e-5
max_iterations = 100000
seed = 1
)";

Outcome increasing_ordering() {
  const Comparison c = compare(kIncreasing);
  const Trace& chb = c.of(Algorithm::CHB);
  const Trace& hb = c.of(Algorithm::HB);
  const Trace& lag = c.of(Algorithm::LAG);
  for (const auto& r : c.results)
    if (!reached(r.trace, 1e-7)) return {false, std::string(to_string(r.algorithm)) + " missed the target"};
  const bool a = chb.back().comms_cumulative < hb.back().comms_cumulative;
  const bool b = chb.back().comms_cumulative < lag.back().comms_cumulative;
  const bool cc = static_cast<double>(chb.back().k) <= 1.25 * static_cast<double>(hb.back().k);
  if (chb.size() < 24) return {false, "CHB stopped before 24 iterations"};
  const auto s = chb.transmissions_from_flags(24);
  const bool d = s.front() <= s.back();
  std::string detail = counts(c) + "; first 24 iters: worker1 " + std::to_string(s.front()) +
                       ", worker9 " + std::to_string(s.back());
  if (!a) detail += " [comms CHB >= HB]";
  if (!b) detail += " [comms CHB >= LAG]";
  if (!cc) detail += " [iters CHB > 1.25 HB]";
  if (!d) detail += " [worker1 > worker9]";
  return {a && b && cc && d, detail};
}

Outcome common_ordering() {
  const Comparison c = compare(kCommon);
  for (const auto& r : c.results)
    if (!reached(r.trace, 1e-5)) return {false, std::string(to_string(r.algorithm)) + " missed the target"};
  const long chb = c.of(Algorithm::CHB).back().comms_cumulative;
  const bool ok = chb < c.of(Algorithm::HB).back().comms_cumulative &&
                  chb < c.of(Algorithm::LAG).back().comms_cumulative;
  return {ok, counts(c)};
}

// -- 9 ----------------------------------------------------------------------

Outcome nonconvex() {
  const int M = 9;
  const auto fed = synth_clusters(M, 20, 200, 2, 0.5, 1);
  const auto model = LossModel::mlp(MlpShape{20, 30, 2}, 1.0 / 200.0);
  HyperParams p;
  p.alpha = 0.02;
  p.beta = 0.4;
  p.eps1 = 0.01;
  p.lambda = 1.0 / 200.0;
  RunOptions o = fixed_iterations(500);
  o.f_star = f_star_oracle(model, fed);
  o.seed = 1;
  const Trace chb = run_experiment(Algorithm::CHB, p, model, fed, o);
  const Trace hb = run_experiment(Algorithm::HB, p, model, fed, o);
  if (chb.size() != 500 || chb.diverged) return {false, "CHB did not complete 500 iterations"};
  double best = std::numeric_limits<double>::infinity();
  double prev_best = best;
  bool monotone = true;
  for (const auto& r : chb.records()) {
    best = std::min(best, r.grad_norm_sq);
    monotone = monotone && best <= prev_best;
    prev_best = best;
  }
  const double initial = chb.records().front().grad_norm_sq;
  const bool drop = best * 10.0 <= initial;
  const long comms = chb.back().comms_cumulative;
  const bool fewer = comms < hb.back().comms_cumulative && hb.back().comms_cumulative == 500L * M;
  std::string d = "min |grad|^2 " + fmt("%.3g", initial) + " -> " + fmt("%.3g", best) + ", comms CHB " +
                  std::to_string(comms) + " vs HB " + std::to_string(hb.back().comms_cumulative);
  return {monotone && drop && fewer, d};
}

// -- 10 ---------------------------------------------------------------------

Outcome convex_trend() {
  const int M = 9;
  const auto fed = synth_low_rank(M, 50, 25, 20, 1.0, 1);
  const auto model = LossModel::linear();
  if (strong_convexity(model, fed) != 0.0) return {false, "Gram is not rank-deficient"};
  const double L = global_smoothness(model, fed);
  HyperParams p;
  p.L = L;
  p.alpha = 0.5 / L;
  p.beta = 0.3;
  p.eta1 = (1.0 - p.alpha * L) / (2.0 * p.alpha);
  p.eps1 = 0.5 * simplified_eps1_bound(p, M);
  const long K = 2000;
  RunOptions o = fixed_iterations(K);
  o.f_star = f_star_oracle(model, fed);
  const Trace t = run_experiment(Algorithm::CHB, p, model, fed, o);
  if (static_cast<long>(t.size()) != K) return {false, "run ended early"};
  std::vector<double> scaled;
  for (long k = K / 2; k <= K; ++k) {
    const auto& r = t.records()[static_cast<std::size_t>(k - 1)];
    scaled.push_back(static_cast<double>(k) * r.f_gap);
  }
  const double last = scaled.back();
  std::vector<double> sorted = scaled;
  std::nth_element(sorted.begin(), sorted.begin() + static_cast<long>(sorted.size() / 2), sorted.end());
  const double median = sorted[sorted.size() / 2];
  return {last <= 1.1 * median, "k*gap last " + fmt("%.4g", last) + ", median " + fmt("%.4g", median) +
                                    ", comms " + std::to_string(t.back().comms_cumulative)};
}

// -- 11 ---------------------------------------------------------------------

Outcome theory_crosscheck() {
  SeededRng rng(20240611);
  auto log_uniform = [&rng](double lo, double hi) {
    return std::exp(rng.uniform(std::log(lo), std::log(hi)));
  };
  int mismatches = 0;
  for (int i = 0; i < 1000; ++i) {
    HyperParams p;
    p.L = log_uniform(0.1, 100.0);
    p.alpha = log_uniform(1e-3, 2.0) / p.L;
    p.eta1 = rng.uniform(0.0, 5.0) / p.alpha;
    p.beta = rng.uniform(0.0, 0.99);
    p.eps1 = log_uniform(1e-6, 10.0);
    p.rho1 = log_uniform(0.1, 10.0);
    p.rho2 = log_uniform(0.1, 10.0);
    p.rho3 = log_uniform(0.1, 10.0);
    const int mc = static_cast<int>(rng.below(21));
    const auto c = condition_constants(p, mc);
    const auto ref = testing::hp_constants(p.alpha, p.beta, p.eps1, p.eta1, p.L, p.rho1, p.rho2,
                                           p.rho3, mc);
    if (!testing::hp_close(c.sigma0, ref.sigma0, 1e-12) || !testing::hp_close(c.sigma1, ref.sigma1, 1e-12) ||
        !testing::hp_close(c.gamma, ref.gamma, 1e-12)) {
      ++mismatches;
    }
  }
  int infeasible = 0;
  for (int i = 0; i < 1000; ++i) {
    const double L = log_uniform(0.01, 1e4);
    const double mu = L / log_uniform(1.0, 1e4);
    const double delta = rng.uniform(0.01, 0.99);
    const int M = 1 + static_cast<int>(rng.below(50));
    const auto p = rate_recipe(L, mu, delta, M);
    const auto cc = condition_constants(p, M);
    if (!condition_report(p, M).feasible || !check_simplified(p, M) || !(cc.sigma0 > 0.0) ||
        !(cc.sigma1 >= 0.0)) {
      ++infeasible;
    }
  }
  return {mismatches == 0 && infeasible == 0,
          std::to_string(mismatches) + "/1000 tuples outside 1e-12, " + std::to_string(infeasible) +
              "/1000 recipes infeasible"};
}

// -- 12 ---------------------------------------------------------------------

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome formats() {
  SeededRng rng(77);
  std::vector<Sample> samples;
  for (int i = 0; i < 300; ++i) {
    Vector x(22);
    for (Eigen::Index j = 0; j < 22; ++j) x[j] = rng.uniform() < 0.5 ? 0.0 : rng.normal() * std::pow(10.0, rng.uniform(-8, 8));
    samples.push_back({x, rng.sign()});
  }
  std::stringstream svm;
  write_libsvm(svm, samples);
  const auto back = parse_libsvm(svm, 22);
  if (back.samples.size() != samples.size()) return {false, "libsvm sample count changed"};
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (back.samples[i].label != samples[i].label || back.samples[i].features != samples[i].features) {
      return {false, "libsvm sample " + std::to_string(i) + " changed"};
    }
  }

  const auto fed = increasing_linear();
  const auto p = paper_settings(estimate_smoothness(LossModel::linear(), fed).sum_local(), 9);
  RunOptions o = fixed_iterations(100);
  o.f_star = f_star_oracle(LossModel::linear(), fed);
  const Trace t = run_experiment(Algorithm::CHB, p, LossModel::linear(), fed, o);
  std::ostringstream first;
  write_csv(t, first);
  std::istringstream in(first.str());
  const Trace parsed = read_csv(in);
  for (std::size_t i = 0; i < t.size(); ++i) {
    const auto& a = t.records()[i];
    const auto& b = parsed.records()[i];
    if (a.objective != b.objective || a.f_gap != b.f_gap || a.grad_norm_sq != b.grad_norm_sq ||
        a.agg_grad_norm_sq != b.agg_grad_norm_sq || a.lyapunov != b.lyapunov ||
        a.comms_cumulative != b.comms_cumulative || a.transmit_flags != b.transmit_flags) {
      return {false, "csv record " + std::to_string(i + 1) + " changed"};
    }
  }
  std::ostringstream second;
  write_csv(parsed, second);
  if (second.str() != first.str()) return {false, "csv rewrite differs"};

  const fs::path dir = fs::temp_directory_path() / "chbsim-acceptance-run";
  fs::remove_all(dir);
  fs::create_directories(dir);
  {
    std::ofstream cfg(dir / "exp.cfg");
    cfg << kIncreasing << "output = out\n";
  }
  auto invoke = [&]() -> int {
    if (!cli_path.empty()) {
      const std::string cmd = "\"" + cli_path + "\" run \"" + (dir / "exp.cfg").string() + "\" > \"" +
                              (dir / "stdout.txt").string() + "\" 2>&1";
      return std::system(cmd.c_str());
    }
    std::ostringstream out, err;
    return run_command(dir / "exp.cfg", out, err);
  };
  std::vector<std::string> names{"CHB.csv", "HB.csv", "LAG.csv", "GD.csv", "summary.txt"};
  if (invoke() != 0) return {false, "first run failed"};
  std::vector<std::string> bytes;
  for (const auto& n : names) bytes.push_back(slurp(dir / "out" / n));
  std::vector<fs::path> csvs;
  for (int i = 0; i < 4; ++i) csvs.push_back(dir / "out" / names[static_cast<std::size_t>(i)]);
  plot_csv_files(csvs, dir / "a.svg");
  if (invoke() != 0) return {false, "second run failed"};
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (bytes[i].empty()) return {false, names[i] + " is empty"};
    if (slurp(dir / "out" / names[i]) != bytes[i]) return {false, names[i] + " differs between runs"};
  }
  plot_csv_files(csvs, dir / "b.svg");
  if (slurp(dir / "a.svg") != slurp(dir / "b.svg")) return {false, "svg differs between runs"};
  fs::remove_all(dir);
  return {true, "libsvm and csv lossless; two runs byte-identical (" +
                    std::string(cli_path.empty() ? "in process" : "cli") + ")"};
}

}  // namespace

int main(int argc, char** argv) {
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--cli" && i + 1 < argc) {
      cli_path = argv[++i];
    } else {
      std::fprintf(stderr, "usage: acceptance [--cli <chbsim>]\n");
      return 2;
    }
  }
  criterion(1, "reduction CHB(eps1=0) = HB", 5, reduction_hb);
  criterion(2, "reduction CHB(beta=0) = LAG", 5, reduction_lag);
  criterion(3, "gradient finite differences", 10, gradient_checks);
  criterion(4, "Lyapunov descent", 10, lyapunov_descent);
  criterion(5, "linear rate", 10, linear_rate);
  criterion(6, "communication bound", 5, communication_bound);
  criterion(7, "increasing smoothness", 30, increasing_ordering);
  criterion(8, "common smoothness", 60, common_ordering);
  criterion(9, "nonconvex MLP", 60, nonconvex);
  criterion(10, "convex O(1/k) trend", 30, convex_trend);
  criterion(11, "theory cross-check", 5, theory_crosscheck);
  criterion(12, "formats and determinism", 5, formats);
  std::printf("%d of 12 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
