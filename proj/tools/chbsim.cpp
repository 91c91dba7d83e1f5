// chbsim command-line front end: run, plot, inspect, gen-data.

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "chbsim/config.hpp"
#include "chbsim/errors.hpp"
#include "chbsim/plot.hpp"
#include "chbsim/runner.hpp"
#include "chbsim/theory.hpp"

using namespace chbsim;

namespace {

std::string show(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

std::map<std::string, std::string> parse_pairs(const std::vector<std::string>& items) {
  std::map<std::string, std::string> out;
  for (const auto& item : items) {
    const auto eq = item.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("expected key=value, got '" + item + "'", 0);
    out[item.substr(0, eq)] = item.substr(eq + 1);
  }
  return out;
}

double take_real(std::map<std::string, std::string>& kv, const std::string& key,
                 std::optional<double> fallback = std::nullopt) {
  auto it = kv.find(key);
  if (it == kv.end()) {
    if (fallback) return *fallback;
    throw ConfigError("missing " + key, 0);
  }
  const SymbolicValue v = [&] {
    try {
      return SymbolicValue::parse(it->second);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(key + ": " + e.what(), 0);
    }
  }();
  kv.erase(it);
  if (v.kind != SymbolicValue::Kind::Literal) throw ConfigError(key + " must be a number", 0);
  return v.coeff;
}

void print_report(const HyperParams& p, int M) {
  const ConditionReport r = condition_report(p, M);
  std::cout << "alpha=" << show(p.alpha) << " beta=" << show(p.beta) << " eps1=" << show(p.eps1)
            << " eta1=" << show(p.eta1) << " L=" << show(p.L) << " mu=" << show(p.mu)
            << " M=" << M << '\n';
  std::cout << "sigma0=" << show(r.sigma0) << '\n'
            << "sigma1_worst=" << show(r.sigma1_worst) << '\n'
            << "gamma=" << show(r.gamma) << '\n'
            << "feasible=" << (r.feasible ? "true" : "false") << '\n';
  for (const auto& b : r.binding) std::cout << "violated: " << b << '\n';
  const bool simple = check_simplified(p, M);
  std::cout << "simplified_condition=" << (simple ? "true" : "false")
            << " (eps1 bound " << show(simplified_eps1_bound(p, M)) << ")\n";
  if (p.mu > 0.0) {
    try {
      std::cout << "c=" << show(rate_constant(p, p.mu, M)) << '\n';
    } catch (const RateUndefinedError& e) {
      std::cout << "c=undefined (" << e.what() << ")\n";
    }
  } else {
    std::cout << "c=undefined (mu not given)\n";
  }
  if (!r.feasible || !simple) {
    std::cout << "note: these settings exceed the sufficient conditions for guaranteed descent; "
                 "runs still proceed and the report is informational\n";
  }
  for (const auto& f : parameter_families(p, M)) {
    std::cout << "family " << f.name << ": eta1=" << show(f.eta1) << " alpha in ["
              << show(f.alpha_lo) << ", " << show(f.alpha_hi) << "] beta_max=" << show(f.beta_max)
              << " eps1_max(beta)=" << show(f.eps1_max) << '\n';
  }
}

int inspect(const std::vector<std::string>& recipe, const std::vector<std::string>& params) {
  if (recipe.empty() == params.empty()) {
    std::cerr << "inspect: give exactly one of --recipe or --params\n";
    return kExitConfig;
  }
  try {
    if (!recipe.empty()) {
      auto kv = parse_pairs(recipe);
      const double L = take_real(kv, "L");
      const double mu = take_real(kv, "mu");
      const double delta = take_real(kv, "delta");
      const int M = static_cast<int>(take_real(kv, "M"));
      if (!kv.empty()) throw ConfigError("unknown recipe key '" + kv.begin()->first + "'", 0);
      print_report(rate_recipe(L, mu, delta, M), M);
      return kExitOk;
    }
    auto kv = parse_pairs(params);
    HyperParams p;
    p.L = take_real(kv, "L");
    const int M = static_cast<int>(take_real(kv, "M"));
    if (M < 1) throw ConfigError("M must be >= 1", 0);
    auto sym = [&](const std::string& key, const char* fallback) {
      auto it = kv.find(key);
      const std::string text = it == kv.end() ? fallback : it->second;
      if (it != kv.end()) kv.erase(it);
      try {
        return SymbolicValue::parse(text);
      } catch (const std::invalid_argument& e) {
        throw ConfigError(key + ": " + e.what(), 0);
      }
    };
    p.alpha = sym("alpha", "1/L").resolve(p.L, 0.0, M);
    p.eps1 = sym("eps1", "0").resolve(p.L, p.alpha, M);
    p.beta = take_real(kv, "beta", 0.0);
    p.mu = take_real(kv, "mu", 0.0);
    p.rho1 = take_real(kv, "rho1", 1.0);
    p.rho2 = take_real(kv, "rho2", 1.0);
    p.rho3 = take_real(kv, "rho3", 1.0);
    p.eta1 = take_real(kv, "eta1", std::max(0.0, (1.0 - p.alpha * p.L) / (2.0 * p.alpha)));
    if (!kv.empty()) throw ConfigError("unknown parameter '" + kv.begin()->first + "'", 0);
    p.validate();
    print_report(p, M);
    return kExitOk;
  } catch (const Error& e) {
    std::cerr << "inspect: " << e.what() << '\n';
    return kExitConfig;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Censored heavy-ball federated optimization simulator"};
  app.require_subcommand(1);

  std::string run_config;
  auto* run = app.add_subcommand("run", "Run the algorithms listed in a config");
  run->add_option("config", run_config, "Experiment config")->required();

  std::vector<std::string> csvs;
  std::string svg;
  auto* plot = app.add_subcommand("plot", "Render trace CSVs to an SVG");
  plot->add_option("csv", csvs, "Trace CSV files")->required();
  plot->add_option("-o,--output", svg, "Output SVG")->required();

  std::vector<std::string> recipe, params;
  auto* insp = app.add_subcommand("inspect", "Evaluate descent conditions and rate constant");
  insp->add_option("--recipe", recipe, "L=.. mu=.. delta=.. M=..");
  insp->add_option("--params", params, "alpha=.. beta=.. eps1=.. L=.. M=.. [mu eta1 rho1 rho2 rho3]");

  std::string gen_config;
  auto* gen = app.add_subcommand("gen-data", "Write the configured dataset as LIBSVM files");
  gen->add_option("config", gen_config, "Experiment config")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  if (*run) return run_command(run_config, std::cout, std::cerr);

  if (*plot) {
    try {
      std::vector<std::filesystem::path> paths(csvs.begin(), csvs.end());
      plot_csv_files(paths, svg);
      return kExitOk;
    } catch (const Error& e) {
      std::cerr << "plot: " << e.what() << '\n';
      return kExitData;
    }
  }

  if (*insp) return inspect(recipe, params);

  try {
    const ExperimentConfig cfg = load_config(gen_config);
    for (const auto& p : generate_data(cfg)) std::cout << p.string() << '\n';
    return kExitOk;
  } catch (const ConfigError& e) {
    std::cerr << "gen-data: " << e.what() << '\n';
    return kExitConfig;
  } catch (const Error& e) {
    std::cerr << "gen-data: " << e.what() << '\n';
    return kExitData;
  }
}
