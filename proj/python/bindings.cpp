// Python access to data generation, the simulator, theory calculators and the
// config runner. Traces come back as dicts of NumPy arrays.
#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <fstream>
#include <sstream>

#include "chbsim/config.hpp"
#include "chbsim/errors.hpp"
#include "chbsim/runner.hpp"
#include "chbsim/theory.hpp"

namespace py = pybind11;
using namespace chbsim;

namespace {

py::dict trace_to_dict(const Trace& t) {
  const auto n = static_cast<py::ssize_t>(t.size());
  const int m = n > 0 ? static_cast<int>(t.back().transmit_flags.size()) : 0;
  py::array_t<long> k(n), comms(n), comms_cum(n);
  py::array_t<double> obj(n), gap(n), grad(n), agg(n), lyap(n);
  py::array_t<bool> flags({n, static_cast<py::ssize_t>(m)});
  auto kk = k.mutable_unchecked<1>();
  auto cc = comms.mutable_unchecked<1>();
  auto cu = comms_cum.mutable_unchecked<1>();
  auto oo = obj.mutable_unchecked<1>();
  auto gg = gap.mutable_unchecked<1>();
  auto gr = grad.mutable_unchecked<1>();
  auto ag = agg.mutable_unchecked<1>();
  auto ly = lyap.mutable_unchecked<1>();
  auto fl = flags.mutable_unchecked<2>();
  for (py::ssize_t i = 0; i < n; ++i) {
    const auto& r = t.records()[i];
    kk(i) = r.k;
    cc(i) = r.comms_this_iter;
    cu(i) = r.comms_cumulative;
    oo(i) = r.objective;
    gg(i) = r.f_gap;
    gr(i) = r.grad_norm_sq;
    ag(i) = r.agg_grad_norm_sq;
    ly(i) = r.lyapunov;
    for (int w = 0; w < m; ++w) fl(i, w) = r.transmit_flags[w];
  }
  py::dict meta;
  for (const auto& [key, value] : t.metadata()) meta[py::str(key)] = value;
  py::dict d;
  d["k"] = k;
  d["objective"] = obj;
  d["f_gap"] = gap;
  d["grad_norm_sq"] = grad;
  d["agg_grad_norm_sq"] = agg;
  d["lyapunov"] = lyap;
  d["comms_iter"] = comms;
  d["comms_cum"] = comms_cum;
  d["flags"] = flags;
  d["metadata"] = meta;
  d["diverged"] = t.diverged;
  d["worker_transmissions"] = t.worker_transmissions;
  return d;
}

FederatedDataset dataset_from_arrays(const std::vector<std::pair<Matrix, Vector>>& shards) {
  FederatedDataset fed;
  for (const auto& [x, y] : shards) fed.shards.emplace_back(x, y);
  fed.d = fed.shards.empty() ? 0 : fed.shards.front().dim();
  fed.provenance = {{"source", "python"}};
  fed.validate();
  return fed;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Censored heavy-ball federated optimization simulator";

  auto base = py::register_exception<Error>(m, "Error");
  py::register_exception<PreconditionError>(m, "PreconditionError", base.ptr());
  py::register_exception<ValidationError>(m, "ValidationError", base.ptr());
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
  py::register_exception<DataError>(m, "DataError", base.ptr());
  py::register_exception<ParseError>(m, "ParseError", base.ptr());
  py::register_exception<RateUndefinedError>(m, "RateUndefinedError", base.ptr());

  py::class_<HyperParams>(m, "HyperParams")
      .def(py::init([](double alpha, double beta, double eps1, double eta1, double L, double mu,
                       double lambda, double rho1, double rho2, double rho3) {
             HyperParams p;
             p.alpha = alpha;
             p.beta = beta;
             p.eps1 = eps1;
             p.eta1 = eta1;
             p.L = L;
             p.mu = mu;
             p.lambda = lambda;
             p.rho1 = rho1;
             p.rho2 = rho2;
             p.rho3 = rho3;
             return p;
           }),
           py::kw_only(), py::arg("alpha") = 0.0, py::arg("beta") = 0.0, py::arg("eps1") = 0.0,
           py::arg("eta1") = 0.0, py::arg("L") = 0.0, py::arg("mu") = 0.0,
           py::arg("lambda_") = 0.0, py::arg("rho1") = 1.0, py::arg("rho2") = 1.0,
           py::arg("rho3") = 1.0)
      .def_readwrite("alpha", &HyperParams::alpha)
      .def_readwrite("beta", &HyperParams::beta)
      .def_readwrite("eps1", &HyperParams::eps1)
      .def_readwrite("eta1", &HyperParams::eta1)
      .def_readwrite("rho1", &HyperParams::rho1)
      .def_readwrite("rho2", &HyperParams::rho2)
      .def_readwrite("rho3", &HyperParams::rho3)
      .def_readwrite("lambda_", &HyperParams::lambda)
      .def_readwrite("mu", &HyperParams::mu)
      .def_readwrite("L", &HyperParams::L)
      .def("validate", &HyperParams::validate)
      .def("__repr__", [](const HyperParams& p) {
        std::ostringstream s;
        s << "HyperParams(alpha=" << p.alpha << ", beta=" << p.beta << ", eps1=" << p.eps1
          << ", eta1=" << p.eta1 << ", L=" << p.L << ", mu=" << p.mu << ")";
        return s.str();
      });

  py::class_<LossModel>(m, "LossModel")
      .def_static("linear", &LossModel::linear)
      .def_static("logistic", &LossModel::logistic, py::arg("lambda_"))
      .def_static("lasso", &LossModel::lasso, py::arg("lambda_"))
      .def_static("mlp",
                  [](int input, int hidden, int classes, double lambda) {
                    return LossModel::mlp(MlpShape{input, hidden, classes}, lambda);
                  },
                  py::arg("input"), py::arg("hidden") = 30, py::arg("classes") = 2,
                  py::arg("lambda_") = 0.0)
      .def_property_readonly("kind", [](const LossModel& l) { return std::string(to_string(l.kind())); })
      .def_property_readonly("lambda_", &LossModel::lambda)
      .def("parameter_count", &LossModel::parameter_count, py::arg("d"));

  py::class_<FederatedDataset>(m, "FederatedDataset")
      .def(py::init(&dataset_from_arrays), py::arg("shards"),
           "Build from a list of (X, y) pairs, one per worker.")
      .def_readonly("d", &FederatedDataset::d)
      .def_property_readonly("workers", &FederatedDataset::workers)
      .def_property_readonly("total_samples", &FederatedDataset::total_samples)
      .def_property_readonly("shards",
                             [](const FederatedDataset& f) {
                               py::list out;
                               for (const auto& s : f.shards) out.append(py::make_tuple(s.features, s.labels));
                               return out;
                             })
      .def_readonly("provenance", &FederatedDataset::provenance);

  m.def("synth_controlled",
        [](int workers, int d, int n, std::vector<double> smoothness, const std::string& task,
           double lambda, std::uint64_t seed) {
          const auto kind = task == "linear" ? SynthTask::Linear
                            : task == "logistic"
                                ? SynthTask::Logistic
                                : throw py::value_error("task must be 'linear' or 'logistic'");
          return synth_controlled(workers, d, n, SmoothnessTargets{std::move(smoothness)}, kind, lambda,
                                  seed);
        },
        py::arg("workers"), py::arg("d"), py::arg("samples_per_worker"), py::arg("smoothness"),
        py::arg("task") = "linear", py::arg("lambda_") = 0.0, py::arg("seed") = 0);
  m.def("increasing_smoothness",
        [](int workers, double ratio) { return SmoothnessTargets::increasing(workers, ratio).values; },
        py::arg("workers"), py::arg("ratio") = 1.3);
  m.def("synth_low_rank", &synth_low_rank, py::arg("workers"), py::arg("d"), py::arg("rank"),
        py::arg("samples_per_worker"), py::arg("decay") = 0.5, py::arg("seed") = 0);
  m.def("synth_clusters", &synth_clusters, py::arg("workers"), py::arg("d"), py::arg("total_samples"),
        py::arg("classes"), py::arg("separation") = 1.0, py::arg("seed") = 0);
  m.def("load_libsvm",
        [](const std::string& path, int workers, std::optional<int> d) {
          auto data = load_libsvm(path, d);
          return partition(data.samples, data.d, workers);
        },
        py::arg("path"), py::arg("workers"), py::arg("d") = py::none());

  m.def("estimate_smoothness",
        [](const LossModel& model, const FederatedDataset& fed) {
          const auto s = estimate_smoothness(model, fed);
          py::dict d;
          d["per_worker"] = s.per_worker;
          d["pooled"] = s.global;
          d["sum_local"] = s.sum_local();
          return d;
        },
        py::arg("model"), py::arg("data"));
  m.def("strong_convexity", &strong_convexity, py::arg("model"), py::arg("data"));
  m.def("global_objective", &global_objective, py::arg("model"), py::arg("data"), py::arg("theta"));
  m.def("global_gradient", &global_gradient, py::arg("model"), py::arg("data"), py::arg("theta"));

  m.def("f_star",
        [](const LossModel& model, const FederatedDataset& fed, long budget) {
          FStarOptions opts;
          opts.budget = budget;
          const auto f = f_star_oracle(model, fed, opts);
          py::dict d;
          d["value"] = f.value;
          d["minimizer"] = f.minimizer ? py::cast(*f.minimizer) : py::none();
          d["method"] = f.method;
          d["approximate"] = f.approximate;
          d["best_seen"] = f.best_seen;
          return d;
        },
        py::arg("model"), py::arg("data"), py::arg("budget") = 1000000);

  m.def("run_experiment",
        [](const std::string& algorithm, const HyperParams& params, const LossModel& model,
           const FederatedDataset& fed, const std::string& stop, double target, long max_k,
           std::uint64_t seed, bool compute_f_star) {
          RunOptions opts;
          opts.stop.mode = parse_stop_mode(stop);
          opts.stop.target = target;
          opts.stop.max_k = max_k;
          opts.seed = seed;
          if (compute_f_star) {
            opts.f_star = f_star_oracle(model, fed);
          } else {
            opts.f_star.best_seen = true;
            opts.f_star.method = "best-seen";
          }
          Trace t;
          {
            py::gil_scoped_release release;
            t = run_experiment(parse_algorithm(algorithm), params, model, fed, opts);
          }
          return trace_to_dict(t);
        },
        py::arg("algorithm"), py::arg("params"), py::arg("model"), py::arg("data"),
        py::arg("stop") = "max-iterations", py::arg("target") = 0.0, py::arg("max_iterations") = 1000,
        py::arg("seed") = 0, py::arg("compute_f_star") = true);

  m.def("condition_report",
        [](const HyperParams& p, int workers) {
          const auto r = condition_report(p, workers);
          py::dict d;
          d["sigma0"] = r.sigma0;
          d["sigma1_worst"] = r.sigma1_worst;
          d["gamma"] = r.gamma;
          d["feasible"] = r.feasible;
          d["binding"] = r.binding;
          return d;
        },
        py::arg("params"), py::arg("workers"));
  m.def("condition_constants",
        [](const HyperParams& p, int censored) {
          const auto c = condition_constants(p, censored);
          return py::make_tuple(c.sigma0, c.sigma1, c.gamma);
        },
        py::arg("params"), py::arg("censored"), "(sigma0, sigma1, gamma) for Mc censored workers.");
  m.def("check_simplified", &check_simplified, py::arg("params"), py::arg("censored"));
  m.def("simplified_eps1_bound", &simplified_eps1_bound, py::arg("params"), py::arg("censored"));
  m.def("recipe", &rate_recipe, py::arg("L"), py::arg("mu"), py::arg("delta"), py::arg("workers"));
  m.def("rate_constant", &rate_constant, py::arg("params"), py::arg("mu"), py::arg("censored_max"));

  m.def("run_config",
        [](const std::filesystem::path& path) {
          std::ostringstream out, err;
          const int code = run_command(path, out, err);
          return py::make_tuple(code, out.str(), err.str());
        },
        py::arg("path"), "Run a config file as the CLI does; returns (exit_code, stdout, stderr).");
  m.def("read_csv",
        [](const std::filesystem::path& path) {
          std::ifstream in(path);
          if (!in) throw DataError("cannot open " + path.string());
          return trace_to_dict(read_csv(in));
        },
        py::arg("path"));
}
