#include "chbsim/config.hpp"

#include <algorithm>
#include <cctype>
#include <cerrno>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "chbsim/errors.hpp"

namespace chbsim {

namespace {

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

std::string strip_spaces(std::string_view s) {
  std::string out;
  for (char c : s) {
    if (!std::isspace(static_cast<unsigned char>(c))) out.push_back(c);
  }
  return out;
}

bool parse_double(const std::string& s, double& out) {
  if (s.empty()) return false;
  errno = 0;
  char* end = nullptr;
  out = std::strtod(s.c_str(), &end);
  return end == s.c_str() + s.size() && errno != ERANGE && std::isfinite(out);
}

}  // namespace

SymbolicValue SymbolicValue::literal(double v) {
  SymbolicValue s;
  s.kind = Kind::Literal;
  s.coeff = v;
  s.text = format_real(v);
  return s;
}

SymbolicValue SymbolicValue::parse(std::string_view text) {
  const std::string t = strip_spaces(text);
  SymbolicValue s;
  s.text = trim(text);
  double c = 0.0;
  if (parse_double(t, c)) {
    s.kind = Kind::Literal;
    s.coeff = c;
    return s;
  }
  const auto slash = t.find('/');
  if (slash == std::string::npos || slash == 0) {
    throw std::invalid_argument("cannot parse '" + s.text + "'");
  }
  const std::string num = t.substr(0, slash);
  const std::string den = t.substr(slash + 1);
  if (!parse_double(num, c)) throw std::invalid_argument("bad coefficient in '" + s.text + "'");
  s.coeff = c;
  if (den == "L") {
    s.kind = Kind::OverL;
  } else if (den == "(alpha^2*M^2)") {
    s.kind = Kind::OverAlphaSqMSq;
  } else {
    throw std::invalid_argument("unknown symbol in '" + s.text +
                                "' (expected c/L or c/(alpha^2*M^2))");
  }
  return s;
}

double SymbolicValue::resolve(double L, double alpha, int workers) const {
  switch (kind) {
    case Kind::Literal: return coeff;
    case Kind::OverL:
      if (!(L > 0.0)) throw ValidationError("cannot resolve '" + text + "': L is not positive");
      return coeff / L;
    case Kind::OverAlphaSqMSq: {
      const double m = static_cast<double>(workers);
      if (!(alpha > 0.0)) throw ValidationError("cannot resolve '" + text + "': alpha is not positive");
      return coeff / (alpha * alpha * m * m);
    }
  }
  return coeff;
}

std::string_view to_string(DataSource source) {
  switch (source) {
    case DataSource::SyntheticControlled: return "synthetic-controlled";
    case DataSource::SyntheticLowRank: return "synthetic-low-rank";
    case DataSource::SyntheticClusters: return "synthetic-clusters";
    case DataSource::Libsvm: return "libsvm";
  }
  return "?";
}

namespace {

DataSource parse_data_source(const std::string& v) {
  for (auto s : {DataSource::SyntheticControlled, DataSource::SyntheticLowRank,
                 DataSource::SyntheticClusters, DataSource::Libsvm}) {
    if (v == to_string(s)) return s;
  }
  throw std::invalid_argument("unknown data source '" + v + "'");
}

class LineParser {
 public:
  LineParser(int line, std::string key, std::string value)
      : line_(line), key_(std::move(key)), value_(std::move(value)) {}

  [[noreturn]] void fail(const std::string& what) const {
    throw ConfigError(key_ + ": " + what, line_);
  }

  const std::string& text() const { return value_; }

  double real() const {
    double v = 0.0;
    if (!parse_double(value_, v)) fail("expected a real number, got '" + value_ + "'");
    return v;
  }

  double nonnegative() const {
    const double v = real();
    if (v < 0.0) fail("must be >= 0");
    return v;
  }

  double positive() const {
    const double v = real();
    if (!(v > 0.0)) fail("must be > 0");
    return v;
  }

  long integer(long min) const {
    errno = 0;
    char* end = nullptr;
    const long v = std::strtol(value_.c_str(), &end, 10);
    if (value_.empty() || end != value_.c_str() + value_.size() || errno == ERANGE) {
      fail("expected an integer, got '" + value_ + "'");
    }
    if (v < min) fail("must be >= " + std::to_string(min));
    return v;
  }

  bool boolean() const {
    if (value_ == "true" || value_ == "1" || value_ == "yes") return true;
    if (value_ == "false" || value_ == "0" || value_ == "no") return false;
    fail("expected true or false, got '" + value_ + "'");
  }

  SymbolicValue symbolic() const {
    try {
      return SymbolicValue::parse(value_);
    } catch (const std::invalid_argument& e) {
      fail(e.what());
    }
  }

  int line() const { return line_; }

 private:
  int line_;
  std::string key_;
  std::string value_;
};

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == ',' || std::isspace(static_cast<unsigned char>(c))) {
      if (!cur.empty()) out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

}  // namespace

ExperimentConfig parse_config(std::string_view text, const std::filesystem::path& base_dir) {
  ExperimentConfig cfg;
  std::istringstream in{std::string(text)};
  std::string raw;
  int line_no = 0;
  int libsvm_line = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    if (!raw.empty() && raw.back() == '\r') raw.pop_back();
    if (const auto hash = raw.find('#'); hash != std::string::npos) raw.erase(hash);
    const std::string line = trim(raw);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("expected 'key = value'", line_no);
    const std::string key = trim(std::string_view(line).substr(0, eq));
    const std::string value = trim(std::string_view(line).substr(eq + 1));
    if (key.empty()) throw ConfigError("empty key", line_no);
    const LineParser v(line_no, key, value);

    if (key == "task") {
      try {
        cfg.task = parse_model_kind(value);
      } catch (const Error& e) {
        v.fail(e.what());
      }
    } else if (key == "data") {
      try {
        cfg.data = parse_data_source(value);
      } catch (const std::invalid_argument& e) {
        v.fail(e.what());
      }
    } else if (key == "libsvm_path") {
      if (value.empty()) v.fail("empty path");
      const std::filesystem::path p(value);
      cfg.libsvm_path = p.is_absolute() ? p : base_dir / p;
      libsvm_line = line_no;
    } else if (key == "shuffle") {
      cfg.shuffle = v.boolean();
    } else if (key == "workers" || key == "M") {
      cfg.workers = static_cast<int>(v.integer(1));
    } else if (key == "dim" || key == "d") {
      cfg.dim = static_cast<int>(v.integer(1));
    } else if (key == "samples_per_worker") {
      cfg.samples_per_worker = static_cast<int>(v.integer(1));
    } else if (key == "smoothness_profile") {
      if (value != "increasing" && value != "common") v.fail("expected increasing or common");
      cfg.smoothness_profile = value;
    } else if (key == "smoothness_value") {
      cfg.smoothness_value = v.positive();
    } else if (key == "rank") {
      cfg.rank = static_cast<int>(v.integer(1));
    } else if (key == "spectrum_decay") {
      cfg.spectrum_decay = v.nonnegative();
    } else if (key == "total_samples") {
      cfg.total_samples = static_cast<int>(v.integer(1));
    } else if (key == "classes") {
      cfg.classes = static_cast<int>(v.integer(2));
    } else if (key == "separation") {
      cfg.separation = v.nonnegative();
    } else if (key == "hidden") {
      cfg.hidden = static_cast<int>(v.integer(1));
    } else if (key == "algorithms") {
      cfg.algorithms.clear();
      for (const auto& name : split_list(value)) {
        Algorithm a{};
        try {
          a = parse_algorithm(name);
        } catch (const Error& e) {
          v.fail(e.what());
        }
        if (std::find(cfg.algorithms.begin(), cfg.algorithms.end(), a) != cfg.algorithms.end()) {
          v.fail("algorithm " + name + " listed twice");
        }
        cfg.algorithms.push_back(a);
      }
      if (cfg.algorithms.empty()) v.fail("no algorithms listed");
    } else if (key == "alpha") {
      cfg.alpha = v.symbolic();
      if (cfg.alpha.kind == SymbolicValue::Kind::OverAlphaSqMSq) v.fail("alpha cannot refer to itself");
      if (!(cfg.alpha.coeff > 0.0)) v.fail("must be > 0");
    } else if (key == "beta") {
      cfg.beta = v.nonnegative();
    } else if (key == "eps1") {
      cfg.eps1 = v.symbolic();
      if (cfg.eps1.coeff < 0.0) v.fail("must be >= 0");
    } else if (key == "eta1") {
      cfg.eta1 = v.nonnegative();
    } else if (key == "lambda") {
      cfg.lambda = v.nonnegative();
    } else if (key == "rho1") {
      cfg.rho1 = v.positive();
    } else if (key == "rho2") {
      cfg.rho2 = v.positive();
    } else if (key == "rho3") {
      cfg.rho3 = v.positive();
    } else if (key == "L_source") {
      if (value == "sum-local") {
        cfg.L_source = SmoothnessSource::SumLocal;
      } else if (value == "pooled") {
        cfg.L_source = SmoothnessSource::Pooled;
      } else {
        v.fail("expected sum-local or pooled");
      }
    } else if (key == "stop") {
      try {
        cfg.stop.mode = parse_stop_mode(value);
      } catch (const Error& e) {
        v.fail(e.what());
      }
    } else if (key == "stop_target") {
      cfg.stop.target = v.nonnegative();
    } else if (key == "max_iterations") {
      cfg.stop.max_k = v.integer(1);
    } else if (key == "f_star") {
      if (value != "auto" && value != "normal-equations" && value != "long-hb" && value != "best-seen") {
        v.fail("expected auto, normal-equations, long-hb or best-seen");
      }
      cfg.f_star = value;
    } else if (key == "f_star_budget") {
      cfg.f_star_budget = v.integer(1);
    } else if (key == "seed") {
      cfg.seed = static_cast<std::uint64_t>(v.integer(0));
    } else if (key == "output") {
      if (value.empty()) v.fail("empty path");
      const std::filesystem::path p(value);
      cfg.output = p.is_absolute() ? p : base_dir / p;
    } else if (key == "reference") {
      const auto parts = split_list(value);
      if (parts.size() != 3) v.fail("expected '<algorithm> <comms> <iterations>'");
      cfg.reference.push_back({parts[0], parts[1], parts[2]});
    } else {
      throw ConfigError("unknown key '" + key + "'", line_no);
    }
  }
  if (cfg.data == DataSource::Libsvm) {
    if (cfg.libsvm_path.empty()) throw ConfigError("data = libsvm needs libsvm_path", 0);
    if (!std::filesystem::exists(cfg.libsvm_path)) {
      throw DataError("config line " + std::to_string(libsvm_line) + ": file not found: " +
                      cfg.libsvm_path.string());
    }
  }
  if (cfg.data == DataSource::SyntheticControlled && cfg.samples_per_worker < cfg.dim) {
    throw ConfigError("samples_per_worker must be >= dim for synthetic-controlled data", 0);
  }
  if (cfg.data == DataSource::SyntheticLowRank && cfg.rank > cfg.dim) {
    throw ConfigError("rank must not exceed dim", 0);
  }
  if (cfg.task == ModelKind::Mlp && cfg.alpha.kind == SymbolicValue::Kind::OverL) {
    throw ConfigError("mlp has no smoothness estimate; give alpha as a literal", 0);
  }
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config " + path.string(), 0);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path.parent_path().empty() ? "." : path.parent_path());
}

}  // namespace chbsim
