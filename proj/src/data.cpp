#include "chbsim/data.hpp"

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "chbsim/errors.hpp"
#include "chbsim/rng.hpp"
#include "chbsim/trace.hpp"

namespace chbsim {

std::size_t FederatedDataset::total_samples() const {
  std::size_t n = 0;
  for (const auto& s : shards) n += s.size();
  return n;
}

void FederatedDataset::validate() const {
  if (shards.empty()) throw PreconditionError("dataset has no workers");
  for (std::size_t m = 0; m < shards.size(); ++m) {
    if (shards[m].empty()) throw PreconditionError("worker " + std::to_string(m + 1) + " has no samples");
    if (shards[m].dim() != d) {
      throw PreconditionError("worker " + std::to_string(m + 1) + " has feature width " +
                              std::to_string(shards[m].dim()) + ", dataset d=" + std::to_string(d));
    }
  }
}

namespace {

bool parse_double(std::string_view text, double& out) {
  if (text.empty()) return false;
  const std::string owned(text);
  char* end = nullptr;
  errno = 0;
  out = std::strtod(owned.c_str(), &end);
  return end == owned.c_str() + owned.size() && errno != ERANGE && std::isfinite(out);
}

bool parse_index(std::string_view text, long& out) {
  if (text.empty()) return false;
  long v = 0;
  for (char c : text) {
    if (c < '0' || c > '9') return false;
    v = v * 10 + (c - '0');
    if (v > 100000000) return false;
  }
  out = v;
  return true;
}

}  // namespace

LibsvmData parse_libsvm(std::istream& in, std::optional<int> d_hint) {
  struct SparseRow {
    double label;
    std::vector<std::pair<long, double>> entries;
  };
  std::vector<SparseRow> rows;
  long max_index = 0;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream tokens(line);
    std::string tok;
    if (!(tokens >> tok)) continue;
    SparseRow row;
    if (!parse_double(tok, row.label)) throw ParseError("malformed label '" + tok + "'", line_no);
    long last = 0;
    while (tokens >> tok) {
      const auto colon = tok.find(':');
      if (colon == std::string::npos) throw ParseError("expected index:value, got '" + tok + "'", line_no);
      long index = 0;
      double value = 0.0;
      if (!parse_index(std::string_view(tok).substr(0, colon), index) || index < 1) {
        throw ParseError("malformed feature index in '" + tok + "'", line_no);
      }
      if (!parse_double(std::string_view(tok).substr(colon + 1), value)) {
        throw ParseError("malformed feature value in '" + tok + "'", line_no);
      }
      if (index <= last) throw ParseError("feature indices must be strictly increasing", line_no);
      last = index;
      row.entries.emplace_back(index, value);
    }
    max_index = std::max(max_index, last);
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw DataError("libsvm input contains no samples");
  LibsvmData out;
  out.d = static_cast<int>(std::max<long>(max_index, d_hint.value_or(0)));
  out.samples.reserve(rows.size());
  for (const auto& row : rows) {
    Sample s;
    s.label = row.label;
    s.features = Vector::Zero(out.d);
    for (const auto& [index, value] : row.entries) s.features(index - 1) = value;
    out.samples.push_back(std::move(s));
  }
  return out;
}

LibsvmData load_libsvm(const std::string& path, std::optional<int> d_hint) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open libsvm file '" + path + "'");
  try {
    return parse_libsvm(in, d_hint);
  } catch (const ParseError& e) {
    throw ParseError(path + ": " + e.detail(), e.line());
  }
}

void write_libsvm(std::ostream& out, const std::vector<Sample>& samples) {
  for (const auto& s : samples) {
    out << format_real(s.label);
    for (Eigen::Index i = 0; i < s.features.size(); ++i) {
      if (s.features(i) != 0.0) out << ' ' << (i + 1) << ':' << format_real(s.features(i));
    }
    out << '\n';
  }
}

FederatedDataset partition(const std::vector<Sample>& samples, int d, int workers,
                           PartitionPolicy, std::optional<std::uint64_t> shuffle_seed) {
  if (workers < 1) throw PreconditionError("partition: need at least one worker");
  if (samples.empty()) throw DataError("partition: no samples");
  const std::size_t n = samples.size();
  if (static_cast<std::size_t>(workers) > n) {
    throw DataError("partition: " + std::to_string(workers) + " workers but only " +
                    std::to_string(n) + " samples (degenerate shards)");
  }
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  if (shuffle_seed) {
    SeededRng rng(*shuffle_seed, 0x73687566);  // "shuf"
    for (std::size_t i = n - 1; i > 0; --i) std::swap(order[i], order[rng.below(i + 1)]);
  }
  FederatedDataset fed;
  fed.d = d;
  const std::size_t base = n / static_cast<std::size_t>(workers);
  const std::size_t extra = n % static_cast<std::size_t>(workers);
  std::size_t at = 0;
  for (int m = 0; m < workers; ++m) {
    const std::size_t count = base + (static_cast<std::size_t>(m) < extra ? 1 : 0);
    std::vector<Sample> part;
    part.reserve(count);
    for (std::size_t i = 0; i < count; ++i) part.push_back(samples[order[at + i]]);
    at += count;
    fed.shards.push_back(Shard::from_samples(part, d));
  }
  fed.provenance = {{"partition", "contiguous-even"},
                    {"shuffle_seed", shuffle_seed ? std::to_string(*shuffle_seed) : "none"}};
  return fed;
}

SmoothnessTargets SmoothnessTargets::increasing(int workers, double ratio) {
  SmoothnessTargets t;
  for (int m = 0; m < workers; ++m) {
    const double s = std::pow(ratio, m);
    t.values.push_back(s * s);
  }
  return t;
}

SmoothnessTargets SmoothnessTargets::common(int workers, double value) {
  return SmoothnessTargets{std::vector<double>(static_cast<std::size_t>(workers), value)};
}

namespace {

Matrix standard_normal(SeededRng& rng, Eigen::Index rows, Eigen::Index cols) {
  Matrix a(rows, cols);
  // Row-major fill order so the byte stream does not depend on storage order.
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) a(i, j) = rng.normal();
  return a;
}

// Orthonormal columns from Householder QR, signs fixed so R has a positive diagonal.
Matrix orthonormal_columns(const Matrix& a) {
  Eigen::HouseholderQR<Matrix> qr(a);
  Matrix q = qr.householderQ() * Matrix::Identity(a.rows(), a.cols());
  const Matrix r = qr.matrixQR().topRows(a.cols()).triangularView<Eigen::Upper>();
  for (Eigen::Index j = 0; j < a.cols(); ++j) {
    if (r(j, j) < 0.0) q.col(j) = -q.col(j);
  }
  return q;
}

Vector random_signs(SeededRng& rng, Eigen::Index n) {
  Vector y(n);
  for (Eigen::Index i = 0; i < n; ++i) y(i) = rng.sign();
  return y;
}

std::string join_values(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ';';
    s += format_real(v[i]);
  }
  return s;
}

}  // namespace

FederatedDataset synth_controlled(int workers, int d, int n_per_worker,
                                  const SmoothnessTargets& targets, SynthTask task, double lambda,
                                  std::uint64_t seed) {
  if (workers < 1 || d < 1) throw ValidationError("synth_controlled: need workers >= 1 and d >= 1");
  if (n_per_worker < d) throw ValidationError("synth_controlled: n_per_worker must be >= d");
  if (static_cast<int>(targets.values.size()) != workers) {
    throw ValidationError("synth_controlled: one smoothness target per worker required");
  }
  FederatedDataset fed;
  fed.d = d;
  const SeededRng root(seed);
  for (int m = 0; m < workers; ++m) {
    const double target = targets.values[static_cast<std::size_t>(m)];
    if (!(target > 0.0) || !std::isfinite(target)) {
      throw ValidationError("synth_controlled: smoothness targets must be positive");
    }
    double scale = std::sqrt(target);
    if (task == SynthTask::Logistic) {
      if (!(target > lambda)) {
        throw ValidationError("synth_controlled: logistic target must exceed lambda");
      }
      scale = 2.0 * std::sqrt(target - lambda);
    }
    SeededRng rng = root.substream(static_cast<std::uint64_t>(m));
    const Matrix q = orthonormal_columns(standard_normal(rng, d, d));
    Vector spectrum(d);
    for (int i = 0; i < d; ++i) {
      spectrum(i) = d == 1 ? scale : -scale + 2.0 * scale * i / (d - 1);
    }
    Matrix x;
    if (n_per_worker == d) {
      x = q * spectrum.asDiagonal() * q.transpose();
    } else {
      const Matrix u = orthonormal_columns(standard_normal(rng, n_per_worker, d));
      x = u * spectrum.asDiagonal() * q.transpose();
    }
    fed.shards.emplace_back(std::move(x), random_signs(rng, n_per_worker));
  }
  fed.provenance = {{"generator", "synthetic-controlled"},
                    {"task", task == SynthTask::Linear ? "linear" : "logistic"},
                    {"workers", std::to_string(workers)},
                    {"d", std::to_string(d)},
                    {"n_per_worker", std::to_string(n_per_worker)},
                    {"smoothness_targets", join_values(targets.values)},
                    {"lambda", format_real(lambda)},
                    {"seed", std::to_string(seed)},
                    {"rng", std::string(SeededRng::kIdentity)}};
  return fed;
}

FederatedDataset synth_low_rank(int workers, int d, int rank, int n_per_worker, double decay,
                                std::uint64_t seed) {
  if (workers < 1 || n_per_worker < 1) throw ValidationError("synth_low_rank: empty dataset");
  if (rank < 1 || rank > d) throw ValidationError("synth_low_rank: need 1 <= rank <= d");
  const SeededRng root(seed);
  SeededRng basis_rng = root.substream(0xba515);
  const Matrix basis = orthonormal_columns(standard_normal(basis_rng, d, d)).leftCols(rank);
  Vector scale(rank);
  for (int i = 0; i < rank; ++i) scale(i) = std::pow(static_cast<double>(i + 1), -decay);
  FederatedDataset fed;
  fed.d = d;
  for (int m = 0; m < workers; ++m) {
    SeededRng rng = root.substream(static_cast<std::uint64_t>(m));
    const Matrix z = standard_normal(rng, n_per_worker, rank);
    Matrix x = z * scale.asDiagonal() * basis.transpose();
    fed.shards.emplace_back(std::move(x), random_signs(rng, n_per_worker));
  }
  fed.provenance = {{"generator", "synthetic-low-rank"},
                    {"workers", std::to_string(workers)},
                    {"d", std::to_string(d)},
                    {"rank", std::to_string(rank)},
                    {"n_per_worker", std::to_string(n_per_worker)},
                    {"decay", format_real(decay)},
                    {"seed", std::to_string(seed)},
                    {"rng", std::string(SeededRng::kIdentity)}};
  return fed;
}

FederatedDataset synth_clusters(int workers, int d, int total_samples, int classes,
                                double separation, std::uint64_t seed) {
  if (classes < 2) throw ValidationError("synth_clusters: need at least two classes");
  if (total_samples < workers) throw ValidationError("synth_clusters: fewer samples than workers");
  const SeededRng root(seed);
  SeededRng center_rng = root.substream(0xce);
  const Matrix centers = separation * standard_normal(center_rng, classes, d);
  SeededRng rng = root.substream(0x5a);
  std::vector<Sample> samples(static_cast<std::size_t>(total_samples));
  for (auto& s : samples) {
    const auto c = static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(classes)));
    s.label = static_cast<double>(c);
    s.features.resize(d);
    for (int j = 0; j < d; ++j) s.features(j) = centers(c, j) + rng.normal();
  }
  FederatedDataset fed = partition(samples, d, workers);
  fed.provenance = {{"generator", "synthetic-clusters"},
                    {"workers", std::to_string(workers)},
                    {"d", std::to_string(d)},
                    {"total_samples", std::to_string(total_samples)},
                    {"classes", std::to_string(classes)},
                    {"separation", format_real(separation)},
                    {"seed", std::to_string(seed)},
                    {"rng", std::string(SeededRng::kIdentity)}};
  return fed;
}

}  // namespace chbsim
