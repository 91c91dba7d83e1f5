#include "chbsim/types.hpp"

#include "chbsim/errors.hpp"

namespace chbsim {

Shard::Shard(Matrix x, Vector y) : features(std::move(x)), labels(std::move(y)) {
  if (features.rows() != labels.size()) {
    throw PreconditionError("shard: feature rows and label count differ");
  }
}

Shard Shard::from_samples(const std::vector<Sample>& samples, int d) {
  Matrix x(static_cast<Eigen::Index>(samples.size()), d);
  Vector y(static_cast<Eigen::Index>(samples.size()));
  for (std::size_t n = 0; n < samples.size(); ++n) {
    const auto& s = samples[n];
    if (s.features.size() != d) {
      throw PreconditionError("sample " + std::to_string(n) + " has " +
                              std::to_string(s.features.size()) + " features, expected " +
                              std::to_string(d));
    }
    x.row(static_cast<Eigen::Index>(n)) = s.features.transpose();
    y(static_cast<Eigen::Index>(n)) = s.label;
  }
  return Shard(std::move(x), std::move(y));
}

std::vector<Sample> Shard::to_samples() const {
  std::vector<Sample> out(size());
  for (std::size_t n = 0; n < out.size(); ++n) {
    out[n].features = features.row(static_cast<Eigen::Index>(n)).transpose();
    out[n].label = labels(static_cast<Eigen::Index>(n));
  }
  return out;
}

Shard concatenate(const std::vector<Shard>& shards) {
  Eigen::Index rows = 0;
  Eigen::Index cols = shards.empty() ? 0 : shards.front().features.cols();
  for (const auto& s : shards) {
    if (s.features.cols() != cols) throw PreconditionError("concatenate: width mismatch");
    rows += s.features.rows();
  }
  Matrix x(rows, cols);
  Vector y(rows);
  Eigen::Index at = 0;
  for (const auto& s : shards) {
    x.middleRows(at, s.features.rows()) = s.features;
    y.segment(at, s.labels.size()) = s.labels;
    at += s.features.rows();
  }
  return Shard(std::move(x), std::move(y));
}

}  // namespace chbsim
