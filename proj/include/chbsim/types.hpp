#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <vector>

namespace chbsim {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

struct Sample {
  Vector features;
  double label = 0.0;
};

/// Dense row-major view of one worker's samples: row n is x_n, labels(n) is y_n.
struct Shard {
  Matrix features;
  Vector labels;

  Shard() = default;
  Shard(Matrix x, Vector y);

  static Shard from_samples(const std::vector<Sample>& samples, int d);
  std::vector<Sample> to_samples() const;

  std::size_t size() const { return static_cast<std::size_t>(features.rows()); }
  int dim() const { return static_cast<int>(features.cols()); }
  bool empty() const { return features.rows() == 0; }
};

/// Stacks shards in order.
Shard concatenate(const std::vector<Shard>& shards);

}  // namespace chbsim
