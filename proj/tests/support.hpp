#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "chbsim/data.hpp"
#include "chbsim/models.hpp"
#include "chbsim/rng.hpp"
#include "chbsim/types.hpp"

namespace testing {

using chbsim::Matrix;
using chbsim::Shard;
using chbsim::Vector;

inline Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

inline Shard shard(std::initializer_list<std::initializer_list<double>> rows,
                   std::initializer_list<double> labels) {
  Shard s;
  const auto n = static_cast<Eigen::Index>(rows.size());
  const auto d = static_cast<Eigen::Index>(rows.begin()->size());
  s.features.resize(n, d);
  Eigen::Index i = 0;
  for (const auto& r : rows) {
    Eigen::Index j = 0;
    for (double x : r) s.features(i, j++) = x;
    ++i;
  }
  s.labels = vec(labels);
  return s;
}

inline Vector normal_vector(chbsim::SeededRng& rng, Eigen::Index n, double scale = 1.0) {
  Vector v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = scale * rng.normal();
  return v;
}

inline Shard random_shard(chbsim::SeededRng& rng, int n, int d, bool binary_labels) {
  Shard s;
  s.features.resize(n, d);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j) s.features(i, j) = rng.normal();
  s.labels.resize(n);
  for (int i = 0; i < n; ++i) s.labels[i] = binary_labels ? rng.sign() : rng.normal();
  return s;
}

/// Central differences with step 1e-6 (1 + |theta_i|).
inline Vector finite_difference(const chbsim::LossModel& model, const Vector& theta,
                                const Shard& s) {
  Vector g(theta.size());
  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    const double h = 1e-6 * (1.0 + std::abs(theta[i]));
    Vector tp = theta, tm = theta;
    tp[i] += h;
    tm[i] -= h;
    g[i] = (chbsim::eval_loss(model, tp, s) - chbsim::eval_loss(model, tm, s)) / (tp[i] - tm[i]);
  }
  return g;
}

inline double rel_err(const Vector& a, const Vector& b) {
  return (a - b).norm() / std::max(b.norm(), 1e-300);
}

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("chbsim-test-" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace testing
