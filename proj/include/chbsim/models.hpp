#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "chbsim/types.hpp"

namespace chbsim {

struct FederatedDataset;

enum class ModelKind { LinearRegression, RidgeLogistic, Lasso, Mlp };

std::string_view to_string(ModelKind kind);
ModelKind parse_model_kind(std::string_view name);

/// input -> hidden (sigmoid) -> classes (softmax). Parameters are packed as
/// W1 (hidden x input, row-major), b1, W2 (classes x hidden, row-major), b2.
struct MlpShape {
  int input = 0;
  int hidden = 30;
  int classes = 2;

  std::size_t parameter_count() const {
    return static_cast<std::size_t>(hidden) * (input + 1) +
           static_cast<std::size_t>(classes) * (hidden + 1);
  }
};

/// One local loss f_m. Values are sums over the shard's samples; the
/// regularizer is added once per shard, so f = sum_m f_m carries it M times.
///
///   LinearRegression  1/2 sum (y - x'theta)^2
///   RidgeLogistic     sum log(1 + exp(-y x'theta)) + lambda/2 |theta|^2,  y in {-1,+1}
///   Lasso             1/2 sum (y - x'theta)^2 + lambda |theta|_1
///   Mlp               sum softmax cross-entropy + lambda/2 |W1,W2|^2 (biases free)
///
/// Mlp class of a sample: with two classes, label > 0 is class 1 and anything
/// else class 0 (works for both {-1,+1} and {0,1}); otherwise the label must be
/// an integer in [0, classes).
class LossModel {
 public:
  static LossModel linear();
  static LossModel logistic(double lambda);
  static LossModel lasso(double lambda);
  static LossModel mlp(MlpShape shape, double lambda);

  ModelKind kind() const { return kind_; }
  double lambda() const { return lambda_; }
  const MlpShape& mlp_shape() const { return mlp_; }

  /// Length of theta for features of dimension d.
  std::size_t parameter_count(int d) const;

 private:
  LossModel(ModelKind kind, double lambda, MlpShape shape);

  ModelKind kind_;
  double lambda_;
  MlpShape mlp_;
};

double eval_loss(const LossModel& model, const Vector& theta, const Shard& shard);

/// Gradient, or for Lasso the subgradient with sign(0) = 0.
Vector eval_gradient(const LossModel& model, const Vector& theta, const Shard& shard);

/// Starting point: zero for the convex models, a seeded uniform draw in
/// [-1/sqrt(fan_in), 1/sqrt(fan_in)] for every MLP weight and bias.
Vector initial_parameters(const LossModel& model, int d, std::uint64_t seed);

using SymmetricOperator = std::function<Vector(const Vector&)>;

struct EigenOptions {
  double tol = 1e-8;
  int max_iter = 10000;
};

/// Power iteration from (1,...,1)/sqrt(d); stops once |Av - lv| <= tol * l.
/// Throws ConvergenceError with the last residual after max_iter steps.
double top_eigenvalue(const SymmetricOperator& apply, int d, EigenOptions opts = {});
double top_eigenvalue(const Matrix& symmetric, EigenOptions opts = {});

/// Inverse power iteration on a symmetric PSD matrix. Returns 0 when the
/// matrix is numerically singular.
double bottom_eigenvalue(const Matrix& symmetric_psd, EigenOptions opts = {});

/// sum_n x_n x_n'.
Matrix gram(const Shard& shard);

/// LinearRegression/Lasso: l_max(sum x x'). RidgeLogistic: lambda + l_max(0.25 sum y^2 x x').
/// Mlp throws UnsupportedModelError.
double smoothness_constant(const LossModel& model, const Shard& shard);

/// Smoothness of f = sum_m f_m on the pooled data (the ridge term counted M times).
double global_smoothness(const LossModel& model, const FederatedDataset& fed);

struct SmoothnessEstimate {
  std::vector<double> per_worker;
  double global = 0.0;  ///< pooled estimate, see global_smoothness
  double sum_local() const;
};

SmoothnessEstimate estimate_smoothness(const LossModel& model, const FederatedDataset& fed);

/// Strong-convexity constant of f: l_min of the pooled Gram for the
/// least-squares models (0 when rank-deficient), M * lambda for ridge logistic.
double strong_convexity(const LossModel& model, const FederatedDataset& fed);

}  // namespace chbsim
