#include "chbsim/models.hpp"

#include <cmath>
#include <string>

#include "chbsim/data.hpp"
#include "chbsim/errors.hpp"
#include "chbsim/rng.hpp"

namespace chbsim {

namespace {

using RowMajorMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

void check_inputs(const LossModel& model, const Vector& theta, const Shard& shard) {
  if (shard.empty()) throw PreconditionError("shard is empty");
  const auto expected = model.parameter_count(shard.dim());
  if (static_cast<std::size_t>(theta.size()) != expected) {
    throw PreconditionError("theta has length " + std::to_string(theta.size()) + ", model expects " +
                            std::to_string(expected));
  }
}

void check_finite(const Vector& values, const char* what) {
  for (Eigen::Index n = 0; n < values.size(); ++n) {
    if (!std::isfinite(values(n))) throw NumericDomainError(what, static_cast<std::size_t>(n));
  }
}

// log(1 + exp(-z)) without overflow.
double softplus_neg(double z) {
  return z > 0.0 ? std::log1p(std::exp(-z)) : -z + std::log1p(std::exp(z));
}

// 1 / (1 + exp(z)).
double sigmoid_neg(double z) {
  if (z >= 0.0) {
    const double e = std::exp(-z);
    return e / (1.0 + e);
  }
  return 1.0 / (1.0 + std::exp(z));
}

double sigmoid(double z) { return sigmoid_neg(-z); }

double sign0(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

int class_of(double label, int classes, std::size_t n) {
  if (classes == 2) return label > 0.0 ? 1 : 0;
  const double r = std::round(label);
  if (r != label || r < 0 || r >= classes) {
    throw PreconditionError("sample " + std::to_string(n) + ": label " + std::to_string(label) +
                            " is not a class index in [0, " + std::to_string(classes) + ")");
  }
  return static_cast<int>(r);
}

struct MlpView {
  Eigen::Map<const RowMajorMatrix> w1;
  Eigen::Map<const Vector> b1;
  Eigen::Map<const RowMajorMatrix> w2;
  Eigen::Map<const Vector> b2;

  MlpView(const MlpShape& s, const Vector& theta)
      : w1(theta.data(), s.hidden, s.input),
        b1(theta.data() + s.hidden * s.input, s.hidden),
        w2(theta.data() + s.hidden * (s.input + 1), s.classes, s.hidden),
        b2(theta.data() + s.hidden * (s.input + 1) + s.classes * s.hidden, s.classes) {}
};

struct MlpForward {
  Matrix hidden;      // N x H activations
  Matrix log_probs;   // N x C
  std::vector<int> classes;
  Vector sample_loss;
};

MlpForward mlp_forward(const MlpShape& shape, const Vector& theta, const Shard& shard) {
  if (shard.dim() != shape.input) {
    throw PreconditionError("mlp input width " + std::to_string(shape.input) +
                            " does not match features " + std::to_string(shard.dim()));
  }
  const MlpView v(shape, theta);
  const auto n = static_cast<Eigen::Index>(shard.size());
  MlpForward out;
  Matrix z1 = shard.features * v.w1.transpose();
  z1.rowwise() += v.b1.transpose();
  out.hidden = z1.unaryExpr([](double z) { return sigmoid(z); });
  Matrix z2 = out.hidden * v.w2.transpose();
  z2.rowwise() += v.b2.transpose();
  out.log_probs.resize(n, shape.classes);
  out.sample_loss.resize(n);
  out.classes.resize(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    const double top = z2.row(i).maxCoeff();
    const double lse = top + std::log((z2.row(i).array() - top).exp().sum());
    out.log_probs.row(i) = z2.row(i).array() - lse;
    const int c = class_of(shard.labels(i), shape.classes, static_cast<std::size_t>(i));
    out.classes[static_cast<std::size_t>(i)] = c;
    out.sample_loss(i) = -out.log_probs(i, c);
  }
  check_finite(out.sample_loss, "mlp cross-entropy is not finite");
  return out;
}

double weight_norm_sq(const MlpShape& s, const Vector& theta) {
  const MlpView v(s, theta);
  return v.w1.squaredNorm() + v.w2.squaredNorm();
}

}  // namespace

std::string_view to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::LinearRegression: return "linear";
    case ModelKind::RidgeLogistic: return "logistic";
    case ModelKind::Lasso: return "lasso";
    case ModelKind::Mlp: return "mlp";
  }
  return "?";
}

ModelKind parse_model_kind(std::string_view name) {
  if (name == "linear") return ModelKind::LinearRegression;
  if (name == "logistic") return ModelKind::RidgeLogistic;
  if (name == "lasso") return ModelKind::Lasso;
  if (name == "mlp") return ModelKind::Mlp;
  throw ValidationError("unknown model kind '" + std::string(name) + "'");
}

LossModel::LossModel(ModelKind kind, double lambda, MlpShape shape)
    : kind_(kind), lambda_(lambda), mlp_(shape) {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
    throw ValidationError("regularization weight must be finite and >= 0");
  }
  if (kind == ModelKind::Mlp && (shape.input <= 0 || shape.hidden <= 0 || shape.classes < 2)) {
    throw ValidationError("mlp shape needs input > 0, hidden > 0, classes >= 2");
  }
}

LossModel LossModel::linear() { return LossModel(ModelKind::LinearRegression, 0.0, {}); }
LossModel LossModel::logistic(double lambda) {
  return LossModel(ModelKind::RidgeLogistic, lambda, {});
}
LossModel LossModel::lasso(double lambda) { return LossModel(ModelKind::Lasso, lambda, {}); }
LossModel LossModel::mlp(MlpShape shape, double lambda) {
  return LossModel(ModelKind::Mlp, lambda, shape);
}

std::size_t LossModel::parameter_count(int d) const {
  if (kind_ == ModelKind::Mlp) {
    MlpShape s = mlp_;
    s.input = d;
    return s.parameter_count();
  }
  return static_cast<std::size_t>(d);
}

double eval_loss(const LossModel& model, const Vector& theta, const Shard& shard) {
  check_inputs(model, theta, shard);
  const Matrix& x = shard.features;
  const Vector& y = shard.labels;
  switch (model.kind()) {
    case ModelKind::LinearRegression:
    case ModelKind::Lasso: {
      const Vector r = y - x * theta;
      check_finite(r, "residual is not finite");
      double value = 0.5 * r.squaredNorm();
      if (model.kind() == ModelKind::Lasso) value += model.lambda() * theta.lpNorm<1>();
      return value;
    }
    case ModelKind::RidgeLogistic: {
      const Vector z = y.cwiseProduct(x * theta);
      check_finite(z, "logit is not finite");
      double value = 0.0;
      for (Eigen::Index n = 0; n < z.size(); ++n) value += softplus_neg(z(n));
      return value + 0.5 * model.lambda() * theta.squaredNorm();
    }
    case ModelKind::Mlp: {
      MlpShape s = model.mlp_shape();
      s.input = shard.dim();
      const MlpForward fw = mlp_forward(s, theta, shard);
      return fw.sample_loss.sum() + 0.5 * model.lambda() * weight_norm_sq(s, theta);
    }
  }
  return 0.0;
}

Vector eval_gradient(const LossModel& model, const Vector& theta, const Shard& shard) {
  check_inputs(model, theta, shard);
  const Matrix& x = shard.features;
  const Vector& y = shard.labels;
  switch (model.kind()) {
    case ModelKind::LinearRegression:
    case ModelKind::Lasso: {
      const Vector r = y - x * theta;
      check_finite(r, "residual is not finite");
      Vector g = -(x.transpose() * r);
      if (model.kind() == ModelKind::Lasso) {
        g += model.lambda() * theta.unaryExpr([](double t) { return sign0(t); });
      }
      return g;
    }
    case ModelKind::RidgeLogistic: {
      const Vector z = y.cwiseProduct(x * theta);
      check_finite(z, "logit is not finite");
      Vector w(z.size());
      for (Eigen::Index n = 0; n < z.size(); ++n) w(n) = -y(n) * sigmoid_neg(z(n));
      return x.transpose() * w + model.lambda() * theta;
    }
    case ModelKind::Mlp: {
      MlpShape s = model.mlp_shape();
      s.input = shard.dim();
      const MlpForward fw = mlp_forward(s, theta, shard);
      const MlpView v(s, theta);
      // d loss / d logits = softmax - onehot
      Matrix d2 = fw.log_probs.array().exp().matrix();
      for (Eigen::Index i = 0; i < d2.rows(); ++i) d2(i, fw.classes[static_cast<std::size_t>(i)]) -= 1.0;
      const Matrix d1 =
          ((d2 * v.w2).array() * fw.hidden.array() * (1.0 - fw.hidden.array())).matrix();

      Vector g(theta.size());
      Eigen::Map<RowMajorMatrix> gw1(g.data(), s.hidden, s.input);
      Eigen::Map<Vector> gb1(g.data() + s.hidden * s.input, s.hidden);
      Eigen::Map<RowMajorMatrix> gw2(g.data() + s.hidden * (s.input + 1), s.classes, s.hidden);
      Eigen::Map<Vector> gb2(g.data() + s.hidden * (s.input + 1) + s.classes * s.hidden,
                             s.classes);
      gw1 = d1.transpose() * x + model.lambda() * v.w1;
      gb1 = d1.colwise().sum().transpose();
      gw2 = d2.transpose() * fw.hidden + model.lambda() * v.w2;
      gb2 = d2.colwise().sum().transpose();
      return g;
    }
  }
  return {};
}

Vector initial_parameters(const LossModel& model, int d, std::uint64_t seed) {
  const auto n = static_cast<Eigen::Index>(model.parameter_count(d));
  if (model.kind() != ModelKind::Mlp) return Vector::Zero(n);
  MlpShape s = model.mlp_shape();
  s.input = d;
  Vector theta(n);
  SeededRng rng = SeededRng(seed).substream(0x6d6c70);  // "mlp"
  const double b_in = 1.0 / std::sqrt(static_cast<double>(s.input));
  const double b_hidden = 1.0 / std::sqrt(static_cast<double>(s.hidden));
  const Eigen::Index layer1 = s.hidden * (s.input + 1);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double b = i < layer1 ? b_in : b_hidden;
    theta(i) = rng.uniform(-b, b);
  }
  return theta;
}

double top_eigenvalue(const SymmetricOperator& apply, int d, EigenOptions opts) {
  if (d <= 0) throw PreconditionError("top_eigenvalue: dimension must be positive");
  if (!(opts.tol > 0.0)) throw PreconditionError("top_eigenvalue: tol must be positive");
  Vector v = Vector::Constant(d, 1.0 / std::sqrt(static_cast<double>(d)));
  double residual = 0.0;
  for (int it = 0; it < opts.max_iter; ++it) {
    const Vector w = apply(v);
    if (w.size() != d) throw PreconditionError("top_eigenvalue: operator changed dimension");
    const double lambda = v.dot(w);
    residual = (w - lambda * v).norm();
    if (residual <= opts.tol * std::abs(lambda)) return lambda;
    const double norm = w.norm();
    if (norm == 0.0) return 0.0;
    v = w / norm;
  }
  throw ConvergenceError("power iteration did not converge", residual);
}

double top_eigenvalue(const Matrix& symmetric, EigenOptions opts) {
  return top_eigenvalue([&](const Vector& v) -> Vector { return symmetric * v; },
                        static_cast<int>(symmetric.rows()), opts);
}

double bottom_eigenvalue(const Matrix& a, EigenOptions opts) {
  const auto d = a.rows();
  if (d == 0 || a.cols() != d) throw PreconditionError("bottom_eigenvalue: need a square matrix");
  Eigen::LDLT<Matrix> ldlt(a);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) return 0.0;
  // Numerically singular Grams have no usable strong convexity.
  if (ldlt.rcond() < 1e-13) return 0.0;
  Vector v = Vector::Constant(d, 1.0 / std::sqrt(static_cast<double>(d)));
  double residual = 0.0;
  for (int it = 0; it < opts.max_iter; ++it) {
    const Vector w = ldlt.solve(v);
    const double nu = v.dot(w);
    residual = (w - nu * v).norm();
    if (residual <= opts.tol * std::abs(nu)) return 1.0 / nu;
    v = w / w.norm();
  }
  throw ConvergenceError("inverse power iteration did not converge", residual);
}

Matrix gram(const Shard& shard) {
  Matrix g = Matrix::Zero(shard.dim(), shard.dim());
  g.selfadjointView<Eigen::Lower>().rankUpdate(shard.features.transpose());
  return g.selfadjointView<Eigen::Lower>();
}

namespace {

double data_smoothness(const LossModel& model, const Shard& shard) {
  if (shard.empty()) throw PreconditionError("smoothness: shard is empty");
  const Matrix& x = shard.features;
  switch (model.kind()) {
    case ModelKind::LinearRegression:
    case ModelKind::Lasso:
      return top_eigenvalue([&](const Vector& v) -> Vector { return x.transpose() * (x * v); },
                            shard.dim());
    case ModelKind::RidgeLogistic: {
      const Vector w = 0.25 * shard.labels.array().square().matrix();
      return top_eigenvalue(
          [&](const Vector& v) -> Vector { return x.transpose() * w.cwiseProduct(x * v); },
          shard.dim());
    }
    case ModelKind::Mlp:
      throw UnsupportedModelError(
          "mlp has no closed-form smoothness bound; supply L explicitly");
  }
  return 0.0;
}

}  // namespace

double smoothness_constant(const LossModel& model, const Shard& shard) {
  const double base = data_smoothness(model, shard);
  return model.kind() == ModelKind::RidgeLogistic ? model.lambda() + base : base;
}

double global_smoothness(const LossModel& model, const FederatedDataset& fed) {
  fed.validate();
  const double base = data_smoothness(model, fed.pooled());
  if (model.kind() == ModelKind::RidgeLogistic) return fed.workers() * model.lambda() + base;
  return base;
}

double SmoothnessEstimate::sum_local() const {
  double s = 0.0;
  for (double l : per_worker) s += l;
  return s;
}

SmoothnessEstimate estimate_smoothness(const LossModel& model, const FederatedDataset& fed) {
  SmoothnessEstimate est;
  for (const auto& shard : fed.shards) est.per_worker.push_back(smoothness_constant(model, shard));
  est.global = global_smoothness(model, fed);
  return est;
}

double strong_convexity(const LossModel& model, const FederatedDataset& fed) {
  switch (model.kind()) {
    case ModelKind::LinearRegression:
    case ModelKind::Lasso:
      return bottom_eigenvalue(gram(fed.pooled()), {1e-10, 100000});
    case ModelKind::RidgeLogistic:
      return fed.workers() * model.lambda();
    case ModelKind::Mlp:
      return 0.0;
  }
  return 0.0;
}

}  // namespace chbsim
