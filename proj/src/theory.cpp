#include "chbsim/theory.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "chbsim/errors.hpp"

namespace chbsim {

namespace {

void require_rhos(const HyperParams& p) {
  if (!(p.rho1 > 0.0) || !(p.rho2 > 0.0) || !(p.rho3 > 0.0)) {
    throw ValidationError("rho1, rho2, rho3 must be positive");
  }
  if (!(p.alpha > 0.0)) throw ValidationError("alpha must be positive");
}

double bracket(const HyperParams& p) { return p.eta1 - (1.0 - p.alpha * p.L) / (2.0 * p.alpha); }

int censored_count(const IterationTrace& rec) {
  return static_cast<int>(rec.transmit_flags.size()) - rec.comms_this_iter;
}

}  // namespace

ConditionConstants condition_constants(const HyperParams& p, int censored) {
  require_rhos(p);
  if (censored < 0) throw ValidationError("censored worker count must be >= 0");
  const double a = p.alpha;
  const double c0 = bracket(p);
  const double mc = static_cast<double>(censored);
  ConditionConstants out;
  out.sigma0 = a / 2.0 - c0 * a * a * (1.0 + p.rho1) * (1.0 + p.rho2);
  out.gamma = a / 2.0 * (1.0 + p.rho3) + c0 * a * a * (1.0 + p.rho1) * (1.0 + 1.0 / p.rho2);
  out.sigma1 = -out.gamma * mc * mc * p.eps1 - p.beta * p.beta / (2.0 * a) * (1.0 + 1.0 / p.rho3) -
               c0 * p.beta * p.beta * (1.0 + 1.0 / p.rho1) + p.eta1;
  return out;
}

ConditionReport condition_report(const HyperParams& p, int workers) {
  const ConditionConstants cc = condition_constants(p, workers);
  ConditionReport r;
  r.sigma0 = cc.sigma0;
  r.sigma1_worst = cc.sigma1;
  r.gamma = cc.gamma;
  if (!(cc.sigma0 >= 0.0)) r.binding.emplace_back("sigma0 >= 0");
  if (!(cc.sigma1 >= 0.0)) r.binding.emplace_back("sigma1(M) >= 0");
  if (!(bracket(p) >= 0.0)) r.binding.emplace_back("eta1 >= (1 - alpha L)/(2 alpha)");
  r.feasible = r.binding.empty();
  return r;
}

double simplified_eps1_bound(const HyperParams& p, int censored) {
  require_rhos(p);
  const double slack = (1.0 - p.alpha * p.L) - p.beta * p.beta * (1.0 + 1.0 / p.rho3);
  if (censored == 0) {
    return slack >= 0.0 ? std::numeric_limits<double>::infinity() : -std::numeric_limits<double>::infinity();
  }
  const double mc = static_cast<double>(censored);
  return slack / (p.alpha * p.alpha * (1.0 + p.rho3) * mc * mc);
}

bool check_simplified(const HyperParams& p, int censored) {
  require_rhos(p);
  if (!(p.alpha * p.L <= 1.0)) return false;
  if (!(p.beta <= std::sqrt((1.0 - p.alpha * p.L) / (1.0 + 1.0 / p.rho3)))) return false;
  return p.eps1 <= simplified_eps1_bound(p, censored);
}

HyperParams rate_recipe(double L, double mu, double delta, int workers) {
  if (!(L > 0.0) || !std::isfinite(L)) throw ValidationError("L must be positive");
  if (!(mu > 0.0)) throw ValidationError("mu must be positive");
  if (mu > L) throw ValidationError("mu must not exceed L");
  if (!(delta > 0.0 && delta < 1.0)) throw ValidationError("delta must lie in (0, 1)");
  if (workers < 1) throw ValidationError("M must be >= 1");
  HyperParams p;
  p.L = L;
  p.mu = mu;
  p.rho3 = 1.0;
  p.alpha = (1.0 - delta) / L;
  const double one_minus_al = 1.0 - p.alpha * L;
  const double one_minus_am = 1.0 - p.alpha * mu;
  const double m = static_cast<double>(workers);
  p.eta1 = one_minus_al / (2.0 * p.alpha);
  p.eps1 = one_minus_al * one_minus_am / (4.0 * p.alpha * p.alpha * m * m);
  p.beta = 0.5 * std::sqrt(one_minus_al * one_minus_am);
  return p;
}

double rate_constant(const HyperParams& p, double mu, int censored_max) {
  const ConditionConstants cc = condition_constants(p, censored_max);
  if (!(mu > 0.0)) throw RateUndefinedError("rate constant needs mu > 0");
  if (!(p.eta1 > 0.0)) throw RateUndefinedError("rate constant needs eta1 > 0");
  if (!(bracket(p) >= 0.0)) throw RateUndefinedError("eta1 below (1 - alpha L)/(2 alpha)");
  if (!(cc.sigma0 > 0.0) || !(cc.sigma1 > 0.0)) {
    throw RateUndefinedError("sigma0 and sigma1 must be positive");
  }
  const double c = std::min(2.0 * cc.sigma0 * mu, cc.sigma1 / p.eta1);
  if (!(c > 0.0 && c < 1.0)) {
    throw RateUndefinedError("rate constant " + format_real(c) + " outside (0, 1)");
  }
  return c;
}

LyapunovSample lyapunov(double f_val, double f_star, const Vector& theta_curr,
                        const Vector& theta_prev, double eta1) {
  if (theta_curr.size() != theta_prev.size()) throw PreconditionError("lyapunov: length mismatch");
  LyapunovSample s;
  s.f_gap = f_val - f_star;
  s.momentum_term = eta1 * (theta_curr - theta_prev).squaredNorm();
  s.value = s.f_gap + s.momentum_term;
  if (s.value < -1e-9) {
    throw ValidationError("Lyapunov value " + format_real(s.value) + " is negative; f_star is inconsistent");
  }
  return s;
}

DescentAuditReport descent_audit(const Trace& trace, const HyperParams& p, double slack) {
  DescentAuditReport report;
  const auto& recs = trace.records();
  for (std::size_t i = 0; i + 1 < recs.size(); ++i) {
    const auto& cur = recs[i];
    const auto& nxt = recs[i + 1];
    const double v_cur = cur.f_gap + p.eta1 * cur.step_norm_sq;
    const double v_nxt = nxt.f_gap + p.eta1 * nxt.step_norm_sq;
    const ConditionConstants cc = condition_constants(p, censored_count(cur));
    DescentViolation d;
    d.k = cur.k;
    d.lhs = v_nxt - v_cur;
    d.rhs = -cc.sigma0 * cur.grad_norm_sq - cc.sigma1 * cur.step_norm_sq + slack * std::abs(v_cur);
    ++report.checked;
    if (!(d.lhs <= d.rhs)) report.violations.push_back(d);
  }
  return report;
}

RateAuditReport rate_audit(const Trace& trace, double c, double slack) {
  RateAuditReport report;
  const auto& recs = trace.records();
  for (std::size_t i = 0; i + 1 < recs.size(); ++i) {
    const double v = recs[i].lyapunov;
    if (!(v > 0.0)) continue;
    const double ratio = recs[i + 1].lyapunov / v;
    ++report.checked;
    if (report.checked == 1 || ratio > report.worst_ratio) {
      report.worst_ratio = ratio;
      report.worst_k = recs[i].k;
    }
    if (!(ratio <= 1.0 - c + slack)) report.violations.push_back(recs[i].k);
  }
  return report;
}

bool CommunicationReport::passed() const {
  return std::all_of(workers.begin(), workers.end(), [](const CommunicationEntry& e) { return e.pass; });
}

CommunicationReport communication_audit(const Trace& trace, const std::vector<double>& smoothness, double eps1,
                          long k) {
  if (k < 1) throw PreconditionError("communication_audit: k must be >= 1");
  if (static_cast<long>(trace.size()) < k) {
    throw PreconditionError("communication_audit: trace has " + std::to_string(trace.size()) +
                            " records, need " + std::to_string(k));
  }
  const std::vector<long> counts = trace.transmissions_from_flags(k);
  if (counts.size() != smoothness.size()) {
    throw PreconditionError("communication_audit: " + std::to_string(smoothness.size()) +
                            " smoothness values for " + std::to_string(counts.size()) + " workers");
  }
  CommunicationReport report;
  report.k = k;
  const long bound = (k + 1) / 2;
  for (std::size_t m = 0; m < counts.size(); ++m) {
    CommunicationEntry e;
    e.worker = static_cast<int>(m) + 1;
    e.smoothness_sq = smoothness[m] * smoothness[m];
    e.eps1 = eps1;
    e.transmissions = counts[m];
    e.bound = bound;
    e.applies = e.smoothness_sq <= eps1;
    e.pass = !e.applies || e.transmissions <= bound;
    report.workers.push_back(e);
  }
  return report;
}

std::vector<ParameterFamily> parameter_families(const HyperParams& p, int censored) {
  require_rhos(p);
  if (!(p.L > 0.0)) throw ValidationError("L must be positive");
  const double r1 = p.rho1, r2 = p.rho2, r3 = p.rho3, L = p.L;
  const double mc = static_cast<double>(censored);
  const double prod = (1.0 + r1) * (1.0 + r2);
  std::vector<ParameterFamily> out;

  {
    ParameterFamily f;
    f.name = "eta1=(1-alpha*L)/(2*alpha)";
    const double a = p.alpha;
    f.eta1 = (1.0 - a * L) / (2.0 * a);
    f.alpha_lo = 1.0 / (2.0 * f.eta1 + L);
    f.alpha_hi = (1.0 + prod) / ((2.0 * f.eta1 + L) * prod);
    const double two_ae = 2.0 * a * f.eta1;
    f.beta_max = std::sqrt(two_ae / ((1.0 + 1.0 / r3) + (1.0 + 1.0 / r1) * (two_ae - 1.0 + a * L)));
    HyperParams q = p;
    q.eta1 = f.eta1;
    const double c0 = bracket(q);
    const double gamma = a / 2.0 * (1.0 + r3) + c0 * a * a * (1.0 + r1) * (1.0 + 1.0 / r2);
    const double num =
        f.eta1 - p.beta * p.beta * ((1.0 + 1.0 / r3) / (2.0 * a) + c0 * (1.0 + 1.0 / r1));
    f.eps1_max = censored == 0 ? std::numeric_limits<double>::infinity() : num / (mc * mc * gamma);
    out.push_back(f);
  }
  {
    ParameterFamily f;
    f.name = "alpha=1/L, eta1>0";
    f.eta1 = L / (4.0 * prod);
    f.alpha_lo = f.alpha_hi = 1.0 / L;
    const double e = f.eta1;
    f.beta_max = std::sqrt(2.0 * e / (2.0 * e * (1.0 + 1.0 / r1) + L * (1.0 + 1.0 / r3)));
    const double b2 = p.beta * p.beta;
    const double num = L * L * (2.0 * e - b2 * (L * (1.0 + 1.0 / r3) + 2.0 * e * (1.0 + 1.0 / r1)));
    const double den = L * (1.0 + r3) + 2.0 * e * (1.0 + r1) * (1.0 + 1.0 / r2);
    f.eps1_max = censored == 0 ? std::numeric_limits<double>::infinity() : num / (mc * mc * den);
    out.push_back(f);
  }
  return out;
}

namespace {

struct HbResult {
  Vector theta;
  long iterations = 0;
  bool converged = false;
};

HbResult long_heavy_ball(const LossModel& model, const FederatedDataset& fed, double L,
                         const FStarOptions& opts) {
  const auto n = static_cast<Eigen::Index>(model.parameter_count(fed.d));
  const double alpha = 1.0 / L;
  const double beta = 0.4;
  HbResult r;
  r.theta = Vector::Zero(n);
  Vector prev = r.theta;
  for (long k = 0; k < opts.budget; ++k) {
    const Vector g = global_gradient(model, fed, r.theta);
    r.iterations = k + 1;
    if (g.squaredNorm() < opts.grad_tol_sq) {
      r.converged = true;
      break;
    }
    Vector next = r.theta - alpha * g + beta * (r.theta - prev);
    if (!next.allFinite()) throw ConvergenceError("reference heavy ball diverged", g.squaredNorm());
    prev = std::move(r.theta);
    r.theta = std::move(next);
  }
  return r;
}

FStar lasso_reference(const LossModel& model, const FederatedDataset& fed, const FStarOptions& opts) {
  const Shard pooled = fed.pooled();
  const double L = global_smoothness(model, fed);
  const double thresh = static_cast<double>(fed.workers()) * model.lambda() / L;
  auto prox = [thresh](const Vector& v) {
    Vector out(v.size());
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      const double a = std::abs(v[i]) - thresh;
      out[i] = a > 0.0 ? std::copysign(a, v[i]) : 0.0;
    }
    return out;
  };
  Vector x = Vector::Zero(fed.d);
  Vector y = x;
  double t = 1.0;
  bool converged = false;
  for (long k = 0; k < opts.budget; ++k) {
    const Vector g = pooled.features.transpose() * (pooled.features * y - pooled.labels);
    Vector x_next = prox(y - g / L);
    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    const double moved = (x_next - x).squaredNorm() * L * L;
    y = x_next + ((t - 1.0) / t_next) * (x_next - x);
    x = std::move(x_next);
    t = t_next;
    if (moved < opts.grad_tol_sq) {
      converged = true;
      break;
    }
  }
  FStar fs;
  fs.value = global_objective(model, fed, x);
  fs.minimizer = x;
  fs.method = converged ? "proximal-gradient" : "proximal-gradient-budget";
  fs.approximate = true;
  return fs;
}

}  // namespace

FStar f_star_oracle(const LossModel& model, const FederatedDataset& fed, const FStarOptions& opts) {
  fed.validate();
  FStar fs;
  switch (model.kind()) {
    case ModelKind::Mlp:
      fs.best_seen = true;
      fs.method = "best-seen";
      fs.approximate = true;
      return fs;
    case ModelKind::Lasso:
      return lasso_reference(model, fed, opts);
    case ModelKind::LinearRegression:
      if (opts.method != FStarMethod::LongHeavyBall) {
        const Shard pooled = fed.pooled();
        const Matrix G = gram(pooled);
        const Vector b = pooled.features.transpose() * pooled.labels;
        Eigen::LDLT<Matrix> ldlt(G);
        Vector theta;
        const bool regular = ldlt.info() == Eigen::Success && ldlt.isPositive() &&
                             ldlt.vectorD().minCoeff() > 0.0 && ldlt.rcond() > 1e-13;
        if (regular) {
          theta = ldlt.solve(b);
          fs.method = "normal-equations";
        } else {
          theta = pooled.features.completeOrthogonalDecomposition().solve(pooled.labels);
          fs.method = "normal-equations-min-norm";
        }
        fs.value = global_objective(model, fed, theta);
        fs.minimizer = std::move(theta);
        return fs;
      }
      [[fallthrough]];
    case ModelKind::RidgeLogistic: {
      const double L = global_smoothness(model, fed);
      HbResult r = long_heavy_ball(model, fed, L, opts);
      fs.value = global_objective(model, fed, r.theta);
      fs.minimizer = std::move(r.theta);
      fs.method = "long-heavy-ball";
      fs.approximate = !r.converged;
      return fs;
    }
  }
  throw UnsupportedModelError("no reference optimum for this model");
}

}  // namespace chbsim
