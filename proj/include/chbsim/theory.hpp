#pragma once

#include <optional>
#include <string>
#include <vector>

#include "chbsim/data.hpp"
#include "chbsim/engine.hpp"
#include "chbsim/models.hpp"
#include "chbsim/trace.hpp"

namespace chbsim {

/// Descent coefficients of the Lyapunov function
///   V(theta^k) = f(theta^k) - f* + eta1 |theta^k - theta^{k-1}|^2,
/// with c0 = eta1 - (1 - alpha L) / (2 alpha):
///   sigma0 = alpha/2 - c0 alpha^2 (1 + rho1)(1 + rho2)
///   gamma  = alpha/2 (1 + rho3) + c0 alpha^2 (1 + rho1)(1 + 1/rho2)
///   sigma1 = -gamma Mc^2 eps1 - beta^2/(2 alpha) (1 + 1/rho3) - c0 beta^2 (1 + 1/rho1) + eta1
/// where Mc is the number of censored workers in the iteration.
struct ConditionConstants {
  double sigma0 = 0.0;
  double sigma1 = 0.0;
  double gamma = 0.0;
};

ConditionConstants condition_constants(const HyperParams& p, int censored);

struct ConditionReport {
  double sigma0 = 0.0;
  double sigma1_worst = 0.0;  ///< at Mc = M
  double gamma = 0.0;
  bool feasible = false;
  std::vector<std::string> binding;  ///< names of violated conditions
};

ConditionReport condition_report(const HyperParams& p, int workers);

/// The conditions with eta1 = (1 - alpha L)/(2 alpha):
///   alpha <= 1/L, beta <= sqrt((1 - alpha L)/(1 + 1/rho3)),
///   eps1 <= ((1 - alpha L) - beta^2 (1 + 1/rho3)) / (alpha^2 (1 + rho3) Mc^2).
bool check_simplified(const HyperParams& p, int censored);

/// Largest eps1 admitted by check_simplified (may be negative when beta is too large).
double simplified_eps1_bound(const HyperParams& p, int censored);

/// alpha = (1-delta)/L, eta1 = (1-alpha L)/(2 alpha), rho3 = 1,
/// eps1 = (1-alpha L)(1-alpha mu)/(4 alpha^2 M^2), beta = sqrt((1-alpha L)(1-alpha mu))/2.
HyperParams rate_recipe(double L, double mu, double delta, int workers);

/// c = min(2 sigma0 mu, sigma1(Mc_max)/eta1); must lie in (0, 1).
double rate_constant(const HyperParams& p, double mu, int censored_max);

struct LyapunovSample {
  long k = 0;
  double value = 0.0;
  double f_gap = 0.0;
  double momentum_term = 0.0;
};

/// Throws ValidationError when the value falls below -1e-9 (f_star inconsistent).
LyapunovSample lyapunov(double f_val, double f_star, const Vector& theta_curr,
                        const Vector& theta_prev, double eta1);

struct DescentViolation {
  long k = 0;
  double lhs = 0.0;  ///< V(k+1) - V(k)
  double rhs = 0.0;  ///< -sigma0 |grad|^2 - sigma1(Mc^k) |step|^2 + slack
};

struct DescentAuditReport {
  long checked = 0;
  std::vector<DescentViolation> violations;
  bool passed() const { return violations.empty(); }
};

/// Checks V(k+1) - V(k) <= -sigma0 |grad f(theta^k)|^2 - sigma1(Mc^k) |theta^k - theta^{k-1}|^2
/// + slack |V(k)| along the trace. V is rebuilt from each record's f_gap and
/// step length with p.eta1; Mc^k is read from the transmit flags.
DescentAuditReport descent_audit(const Trace& trace, const HyperParams& p,
                                 double slack = 1e-9);

struct RateAuditReport {
  long checked = 0;
  double worst_ratio = 0.0;
  long worst_k = 0;
  std::vector<long> violations;  ///< k with V(k+1)/V(k) > 1 - c + slack
  bool passed() const { return violations.empty(); }
};

RateAuditReport rate_audit(const Trace& trace, double c, double slack = 1e-9);

struct CommunicationEntry {
  int worker = 0;
  double smoothness_sq = 0.0;
  double eps1 = 0.0;
  long transmissions = 0;
  long bound = 0;
  bool applies = false;  ///< L_m^2 <= eps1
  bool pass = true;
};

struct CommunicationReport {
  long k = 0;
  std::vector<CommunicationEntry> workers;
  bool passed() const;
};

/// For each worker with L_m^2 <= eps1, checks S_m(k) <= ceil(k/2) using the
/// first k transmit flags of the trace.
CommunicationReport communication_audit(const Trace& trace, const std::vector<double>& smoothness,
                          double eps1, long k);

/// Parameter families for which sigma0, sigma1 >= 0 at a given Mc.
struct ParameterFamily {
  std::string name;
  double eta1 = 0.0;
  double alpha_lo = 0.0, alpha_hi = 0.0;
  double beta_max = 0.0;
  double eps1_max = 0.0;
};

/// eta1 = (1 - alpha L)/(2 alpha) at the given alpha, and the alpha = 1/L
/// family with eta1 = L / (4 (1+rho1)(1+rho2)) (half the admissible maximum).
std::vector<ParameterFamily> parameter_families(const HyperParams& p, int censored);

enum class FStarMethod { Auto, NormalEquations, LongHeavyBall };

struct FStarOptions {
  FStarMethod method = FStarMethod::Auto;
  long budget = 1000000;
  double grad_tol_sq = 1e-20;
};

/// Reference optimum. Least squares: pooled normal equations (minimum-norm
/// solution when the Gram is singular). Ridge logistic: heavy ball with
/// alpha = 1/L, beta = 0.4 until |grad|^2 < grad_tol_sq or the budget runs out.
/// Lasso: proximal gradient with Nesterov extrapolation, always flagged
/// approximate (method "proximal-gradient-budget" when the budget runs out).
/// Mlp: best-seen mode.
FStar f_star_oracle(const LossModel& model, const FederatedDataset& fed,
                    const FStarOptions& opts = {});

}  // namespace chbsim
