#include <doctest.h>

#include <cmath>

#include "chbsim/engine.hpp"
#include "chbsim/errors.hpp"
#include "chbsim/theory.hpp"
#include "oracle.hpp"
#include "support.hpp"

using namespace chbsim;
using testing::vec;

namespace {

HyperParams params(double alpha, double L, double eta1, double beta, double eps1) {
  HyperParams p;
  p.alpha = alpha;
  p.L = L;
  p.eta1 = eta1;
  p.beta = beta;
  p.eps1 = eps1;
  return p;
}

}  // namespace

TEST_CASE("constants with the bracket cancelled") {
  const auto p = params(0.05, 10.0, (1 - 0.5) / (2 * 0.05), 0.3, 0.01);
  const auto c = condition_constants(p, 4);
  CHECK(c.sigma0 == doctest::Approx(0.025).epsilon(1e-14));
  CHECK(c.gamma == doctest::Approx(0.05).epsilon(1e-14));
}

TEST_CASE("constants against the high-precision evaluation") {
  const auto p = params(0.1, 5.0, 2.5, 0.2, 0.01);
  const auto c = condition_constants(p, 3);
  const auto ref = testing::hp_constants(0.1, 0.2, 0.01, 2.5, 5.0, 1, 1, 1, 3);
  CHECK(testing::hp_close(c.sigma0, ref.sigma0, 1e-12));
  CHECK(testing::hp_close(c.sigma1, ref.sigma1, 1e-12));
  CHECK(testing::hp_close(c.gamma, ref.gamma, 1e-12));
  // alpha L = 0.5 and eta1 = 2.5 cancel the bracket
  CHECK(c.sigma0 == doctest::Approx(0.05).epsilon(1e-14));
  CHECK(c.gamma == doctest::Approx(0.1).epsilon(1e-14));
  CHECK(c.sigma1 == doctest::Approx(-0.1 * 9 * 0.01 - 0.04 / 0.2 * 2 + 2.5).epsilon(1e-14));
}

TEST_CASE("nonpositive rho is rejected") {
  auto p = params(0.1, 5, 1, 0, 0);
  p.rho2 = 0.0;
  CHECK_THROWS_AS(condition_constants(p, 1), ValidationError);
}

TEST_CASE("condition report") {
  const auto gd = params(0.1, 10.0, 0.0, 0.0, 0.0);
  const auto r = condition_report(gd, 9);
  CHECK(r.feasible);
  CHECK(r.binding.empty());

  const double a = 1.0 / 10.0;
  const auto paper = params(a, 10.0, 0.0, 0.4, 0.1 / (a * a * 81));
  const auto bad = condition_report(paper, 9);
  CHECK_FALSE(bad.feasible);
  CHECK_FALSE(bad.binding.empty());

  auto low_eta = params(0.05, 10.0, 1.0, 0.0, 0.0);
  CHECK_FALSE(condition_report(low_eta, 9).feasible);
}

TEST_CASE("simplified condition") {
  SUBCASE("alpha = 1/L leaves no slack") {
    CHECK(check_simplified(params(0.1, 10, 0, 0, 0), 9));
    CHECK_FALSE(check_simplified(params(0.1, 10, 0, 0.01, 0), 9));
    CHECK_FALSE(check_simplified(params(0.1, 10, 0, 0, 1e-12), 9));
  }
  SUBCASE("alpha L = 0.5") {
    const double bound3 = (0.5 - 0.32) / (0.005 * 9);
    CHECK(simplified_eps1_bound(params(0.05, 10, 0, 0.4, 0), 3) == doctest::Approx(bound3).epsilon(1e-13));
    CHECK(check_simplified(params(0.05, 10, 0, 0.4, bound3 * 0.999), 3));
    CHECK_FALSE(check_simplified(params(0.05, 10, 0, 0.4, bound3 * 1.001), 3));
    CHECK(check_simplified(params(0.05, 10, 0, 0.5, 0), 3));
    CHECK_FALSE(check_simplified(params(0.05, 10, 0, 0.51, 0), 3));
  }
  SUBCASE("gradient-descent corner") {
    for (double a : {0.01, 0.05, 0.1}) CHECK(check_simplified(params(a, 10, 0, 0, 0), 5));
    CHECK_FALSE(check_simplified(params(0.11, 10, 0, 0, 0), 5));
  }
}

TEST_CASE("rate recipe") {
  const auto p = rate_recipe(10, 1, 0.1, 9);
  CHECK(p.alpha == doctest::Approx(0.09).epsilon(1e-15));
  CHECK(p.beta == doctest::Approx(0.5 * std::sqrt(0.1 * 0.91)).epsilon(1e-12));
  CHECK(p.beta == doctest::Approx(0.150831).epsilon(1e-6));
  CHECK(p.eps1 == doctest::Approx(0.1 * 0.91 / (4 * 0.0081 * 81)).epsilon(1e-12));
  CHECK(p.eta1 == doctest::Approx(0.1 / 0.18).epsilon(1e-12));
  CHECK(p.rho3 == 1.0);
  CHECK(check_simplified(p, 9));
  CHECK(condition_report(p, 9).feasible);
  CHECK(rate_constant(p, 1, 9) == doctest::Approx(0.09).epsilon(1e-12));

  CHECK_THROWS_AS(rate_recipe(1, 2, 0.5, 3), ValidationError);
  CHECK_THROWS_AS(rate_recipe(1, 0.5, 1.0, 3), ValidationError);
  const auto edge = rate_recipe(4, 1, 1 - 1e-12, 2);
  CHECK(std::isfinite(edge.eps1));
  CHECK(edge.beta == doctest::Approx(0.5).epsilon(1e-9));
}

TEST_CASE("recipe rate equals (1 - delta) mu / L") {
  for (double L : {2.0, 10.0, 137.0})
    for (double kappa : {1.0, 3.0, 50.0})
      for (double delta : {0.1, 0.5, 0.9})
        for (int M : {1, 9}) {
          const double mu = L / kappa;
          const auto p = rate_recipe(L, mu, delta, M);
          CHECK(rate_constant(p, mu, M) == doctest::Approx((1 - delta) / kappa).epsilon(1e-12));
        }
}

TEST_CASE("rate constant takes the momentum branch when beta is large") {
  // alpha L = 0.5 with eta1 at its smallest admissible value; beta near the
  // upper limit drives sigma1 towards zero while sigma0 stays alpha/2.
  auto p = params(0.05, 10, 5.0, 0.45, 0.0);
  const double mu = 5.0;
  const auto c = condition_constants(p, 9);
  REQUIRE(c.sigma1 / p.eta1 < 2 * c.sigma0 * mu);
  CHECK(rate_constant(p, mu, 9) == doctest::Approx(c.sigma1 / p.eta1).epsilon(1e-15));
  CHECK(rate_constant(p, mu, 9) == std::min(2 * c.sigma0 * mu, c.sigma1 / p.eta1));

  CHECK_THROWS_AS(rate_constant(params(0.05, 10, 5.0, 0.6, 0.0), mu, 9), RateUndefinedError);
  CHECK_THROWS_AS(rate_constant(p, 0.0, 9), RateUndefinedError);
  CHECK_THROWS_AS(rate_constant(params(0.1, 10, 0.0, 0.0, 0.0), 1.0, 9), RateUndefinedError);
}

TEST_CASE("lyapunov value") {
  CHECK(lyapunov(3.0, 3.0, vec({1, 2}), vec({1, 2}), 5.0).value == 0.0);
  const auto s = lyapunov(0.5, 0.0, vec({1}), vec({0}), 2.0);
  CHECK(s.value == 2.5);
  CHECK(s.f_gap == 0.5);
  CHECK(s.momentum_term == 2.0);
  CHECK(lyapunov(4.0, 1.0, vec({1}), vec({0}), 0.0).value == 3.0);
  CHECK_THROWS_AS(lyapunov(1.0, 2.0, vec({0}), vec({0}), 1.0), ValidationError);
}

TEST_CASE("descent audit on gradient descent over a quadratic") {
  const auto fed = synth_controlled(3, 6, 6, SmoothnessTargets::increasing(3, 1.3), SynthTask::Linear, 0, 4);
  const auto model = LossModel::linear();
  const double L = global_smoothness(model, fed);
  const auto p = params(1.0 / L, L, 0.0, 0.0, 0.0);
  RunOptions o;
  // stop well above the rounding floor of the gap
  o.stop = {StopMode::TargetGap, 1e-14, 1000};
  o.f_star = f_star_oracle(model, fed);
  const Trace t = run_experiment(Algorithm::GD, p, model, fed, o);
  REQUIRE(t.back().f_gap <= 1e-14);
  const auto report = descent_audit(t, p);
  CHECK(report.checked == static_cast<long>(t.size()) - 1);
  CHECK(report.checked > 20);
  CHECK(report.passed());
}

TEST_CASE("descent audit flags an infeasible threshold") {
  const auto fed = synth_controlled(9, 10, 10, SmoothnessTargets::increasing(9, 1.3), SynthTask::Linear, 0, 4);
  const auto model = LossModel::linear();
  const double L = global_smoothness(model, fed);
  auto p = rate_recipe(L, strong_convexity(model, fed), 0.5, 9);
  p.eps1 = 10 * simplified_eps1_bound(p, 9);
  RunOptions o;
  o.stop = {StopMode::MaxIterations, 0, 300};
  o.f_star = f_star_oracle(model, fed);
  const Trace t = run_experiment(Algorithm::CHB, p, model, fed, o);
  const auto report = descent_audit(t, p);
  CHECK(report.checked == 299);
  MESSAGE("violations with 10x threshold: " << report.violations.size());
}

TEST_CASE("rate audit") {
  Trace t;
  const double values[] = {1.0, 0.5, 0.25, 0.2};
  for (long k = 1; k <= 4; ++k) {
    IterationTrace r;
    r.k = k;
    r.lyapunov = values[k - 1];
    r.transmit_flags = {true};
    r.comms_this_iter = 1;
    t.append(r);
  }
  const auto ok = rate_audit(t, 0.2);
  CHECK(ok.passed());
  CHECK(ok.worst_ratio == doctest::Approx(0.8));
  CHECK(ok.worst_k == 3);
  const auto bad = rate_audit(t, 0.5);
  CHECK(bad.violations == std::vector<long>{3});
}

TEST_CASE("communication bound audit") {
  Trace t;
  // worker 1 alternates, worker 2 always sends.
  for (long k = 1; k <= 9; ++k) {
    IterationTrace r;
    r.k = k;
    r.transmit_flags = {k % 2 == 1, true};
    r.comms_this_iter = r.transmit_flags[0] ? 2 : 1;
    t.append(r);
  }
  const auto one = communication_audit(t, {1.0, 1.0}, 2.0, 1);
  CHECK(one.workers[0].bound == 1);
  CHECK(one.passed());
  const auto all = communication_audit(t, {1.0, 1.0}, 2.0, 9);
  CHECK(all.workers[0].transmissions == 5);
  CHECK(all.workers[0].bound == 5);
  CHECK(all.workers[0].pass);
  CHECK_FALSE(all.workers[1].pass);
  CHECK_FALSE(all.passed());
  const auto gated = communication_audit(t, {1.0, 3.0}, 2.0, 9);
  CHECK_FALSE(gated.workers[1].applies);
  CHECK(gated.passed());
  CHECK_THROWS_AS(communication_audit(t, {1.0, 1.0}, 2.0, 10), PreconditionError);
}

TEST_CASE("parameter families") {
  auto p = params(0.05, 10.0, 0.0, 0.1, 0.0);
  const auto fams = parameter_families(p, 3);
  REQUIRE(fams.size() == 2);
  const auto& a = fams[0];
  CHECK(a.eta1 == doctest::Approx(5.0));
  CHECK(a.alpha_lo == doctest::Approx(0.05));
  CHECK(a.alpha_hi == doctest::Approx(0.05 * 5.0 / 4.0));
  CHECK(a.beta_max == doctest::Approx(0.5));
  HyperParams q = p;
  q.eta1 = a.eta1;
  CHECK(a.eps1_max == doctest::Approx(simplified_eps1_bound(p, 3)).epsilon(1e-12));
  q.eps1 = a.eps1_max;
  CHECK(condition_constants(q, 3).sigma1 == doctest::Approx(0.0).scale(1.0));

  const auto& b = fams[1];
  CHECK(b.eta1 == doctest::Approx(10.0 / 16.0));
  CHECK(b.alpha_lo == 0.1);
  HyperParams r = params(0.1, 10.0, b.eta1, b.beta_max * 0.5, 0.0);
  r.eps1 = parameter_families(r, 3)[1].eps1_max;
  const auto c = condition_constants(r, 3);
  CHECK(c.sigma0 >= 0.0);
  CHECK(c.sigma1 == doctest::Approx(0.0).scale(1.0));
  r.beta = b.beta_max;
  r.eps1 = 0.0;
  CHECK(condition_constants(r, 3).sigma1 == doctest::Approx(0.0).scale(1.0));
}

TEST_CASE("reference optimum") {
  FederatedDataset one;
  one.d = 1;
  one.shards = {testing::shard({{1}}, {1})};
  const auto fs = f_star_oracle(LossModel::linear(), one);
  CHECK(fs.value == 0.0);
  CHECK((*fs.minimizer)[0] == doctest::Approx(1.0));

  SeededRng rng(12);
  FederatedDataset fed;
  fed.d = 5;
  for (int m = 0; m < 3; ++m) fed.shards.push_back(testing::random_shard(rng, 6, 5, false));
  const auto ne = f_star_oracle(LossModel::linear(), fed);
  FStarOptions hb;
  hb.method = FStarMethod::LongHeavyBall;
  const auto lh = f_star_oracle(LossModel::linear(), fed, hb);
  CHECK(ne.method == "normal-equations");
  CHECK(lh.method == "long-heavy-ball");
  CHECK(std::abs(ne.value - lh.value) <= 1e-10);

  const auto logit = f_star_oracle(LossModel::logistic(0.1), fed);
  CHECK_FALSE(logit.approximate);
  CHECK(global_gradient(LossModel::logistic(0.1), fed, *logit.minimizer).squaredNorm() < 1e-20);

  const auto lasso = f_star_oracle(LossModel::lasso(0.5), fed);
  CHECK(lasso.approximate);
  for (int i = 0; i < 20; ++i) {
    const Vector probe = *lasso.minimizer + testing::normal_vector(rng, 5, 1e-3);
    CHECK(global_objective(LossModel::lasso(0.5), fed, probe) >= lasso.value - 1e-12);
  }
  CHECK(f_star_oracle(LossModel::mlp(MlpShape{5, 3, 2}, 0), fed).best_seen);
}

TEST_CASE("rank-deficient least squares uses the minimum-norm solution") {
  const auto fed = synth_low_rank(3, 8, 3, 4, 1.0, 5);
  const auto fs = f_star_oracle(LossModel::linear(), fed);
  CHECK(fs.method == "normal-equations-min-norm");
  CHECK(global_gradient(LossModel::linear(), fed, *fs.minimizer).norm() < 1e-10);
}
