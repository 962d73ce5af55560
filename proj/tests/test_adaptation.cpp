#include <dectrig/adaptation.hpp>
#include <dectrig/ode.hpp>
#include <dectrig/plant.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace dectrig;

namespace {

const Vector kNoInput = Vector::Zero(0);

auto decay() {
  return FunctionModel(1, 0, [](const Vector& x, const Vector&) -> Vector { return -x; });
}

// Hides the analytic directional derivative so the finite-difference path is used.
struct OpaqueTank {
  QuadrupleTank inner;
  int state_dim() const { return 6; }
  int input_dim() const { return 2; }
  Vector derivative(const Vector& x, const Vector& u) const { return inner.derivative(x, u); }
};

// Oracle for equalization: solve G_i = G_{i+1} (i < N) and sum(theta) = 0 as a dense linear system.
Vector theta_by_linear_solve(const Vector& c) {
  const Eigen::Index n = c.size();
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(n, n);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
  for (Eigen::Index i = 0; i + 1 < n; ++i) {
    M(i, i) = 1.0;
    M(i, i + 1) = -1.0;
    rhs(i) = c(i) - c(i + 1);
  }
  M.row(n - 1).setOnes();
  return M.fullPivLu().solve(rhs);
}

TriggerConfig singletons(int n, double sigma, double tau_min) {
  TriggerConfig t;
  t.sigma = sigma;
  t.tau_min = tau_min;
  t.grouping = singleton_grouping(n);
  return t;
}

}  // namespace

TEST(TaylorEstimates, ZeroHorizon) {
  const auto est = taylor_estimates(decay(), make_vector({2.0}), kNoInput, 2, 0.0);
  EXPECT_EQ(est.state(0), 2.0);
  EXPECT_EQ(est.error(0), 0.0);
}

TEST(TaylorEstimates, ConstantDerivativeIsExact) {
  auto m = FunctionModel(2, 0, [](const Vector&, const Vector&) { return make_vector({3.0, -1.0}); });
  const auto est = taylor_estimates(m, make_vector({1.0, 1.0}), kNoInput, 1, 0.5);
  EXPECT_EQ(est.state, make_vector({2.5, 0.5}));
  EXPECT_EQ(est.error, make_vector({-1.5, 0.5}));
}

TEST(TaylorEstimates, FirstOrderExponential) {
  const double tau = 0.01;
  const auto est = taylor_estimates(decay(), make_vector({1.0}), kNoInput, 1, tau);
  EXPECT_DOUBLE_EQ(est.state(0), 0.99);
  const double err = std::abs(est.state(0) - std::exp(-tau));
  EXPECT_NEAR(err, 4.98337e-5, 1e-9);
  EXPECT_NEAR(err / (tau * tau), 0.5, 0.01);
}

TEST(TaylorEstimates, ErrorIsNegatedTail) {
  const auto est = taylor_estimates(decay(), make_vector({1.0}), kNoInput, 2, 0.1);
  EXPECT_DOUBLE_EQ(est.error(0), 1.0 - est.state(0));
  EXPECT_NEAR(est.state(0), 1.0 - 0.1 + 0.005, 1e-12);
}

TEST(TaylorEstimates, OrderRatiosOnExponential) {
  for (int q : {1, 2}) {
    double err[3];
    for (int k = 0; k < 3; ++k) {
      const double tau = 0.02 / std::pow(2.0, k);
      err[k] = std::abs(taylor_estimates(decay(), make_vector({1.0}), kNoInput, q, tau).state(0) - std::exp(-tau));
    }
    const double expected = std::pow(2.0, q + 1);
    EXPECT_NEAR(err[0] / err[1], expected, 0.1 * expected) << "q = " << q;
    EXPECT_NEAR(err[1] / err[2], expected, 0.1 * expected) << "q = " << q;
  }
}

TEST(TaylorEstimates, SecondOrderNeedsCapability) {
  AdaptationConfig cfg;
  cfg.finite_difference_fallback = false;
  EXPECT_THROW(taylor_estimates(decay(), make_vector({1.0}), kNoInput, 2, 0.1, cfg), CapabilityError);
  EXPECT_NO_THROW(taylor_estimates(decay(), make_vector({1.0}), kNoInput, 1, 0.1, cfg));
  EXPECT_THROW(taylor_estimates(decay(), make_vector({1.0}), kNoInput, 3, 0.1), PreconditionError);
}

TEST(TaylorEstimates, FiniteDifferenceAgreesWithAnalyticTank) {
  const auto p = QuadrupleTankParams::reference();
  const Setpoint sp = equilibrium_inputs(p, 15.0, 13.0);
  const QuadrupleTank tank(p, sp);
  const OpaqueTank opaque{tank};
  const Vector x = make_vector({12.0, 10.0, 5.0, 7.0, 0.0, 0.0});
  const Vector u = feedback_law(controller_gains(p), sp, x);
  const auto a = taylor_estimates(tank, x, u, 2, 0.05);
  const auto b = taylor_estimates(opaque, x, u, 2, 0.05);
  EXPECT_LT((a.state - b.state).norm(), 1e-9);
}

TEST(SolveTheta, AlreadyEqualized) {
  const ThetaVector th = solve_theta({make_vector({1.5, 1.5, 1.5})});
  EXPECT_EQ(th.values, Vector::Zero(3));
}

TEST(SolveTheta, TwoNodes) {
  const Vector c = make_vector({4.0, 2.0});
  const ThetaVector th = solve_theta({c});
  const Vector oracle = theta_by_linear_solve(c);
  EXPECT_NEAR(th.values(0), oracle(0), 1e-12);
  EXPECT_NEAR(th.values(1), oracle(1), 1e-12);
  EXPECT_EQ(th.values, make_vector({1.0, -1.0}));
}

TEST(SolveTheta, ThreeNodes) {
  const Vector c = make_vector({3.0, 0.0, 0.0});
  const ThetaVector th = solve_theta({c});
  const Vector oracle = theta_by_linear_solve(c);
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(th.values(i), oracle(i), 1e-12);
  EXPECT_EQ(th.values, make_vector({2.0, -1.0, -1.0}));
}

TEST(SolveTheta, NonFiniteIsNumericError) {
  EXPECT_THROW(solve_theta({make_vector({1.0, std::nan("")})}), NumericError);
  EXPECT_THROW(solve_theta({Vector(0)}), PreconditionError);
}

TEST(SolveTheta, RandomProperties) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> mag(-6.0, 6.0);
  std::normal_distribution<double> d(0.0, 1.0);
  for (int n = 0; n < 5000; ++n) {
    const int N = std::uniform_int_distribution<int>(1, 10)(rng);
    Vector c(N);
    const double scale = std::pow(10.0, mag(rng));
    for (int i = 0; i < N; ++i) c(i) = scale * d(rng);
    const ThetaVector th = solve_theta({c});
    const double cmax = c.cwiseAbs().maxCoeff();
    EXPECT_LE(std::abs(th.sum()), 1e-12 * N * cmax);
    const Vector G = c - th.values;
    EXPECT_LE(G.maxCoeff() - G.minCoeff(), 1e-10 * std::max(1.0, cmax));
    const Vector oracle = theta_by_linear_solve(c);
    for (int i = 0; i < N; ++i) EXPECT_NEAR(th.values(i), oracle(i), 1e-12 * std::max(1.0, cmax));
  }
}

TEST(AdaptTheta, EqualGapsGiveZeroTheta) {
  // No motion and equal distances to the center: c_i = -sigma for both nodes at every horizon.
  auto still = FunctionModel(2, 0, [](const Vector& x, const Vector&) -> Vector { return Vector::Zero(x.size()); });
  const TriggerConfig trig = singletons(2, 0.01, 1e-4);
  const auto out = adapt_theta_traced(still, make_vector({1.0, -1.0}), kNoInput, {0.0, 0.3}, AdaptationConfig{}, trig);
  EXPECT_EQ(out.step, AdaptationStep::Equalized);
  EXPECT_EQ(out.theta.values, Vector::Zero(2));
}

namespace {

// x' = (1, 0) from x_k = (1, 0), center 0, singleton nodes:
// c1(tau) = tau^2 - sigma (1 + tau)^2, c2(tau) = 0, theta = (c1 / 2, -c1 / 2).
// Node 2 sits at its center, so theta_2 < 0 (c1 > 0) is an immediate violation.
auto drift() {
  return FunctionModel(2, 0, [](const Vector&, const Vector&) { return make_vector({1.0, 0.0}); });
}

double c1(double tau, double sigma) { return tau * tau - sigma * (1.0 + tau) * (1.0 + tau); }

}  // namespace

TEST(AdaptTheta, LongPreviousIntervalFallsBackToTauMin) {
  const double sigma = 0.25;
  const TriggerConfig trig = singletons(2, sigma, 0.01);
  const Vector x = make_vector({1.0, 0.0});
  // Step 1 at t_e = 10: c1 = 100 - 0.25 * 121 > 0, infeasible.
  ASSERT_GT(c1(10.0, sigma), 0.0);
  const auto out = adapt_theta_traced(drift(), x, kNoInput, {0.0, 10.0}, AdaptationConfig{}, trig);
  EXPECT_EQ(out.step, AdaptationStep::TauMinRetry);
  EXPECT_EQ(out.t_e, 0.01);
  const double half = c1(0.01, sigma) / 2.0;
  EXPECT_NEAR(out.theta.values(0), half, 1e-15);
  EXPECT_NEAR(out.theta.values(1), -half, 1e-15);
  EXPECT_TRUE(theta_feasible(x, out.theta, trig));
}

TEST(AdaptTheta, InfeasibleAtBothHorizonsGivesZero) {
  const double sigma = 0.25;
  const TriggerConfig trig = singletons(2, sigma, 5.0);
  ASSERT_GT(c1(5.0, sigma), 0.0);
  const auto out = adapt_theta_traced(drift(), make_vector({1.0, 0.0}), kNoInput, {0.0, 10.0}, AdaptationConfig{}, trig);
  EXPECT_EQ(out.step, AdaptationStep::ZeroFallback);
  EXPECT_EQ(out.theta.values, Vector::Zero(2));
  EXPECT_EQ(out.theta.sum(), 0.0);
}

TEST(AdaptTheta, FirstUpdateUsesTauMin) {
  const TriggerConfig trig = singletons(2, 0.25, 0.01);
  const auto out = adapt_theta_traced(drift(), make_vector({1.0, 0.0}), kNoInput, {std::nullopt, 0.0},
                                      AdaptationConfig{}, trig);
  EXPECT_EQ(out.step, AdaptationStep::Equalized);
  EXPECT_EQ(out.t_e, 0.01);
}

TEST(AdaptTheta, FixedRuleUsesConfiguredHorizon) {
  const TriggerConfig trig = singletons(2, 0.25, 0.01);
  AdaptationConfig cfg;
  cfg.te_rule = EqualizationRule::Fixed;
  cfg.te_fixed_seconds = 0.2;
  const auto out = adapt_theta_traced(drift(), make_vector({1.0, 0.0}), kNoInput, {0.0, 10.0}, cfg, trig);
  EXPECT_EQ(out.t_e, 0.2);
  EXPECT_NEAR(out.theta.values(0), c1(0.2, 0.25) / 2.0, 1e-15);
  cfg.te_fixed_seconds = 0.0;
  EXPECT_FALSE(cfg.violations().empty());
}

TEST(AdaptTheta, OutputsSumToZeroOnTankStates) {
  const auto p = QuadrupleTankParams::reference();
  const Setpoint sp = equilibrium_inputs(p, 15.0, 13.0);
  const QuadrupleTank tank(p, sp);
  const auto gains = controller_gains(p);
  TriggerConfig trig;
  trig.sigma = 0.0054 * 0.0054;
  trig.tau_min = 1e-4;
  trig.grouping = {{0, 4}, {1, 5}, {2}, {3}};
  trig.center = sp.state();
  std::mt19937_64 rng(10);
  std::uniform_real_distribution<double> lev(0.5, 25.0), integ(-10.0, 10.0), interval(1e-4, 5.0);
  for (int q : {1, 2}) {
    AdaptationConfig cfg;
    cfg.q = q;
    for (int n = 0; n < 500; ++n) {
      const Vector x = make_vector({lev(rng), lev(rng), lev(rng), lev(rng), integ(rng), integ(rng)});
      const auto out =
          adapt_theta_traced(tank, x, feedback_law(gains, sp, x), {0.0, interval(rng)}, cfg, trig);
      EXPECT_TRUE(out.theta.sums_to_zero()) << out.theta.sum();
      EXPECT_TRUE(out.step == AdaptationStep::ZeroFallback || theta_feasible(x, out.theta, trig));
    }
  }
}
