#include "lqrlab/adp.hpp"

#include <algorithm>
#include <cmath>

#include <gtest/gtest.h>

#include "lqrlab/errors.hpp"
#include "lqrlab/riccati.hpp"
#include "oracles.hpp"

namespace lqrlab {
namespace {

using test::golden_ratio;

MatrixXd scalar(double v) { return MatrixXd::Constant(1, 1, v); }
VectorXd vscalar(double v) { return VectorXd::Constant(1, v); }

QuadraticQ make_q(const MatrixXd& W, Eigen::Index d, double offset = 0.0) {
  QuadraticQ q;
  q.W = W;
  q.state_dim = d;
  q.offset = offset;
  return q;
}

QuadraticQ golden_q() {
  return q_from_model(LinearSystem(scalar(1), scalar(1)), scalar(1), scalar(1),
                      scalar(golden_ratio()));
}

LqrInstance scalar_instance(double a, double b, double noise_var, int L,
                            double x0 = 1.0) {
  return LqrInstance(LinearSystem(scalar(a), scalar(b), scalar(noise_var)),
                     QuadraticCost(scalar(1), scalar(1)), vscalar(x0), L);
}

GTEST_TEST(QEvalTest, Examples) {
  const QuadraticQ id = make_q(MatrixXd::Identity(3, 3), 2);
  EXPECT_EQ(q_eval(id, (VectorXd(2) << 1, 0).finished(), vscalar(1)), 2.0);
  const QuadraticQ c = make_q(MatrixXd::Zero(2, 2), 1, 3.5);
  EXPECT_EQ(q_eval(c, vscalar(-7), vscalar(2)), 3.5);
  EXPECT_NEAR(q_eval(golden_q(), vscalar(1), vscalar(0)), 1 + golden_ratio(), 1e-12);
}

GTEST_TEST(GreedyGainTest, Examples) {
  MatrixXd W = MatrixXd::Identity(3, 3);
  EXPECT_EQ(greedy_gain(make_q(W, 2)), MatrixXd::Zero(1, 2));
  EXPECT_NEAR(greedy_gain(golden_q())(0, 0), 0.6180339887498949, 1e-12);
  W(2, 2) = -1;
  EXPECT_THROW(greedy_gain(make_q(W, 2)), NonExtractablePolicy);
  W(2, 2) = 0;
  EXPECT_THROW(greedy_gain(make_q(W, 2)), NonExtractablePolicy);
}

GTEST_TEST(ValueFromQTest, Examples) {
  const MatrixXd W = (MatrixXd(3, 3) << 2, 0.5, 0, 0.5, 3, 0, 0, 0, 1).finished();
  const QuadraticValue v = value_from_q(make_q(W, 2, 1.25));
  EXPECT_EQ(v.P, W.topLeftCorner(2, 2));
  EXPECT_EQ(v.offset, 1.25);
  EXPECT_NEAR(value_from_q(golden_q()).P(0, 0), golden_ratio(), 1e-10);

  // W_xx = W_xu W_uu⁻¹ W_ux.
  const MatrixXd Wd = (MatrixXd(2, 2) << 4, 2, 2, 1).finished();
  EXPECT_NEAR(value_from_q(make_q(Wd, 1)).P(0, 0), 0.0, 1e-15);
}

GTEST_TEST(SchurConsistencyTest, RandomQuadratics) {
  Rng rng(10);
  for (int trial = 0; trial < 10; ++trial) {
    MatrixXd L(5, 5);
    for (int i = 0; i < 5; ++i)
      for (int j = 0; j < 5; ++j) L(i, j) = rng.normal();
    const QuadraticQ q = make_q(L * L.transpose() + 0.1 * MatrixXd::Identity(5, 5), 3,
                                rng.normal());
    const MatrixXd K = greedy_gain(q);
    const QuadraticValue v = value_from_q(q);
    for (int i = 0; i < 100; ++i) {
      const VectorXd x = rng.normal_vector(3);
      const double lhs = q_eval(q, x, -K * x);
      const double rhs = x.dot(v.P * x) + v.offset;
      EXPECT_NEAR(lhs, rhs, 1e-10 * (1 + std::abs(rhs)));
      // −Kx minimizes over u.
      const VectorXd du = 0.1 * rng.normal_vector(2);
      EXPECT_GE(q_eval(q, x, -K * x + du), lhs - 1e-12);
    }
  }
}

GTEST_TEST(QLearningStepTest, ZeroStepUnchanged) {
  const QuadraticQ q = golden_q();
  const QuadraticQ next =
      q_learning_step(q, {vscalar(1), vscalar(0.3), 2.0, vscalar(0.5)}, 0.0, 0.9);
  EXPECT_EQ(next.W, q.W);
  EXPECT_EQ(next.offset, q.offset);
}

GTEST_TEST(QLearningStepTest, BellmanFixedPointUnchanged) {
  const double gamma = 0.9;
  const MatrixXd A = scalar(1), B = scalar(1), Q = scalar(1), R = scalar(1);
  const MatrixXd M = test::riccati_value_iteration(std::sqrt(gamma) * A,
                                                   std::sqrt(gamma) * B, Q, R, 100000);
  const QuadraticQ q = q_from_model(LinearSystem(A, B), Q, R, M, gamma);
  const VectorXd x = vscalar(0.7), u = vscalar(-0.2);
  const VectorXd xn = A * x + B * u;
  const double cost = x.dot(Q * x) + u.dot(R * u);
  const QuadraticQ next = q_learning_step(q, {x, u, cost, xn}, 1.0, gamma);
  EXPECT_LT((next.W - q.W).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_NEAR(next.offset, q.offset, 1e-10);
}

GTEST_TEST(QLearningStepTest, StaysSymmetric) {
  Rng rng(12);
  QuadraticQ q = make_q(MatrixXd::Identity(3, 3), 2);
  for (int i = 0; i < 200; ++i) {
    const Transition tr{rng.normal_vector(2), rng.normal_vector(1), std::abs(rng.normal()),
                        rng.normal_vector(2)};
    q = q_learning_step(q, tr, 1e-3, 0.5);
    ASSERT_EQ((q.W - q.W.transpose()).cwiseAbs().maxCoeff(), 0.0);
  }
}

GTEST_TEST(QLearningStepTest, RejectsBadParameters) {
  const Transition tr{vscalar(1), vscalar(0), 1.0, vscalar(1)};
  EXPECT_THROW(q_learning_step(golden_q(), tr, 1.5, 0.9), ContractViolation);
  EXPECT_THROW(q_learning_step(golden_q(), tr, 0.5, 1.0), ContractViolation);
}

GTEST_TEST(QLearningTrainTest, ScalarNoiselessReachesDiscountedGain) {
  const double gamma = 0.99;
  const LqrInstance inst = scalar_instance(1, 1, 0.0, 100);
  QLearningConfig cfg;
  cfg.gamma = gamma;
  cfg.n_episodes = 1000;
  EpisodeBudget budget;
  Rng rng(2);
  const auto res = q_learning_train(budget, inst, cfg, rng);
  EXPECT_EQ(budget.samples_used(), 100000);
  ASSERT_FALSE(res.failed) << res.failure;
  const double k_star =
      test::discounted_gain(scalar(1), scalar(1), scalar(1), scalar(1), gamma)(0, 0);
  EXPECT_NEAR(res.gain(0, 0), k_star, 0.05 * k_star);
}

GTEST_TEST(FeaturesTest, InnerProductReproducesQuadratic) {
  Rng rng(13);
  for (int n : {1, 2, 4}) {
    EXPECT_EQ(quadratic_feature_dim(n), n * (n + 1) / 2 + 1);
    MatrixXd L(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) L(i, j) = rng.normal();
    const MatrixXd W = L + L.transpose();
    VectorXd w(quadratic_feature_dim(n));
    Eigen::Index k = 0;
    for (int i = 0; i < n; ++i)
      for (int j = i; j < n; ++j) w(k++) = W(i, j);
    w(k) = 0.4;
    const QuadraticQ q = q_from_weights(w, n - n / 2, n / 2);
    EXPECT_EQ(q.W, W);
    const VectorXd z = rng.normal_vector(n);
    EXPECT_NEAR(quadratic_features(z).dot(w), z.dot(W * z) + 0.4, 1e-12);
  }
}

std::vector<Transition> noiseless_data(double a, double b, double k, int n, Rng& rng) {
  std::vector<Transition> data;
  for (int i = 0; i < n; ++i) {
    const double x = rng.normal(), u = -k * x + rng.normal();
    data.push_back({vscalar(x), vscalar(u), x * x + u * u, vscalar(a * x + b * u)});
  }
  return data;
}

GTEST_TEST(LstdqTest, NoDiscountRecoversStageCost) {
  Rng rng(14);
  const MatrixXd A = test::double_integrator_A(), B = test::double_integrator_B();
  const MatrixXd Q = (MatrixXd(2, 2) << 1, 0.2, 0.2, 0.5).finished();
  const MatrixXd R = scalar(2);
  std::vector<Transition> data;
  for (int i = 0; i < 40; ++i) {
    const VectorXd x = rng.normal_vector(2), u = rng.normal_vector(1);
    data.push_back({x, u, x.dot(Q * x) + u.dot(R * u), A * x + B * u});
  }
  const QuadraticQ q = lstdq(data, MatrixXd::Zero(1, 2), 0.0);
  MatrixXd expect = MatrixXd::Zero(3, 3);
  expect.topLeftCorner(2, 2) = Q;
  expect(2, 2) = 2;
  EXPECT_LT((q.W - expect).cwiseAbs().maxCoeff(), 1e-8);
  EXPECT_NEAR(q.offset, 0.0, 1e-8);
}

GTEST_TEST(LstdqTest, ScalarDiscountedEvaluation) {
  const double a = 1, b = 1, k = 0.5, gamma = 0.9;
  Rng rng(15);
  const QuadraticQ q = lstdq(noiseless_data(a, b, k, 50, rng), scalar(k), gamma);
  const double P = test::scalar_discounted_value(a, b, 1, 1, k, gamma);
  EXPECT_NEAR(q.W(0, 0), 1 + gamma * P * a * a, 1e-6);
  EXPECT_NEAR(q.W(0, 1), gamma * P * a * b, 1e-6);
  EXPECT_NEAR(q.W(1, 1), 1 + gamma * P * b * b, 1e-6);
  EXPECT_NEAR(q.offset, 0.0, 1e-6);
}

GTEST_TEST(LstdqTest, RepeatedPairIsInsufficient) {
  std::vector<Transition> data(20, Transition{vscalar(1), vscalar(0.5), 1.25, vscalar(1.5)});
  EXPECT_THROW(lstdq(data, scalar(0.5), 0.9), InsufficientData);
  EXPECT_NO_THROW(lstdq(data, scalar(0.5), 0.9, 1e-3));
}

GTEST_TEST(LspiTest, DiscountedOptimumIsFixedPoint) {
  const double gamma = 0.9;
  const LqrInstance inst = scalar_instance(1, 1, 0.0, 20);
  const MatrixXd Kg = test::discounted_gain(scalar(1), scalar(1), scalar(1), scalar(1), gamma);
  LspiConfig cfg;
  cfg.gamma = gamma;
  cfg.n_iters = 1;
  cfg.samples_per_iter = 20;
  cfg.initial_gain = Kg;
  EpisodeBudget budget;
  Rng rng(16);
  const LspiResult res = lspi(budget, inst, cfg, rng);
  ASSERT_FALSE(res.failed) << res.failure;
  ASSERT_EQ(res.gains.size(), 2u);
  EXPECT_NEAR(res.gains[1](0, 0), Kg(0, 0), 1e-8);
}

GTEST_TEST(LspiTest, ChargesExactly) {
  const LqrInstance inst = scalar_instance(1, 1, 1e-4, 7);
  for (int spi : {5, 7, 16}) {
    LspiConfig cfg;
    cfg.n_iters = 4;
    cfg.samples_per_iter = spi;
    EpisodeBudget budget;
    Rng rng(spi);
    lspi(budget, inst, cfg, rng);
    EXPECT_EQ(budget.samples_used(), 4 * spi);
  }
}

GTEST_TEST(LspiTest, FailureIsRecordedNotThrown) {
  const LqrInstance inst = scalar_instance(1, 1, 1e-4, 2);
  LspiConfig cfg;
  cfg.n_iters = 3;
  cfg.samples_per_iter = 2;
  EpisodeBudget budget;
  Rng rng(17);
  const LspiResult res = lspi(budget, inst, cfg, rng);
  EXPECT_TRUE(res.failed);
  EXPECT_FALSE(res.failure.empty());
  EXPECT_EQ(budget.samples_used(), 6);
}

GTEST_TEST(LspiTest, FastOnDoubleIntegrator) {
  const LqrInstance inst(
      LinearSystem(test::double_integrator_A(), test::double_integrator_B(),
                   1e-4 * MatrixXd::Identity(2, 2)),
      QuadraticCost((MatrixXd(2, 2) << 1, 0, 0, 0).finished(), scalar(1)),
      (VectorXd(2) << -1, 0).finished(), 10);
  const double J = closed_loop_average_cost(inst.system, inst.cost,
                                            dare_solve(inst.system, inst.cost).K);
  LspiConfig cfg;
  cfg.gamma = 0.9;
  cfg.exploration_std = 10;
  cfg.samples_per_iter = 10;
  cfg.n_iters = 10;
  std::vector<double> ratio;
  for (int seed = 0; seed < 10; ++seed) {
    EpisodeBudget budget;
    Rng rng(derive_seed({18, static_cast<std::uint64_t>(seed)}));
    const LspiResult res = lspi(budget, inst, cfg, rng);
    double r = std::numeric_limits<double>::infinity();
    if (!res.failed && stability_report(inst.system, res.final_gain()).stable)
      r = closed_loop_average_cost(inst.system, inst.cost, res.final_gain()) / J;
    ratio.push_back(r);
  }
  std::nth_element(ratio.begin(), ratio.begin() + 5, ratio.end());
  EXPECT_LE(ratio[5], 1.05);
}

GTEST_TEST(BellmanResidualTest, VanishesWithNoise) {
  const double gamma = 0.95;
  const MatrixXd A = test::double_integrator_A(), B = test::double_integrator_B();
  const MatrixXd Q = (MatrixXd(2, 2) << 1, 0, 0, 0).finished(), R = scalar(1);
  const MatrixXd M = test::riccati_value_iteration(std::sqrt(gamma) * A,
                                                   std::sqrt(gamma) * B, Q, R, 100000);
  std::vector<double> residuals;
  for (double sd : {1e-1, 1e-2, 1e-3, 0.0}) {
    const MatrixXd cov = sd * sd * MatrixXd::Identity(2, 2);
    const double offset = gamma / (1 - gamma) * (M * cov).trace();
    const QuadraticQ q = q_from_model(LinearSystem(A, B), Q, R, M, gamma, offset);
    LqrInstance inst(LinearSystem(A, B, cov), QuadraticCost(Q, R),
                     (VectorXd(2) << -1, 0).finished(), 50);
    Rng rng(19);
    const Trajectory traj = rollout(inst, GaussianLinear{MatrixXd::Zero(1, 2), 1.0}, 50, rng);
    double mean_abs = 0;
    const MatrixXd Kq = greedy_gain(q);
    for (const Transition& tr : transitions_of(traj)) {
      const double target = tr.cost + gamma * q_eval(q, tr.x_next, -Kq * tr.x_next);
      mean_abs += std::abs(q_eval(q, tr.x, tr.u) - target) / 50;
    }
    residuals.push_back(mean_abs);
  }
  EXPECT_GT(residuals[0], residuals[1]);
  EXPECT_GT(residuals[1], residuals[2]);
  EXPECT_LT(residuals[3], 1e-8);
}

GTEST_TEST(DiscountSweepTest, OnePointPerGamma) {
  const LqrInstance inst = scalar_instance(1, 1, 1e-4, 10);
  LspiConfig cfg;
  cfg.n_iters = 3;
  cfg.samples_per_iter = 20;
  const auto pts = discount_sweep(inst, {0.5, 0.9, 0.99}, cfg, 3);
  ASSERT_EQ(pts.size(), 3u);
  EXPECT_EQ(pts[1].gamma, 0.9);
  for (const auto& p : pts)
    if (!p.failed) {
      EXPECT_EQ(std::isfinite(p.average_cost),
                stability_report(inst.system, p.gain).stable);
    }
  const auto again = discount_sweep(inst, {0.5, 0.9, 0.99}, cfg, 3);
  for (std::size_t i = 0; i < pts.size(); ++i) EXPECT_EQ(pts[i].gain, again[i].gain);
}

}  // namespace
}  // namespace lqrlab
