#pragma once

#include <string>
#include <vector>

#include "lqrlab/core_lds.hpp"

namespace lqrlab {

/// Q(x,u) = (x;u)ᵀ W (x;u) + offset, W symmetric (d+p)×(d+p).
struct QuadraticQ {
  MatrixXd W;
  double offset = 0.0;
  Eigen::Index state_dim = 0;

  Eigen::Index input_dim() const { return W.rows() - state_dim; }
  auto Wxx() const { return W.topLeftCorner(state_dim, state_dim); }
  auto Wxu() const { return W.topRightCorner(state_dim, input_dim()); }
  auto Wux() const { return W.bottomLeftCorner(input_dim(), state_dim); }
  auto Wuu() const { return W.bottomRightCorner(input_dim(), input_dim()); }
};

/// V(x) = xᵀPx + offset.
struct QuadraticValue {
  MatrixXd P;
  double offset = 0.0;
};

struct Transition {
  VectorXd x;
  VectorXd u;
  double cost = 0.0;  ///< unhalved stage cost xᵀQx + uᵀRu
  VectorXd x_next;
};

std::vector<Transition> transitions_of(const Trajectory& traj);

double q_eval(const QuadraticQ& q, const VectorXd& x, const VectorXd& u);

/// K = W_uu⁻¹ W_ux, so u = −Kx minimizes Q(x, ·). Throws NonExtractablePolicy
/// unless W_uu is positive definite.
MatrixXd greedy_gain(const QuadraticQ& q);

/// Partial minimization over u: P = W_xx − W_xu W_uu⁻¹ W_ux.
QuadraticValue value_from_q(const QuadraticQ& q);

/// The exact Q-function Q(x,u) = xᵀQx + uᵀRu + γ(Ax+Bu)ᵀM(Ax+Bu) + offset.
QuadraticQ q_from_model(const LinearSystem& system, const MatrixXd& Q,
                        const MatrixXd& R, const MatrixXd& M, double gamma = 1.0,
                        double offset = 0.0);

/// One LMS step toward target = cost + γ·min_u' Q(x', u'):
/// W ← W − η·δ·zzᵀ, offset ← offset − η·δ with δ = Q(x,u) − target.
QuadraticQ q_learning_step(const QuadraticQ& q, const Transition& tr, double eta,
                           double gamma);

/// Number of quadratic monomials over n variables plus the constant.
Eigen::Index quadratic_feature_dim(Eigen::Index n);

/// Features φ(z) with φᵀw = zᵀWz + offset, w holding the upper triangle of W
/// (row-major) followed by the offset.
VectorXd quadratic_features(const VectorXd& z);

QuadraticQ q_from_weights(const VectorXd& w, Eigen::Index state_dim,
                          Eigen::Index input_dim);

/// LSTDQ: solves Σ φ(x,u)(φ(x,u) − γφ(x',−Kx'))ᵀ w + ridge·w = Σ φ(x,u)·cost
/// for the policy u = −Kx. Throws InsufficientData if the system is singular.
QuadraticQ lstdq(const std::vector<Transition>& data, const MatrixXd& K,
                 double gamma, double ridge = 0.0);

struct LspiConfig {
  double gamma = 0.99;
  int n_iters = 10;
  int samples_per_iter = 10;
  double exploration_std = 1.0;
  double ridge = 0.0;
  MatrixXd initial_gain;  ///< defaults to zero when empty
};

struct LspiResult {
  std::vector<MatrixXd> gains;  ///< K_0 .. K_last
  std::vector<QuadraticQ> qs;
  bool failed = false;
  std::string failure;
  const MatrixXd& final_gain() const { return gains.back(); }
};

/// Least-squares policy iteration. Each round collects samples_per_iter
/// transitions under u = −K_t x + exploration noise, evaluates K_t by LSTDQ on
/// all data gathered so far and takes the greedy gain. Rounds that cannot
/// extract a gain end the run with `failed` set.
LspiResult lspi(EpisodeBudget& budget, const LqrInstance& instance,
                const LspiConfig& config, Rng& rng);

struct QLearningConfig {
  double gamma = 0.99;
  double eta = 0.5;   ///< base step; the step used is eta/(1 + ‖φ(x,u)‖²)
  double epsilon = 0.2;  ///< probability of a random exploratory input
  double exploration_std = 1.0;
  int n_episodes = 100;
};

struct QLearningResult {
  QuadraticQ q;
  MatrixXd gain;
  bool failed = false;
  std::string failure;
};

/// Online Q-learning on quadratic Q-functions with ε-greedy exploration. Starts
/// from the stage-cost form W = blkdiag(Q, R).
QLearningResult q_learning_train(EpisodeBudget& budget, const LqrInstance& instance,
                                 const QLearningConfig& config, Rng& rng);

struct DiscountSweepPoint {
  double gamma;
  MatrixXd gain;
  bool failed;
  double average_cost;  ///< +inf when failed or non-stabilizing
};

/// Runs LSPI once per discount factor, each on a fresh budget and a stream
/// keyed by the sweep index.
std::vector<DiscountSweepPoint> discount_sweep(const LqrInstance& instance,
                                               const std::vector<double>& gammas,
                                               LspiConfig base, std::uint64_t seed);

}  // namespace lqrlab
