#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "lqrlab/core_lds.hpp"

namespace lqrlab {

/// Decision variable and step settings shared by the search methods.
struct SearchParams {
  VectorXd theta;     ///< flattened p×d gain (row-major)
  double sigma = 0.1;
  double step = 0.01;
  int directions = 1;
};

/// Adaptive-moment step state.
struct MomentState {
  VectorXd m1;
  VectorXd m2;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps_reg = 1e-8;
  int t = 0;

  static MomentState zeros(Eigen::Index n, double beta1 = 0.9,
                           double beta2 = 0.999, double eps_reg = 1e-8);
};

/// Running mean of previous iterates' mean returns.
struct BaselineState {
  std::vector<double> history;
  double current = 0.0;

  void record(double mean_return);
};

struct WhitenState {
  VectorXd mean;
  VectorXd cov_diag;
  std::int64_t count = 0;
  double eps_reg = 1e-8;

  static WhitenState empty(Eigen::Index d, double eps_reg = 1e-8);
  /// (x − mean)/√(cov_diag + eps_reg) without updating the statistics.
  VectorXd standardize(const VectorXd& x) const;
  /// Per-coordinate scale 1/√(cov_diag + eps_reg); ones before any data.
  VectorXd inverse_scale() const;
  /// Streaming (Welford) update with one observation.
  void observe(const VectorXd& x);
};

using RewardFn = std::function<double(const VectorXd&)>;

MatrixXd unflatten_gain(const VectorXd& theta, Eigen::Index p, Eigen::Index d);
VectorXd flatten_gain(const MatrixXd& K);

/// ∇_ϑ log N(z; ϑ, σ²I) = (z − ϑ)/σ².
VectorXd score_gradient(const VectorXd& z, const VectorXd& theta, double sigma);

/// (R − b)·Σ_t ∇_K log p(u_t | x_t), with ∇_K log p = −(u_t + K x_t) x_tᵀ/σ_u².
/// Reads only states, inputs, and the supplied return.
MatrixXd reinforce_trajectory_gradient(const Trajectory& traj,
                                       const GaussianLinear& policy,
                                       double return_value, double baseline);

/// Updates the moments with `grad` and returns m̂1/(√m̂2 + eps_reg).
VectorXd adaptive_step(MomentState& state, const VectorXd& grad);

/// (R(ϑ+σε) − R(ϑ−σε))/(2σ)·ε; two reward evaluations.
VectorXd rs_two_point(const RewardFn& evaluate, const VectorXd& theta,
                      double sigma, const VectorXd& epsilon);

/// Mean of m two-point estimates along ε_i ~ N(0, I) drawn in order from rng.
VectorXd rs_multi(const RewardFn& evaluate, const VectorXd& theta, double sigma,
                  int m, Rng& rng);

/// Standardizes x after folding it into the running statistics.
VectorXd whiten(WhitenState& state, const VectorXd& x);

/// One point of a training trace. cost is +inf when the gain is not stabilizing.
struct TracePoint {
  std::int64_t samples;
  double cost;
};

struct SearchTrace {
  std::vector<TracePoint> points;
  std::vector<double> gradient_norms;
  MatrixXd final_gain;
};

struct ReinforceConfig {
  MatrixXd initial_gain;  ///< zero when empty
  double exploration_std = 0.5;
  double step = 0.01;
  int batch_size = 1;
  bool baseline = true;
  bool adaptive = true;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps_reg = 1e-8;
  int n_iters = 100;
};

/// REINFORCE over Gaussian-linear policies, ascending reward = −episode cost.
/// Each iteration charges batch_size·episode_len samples.
SearchTrace reinforce_train(EpisodeBudget& budget, const LqrInstance& instance,
                            const ReinforceConfig& config, Rng& rng);

struct RandomSearchConfig {
  MatrixXd initial_gain;  ///< zero when empty
  double sigma = 0.1;
  double step = 0.01;
  int directions = 1;
  bool whitening = false;
  /// Divide each step by the standard deviation of the 2m rewards collected in
  /// that iteration (skipped when the rewards are all equal).
  bool reward_scaling = false;
  int n_iters = 100;
};

/// Pure random search with the m-direction two-point estimator on the
/// deterministic gain, ϑ ← ϑ + α·g. Each iteration charges 2·m·episode_len
/// samples.
/// With whitening, the gain acts on standardized states and the reported gain
/// is the equivalent linear gain K·diag(1/√(var + eps)).
SearchTrace random_search_train(EpisodeBudget& budget, const LqrInstance& instance,
                                const RandomSearchConfig& config, Rng& rng);

/// Analytic cost of a gain, +inf when ρ(A−BK) ≥ 1 or K is not finite.
double evaluate_gain(const LqrInstance& instance, const MatrixXd& K);

struct MonteCarloStats {
  VectorXd mean;
  VectorXd std_error;
};

/// Monte-Carlo estimate of E[(R(z) − baseline)·(z − ϑ)/σ²], z ~ N(ϑ, σ²I),
/// together with the mean reward.
struct ScoreEstimate {
  MonteCarloStats gradient;
  double mean_reward = 0.0;
  double reward_std_error = 0.0;
};
ScoreEstimate score_function_estimate(const RewardFn& reward, const VectorXd& theta,
                                      double sigma, int n_samples, Rng& rng,
                                      double baseline = 0.0);

struct GradientNormStats {
  double mean = 0.0;
  double std_error = 0.0;
};

/// For R(u) = ‖u‖² sampled from N(ϑ₀, σ²I): the mean of ‖R(z)(z − ϑ₀)/σ²‖.
GradientNormStats gradient_variance_diag(int d, double sigma, const VectorXd& theta0,
                                         int n_samples, Rng& rng);

}  // namespace lqrlab
