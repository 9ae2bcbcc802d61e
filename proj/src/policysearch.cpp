#include "lqrlab/policysearch.hpp"

#include <cmath>
#include <limits>

#include "lqrlab/errors.hpp"
#include "lqrlab/riccati.hpp"

namespace lqrlab {

MomentState MomentState::zeros(Eigen::Index n, double beta1, double beta2,
                               double eps_reg) {
  MomentState s;
  s.m1 = VectorXd::Zero(n);
  s.m2 = VectorXd::Zero(n);
  s.beta1 = beta1;
  s.beta2 = beta2;
  s.eps_reg = eps_reg;
  return s;
}

void BaselineState::record(double mean_return) {
  history.push_back(mean_return);
  current += (mean_return - current) / static_cast<double>(history.size());
}

WhitenState WhitenState::empty(Eigen::Index d, double eps_reg) {
  WhitenState s;
  s.mean = VectorXd::Zero(d);
  s.cov_diag = VectorXd::Zero(d);
  s.eps_reg = eps_reg;
  return s;
}

VectorXd WhitenState::inverse_scale() const {
  if (count == 0) return VectorXd::Ones(mean.size());
  return (cov_diag.array() + eps_reg).rsqrt().matrix();
}

VectorXd WhitenState::standardize(const VectorXd& x) const {
  LQRLAB_REQUIRE(x.size() == mean.size(), "whitening dimension mismatch");
  if (count == 0) return x;
  return (x - mean).cwiseProduct(inverse_scale());
}

void WhitenState::observe(const VectorXd& x) {
  LQRLAB_REQUIRE(x.size() == mean.size(), "whitening dimension mismatch");
  const double n_old = static_cast<double>(count);
  const double n_new = n_old + 1.0;
  const VectorXd delta = x - mean;
  mean += delta / n_new;
  const VectorXd m2 = cov_diag * n_old + delta.cwiseProduct(x - mean);
  cov_diag = (m2 / n_new).cwiseMax(0.0);
  ++count;
}

VectorXd whiten(WhitenState& state, const VectorXd& x) {
  state.observe(x);
  return state.standardize(x);
}

MatrixXd unflatten_gain(const VectorXd& theta, Eigen::Index p, Eigen::Index d) {
  LQRLAB_REQUIRE(theta.size() == p * d, "parameter vector does not match p x d");
  MatrixXd K(p, d);
  for (Eigen::Index i = 0; i < p; ++i)
    for (Eigen::Index j = 0; j < d; ++j) K(i, j) = theta[i * d + j];
  return K;
}

VectorXd flatten_gain(const MatrixXd& K) {
  VectorXd theta(K.size());
  for (Eigen::Index i = 0; i < K.rows(); ++i)
    for (Eigen::Index j = 0; j < K.cols(); ++j) theta[i * K.cols() + j] = K(i, j);
  return theta;
}

VectorXd score_gradient(const VectorXd& z, const VectorXd& theta, double sigma) {
  LQRLAB_REQUIRE(z.size() == theta.size(), "sample and parameter sizes differ");
  LQRLAB_REQUIRE(sigma > 0.0, "sigma must be positive");
  return (z - theta) / (sigma * sigma);
}

MatrixXd reinforce_trajectory_gradient(const Trajectory& traj,
                                       const GaussianLinear& policy,
                                       double return_value, double baseline) {
  LQRLAB_REQUIRE(policy.exploration_std > 0.0, "exploration_std must be positive");
  LQRLAB_REQUIRE(traj.states.size() >= traj.inputs.size(),
                 "trajectory is missing states");
  const double inv_var = 1.0 / (policy.exploration_std * policy.exploration_std);
  MatrixXd grad = MatrixXd::Zero(policy.K.rows(), policy.K.cols());
  for (std::size_t t = 0; t < traj.inputs.size(); ++t) {
    const VectorXd& x = traj.states[t];
    const VectorXd residual = traj.inputs[t] + policy.K * x;
    grad.noalias() -= inv_var * residual * x.transpose();
  }
  return (return_value - baseline) * grad;
}

VectorXd adaptive_step(MomentState& state, const VectorXd& grad) {
  LQRLAB_REQUIRE(state.m1.size() == grad.size() && state.m2.size() == grad.size(),
                 "moment state does not match gradient size");
  ++state.t;
  state.m1 = state.beta1 * state.m1 + (1.0 - state.beta1) * grad;
  state.m2 = state.beta2 * state.m2 + (1.0 - state.beta2) * grad.cwiseAbs2();
  const double c1 = 1.0 - std::pow(state.beta1, state.t);
  const double c2 = 1.0 - std::pow(state.beta2, state.t);
  const VectorXd m1_hat = state.m1 / c1;
  const VectorXd m2_hat = state.m2 / c2;
  return m1_hat.array() / (m2_hat.array().sqrt() + state.eps_reg);
}

VectorXd rs_two_point(const RewardFn& evaluate, const VectorXd& theta,
                      double sigma, const VectorXd& epsilon) {
  LQRLAB_REQUIRE(sigma > 0.0, "sigma must be positive");
  LQRLAB_REQUIRE(epsilon.size() == theta.size(), "direction size mismatch");
  const double plus = evaluate(theta + sigma * epsilon);
  const double minus = evaluate(theta - sigma * epsilon);
  return (plus - minus) / (2.0 * sigma) * epsilon;
}

VectorXd rs_multi(const RewardFn& evaluate, const VectorXd& theta, double sigma,
                  int m, Rng& rng) {
  LQRLAB_REQUIRE(m >= 1, "need at least one direction");
  VectorXd g = VectorXd::Zero(theta.size());
  for (int i = 0; i < m; ++i)
    g += rs_two_point(evaluate, theta, sigma, rng.normal_vector(theta.size()));
  return g / static_cast<double>(m);
}

double evaluate_gain(const LqrInstance& instance, const MatrixXd& K) {
  constexpr double kInf = std::numeric_limits<double>::infinity();
  if (!K.allFinite()) return kInf;
  try {
    const double c = closed_loop_average_cost(instance.system, instance.cost, K);
    return std::isfinite(c) ? c : kInf;
  } catch (const Instability&) {
    return kInf;
  }
}

namespace {

MatrixXd initial_gain_or_zero(const MatrixXd& K0, const LqrInstance& instance) {
  const auto d = instance.system.state_dim();
  const auto p = instance.system.input_dim();
  if (K0.size() == 0) return MatrixXd::Zero(p, d);
  LQRLAB_REQUIRE(K0.rows() == p && K0.cols() == d, "initial gain must be p x d");
  return K0;
}

}  // namespace

SearchTrace reinforce_train(EpisodeBudget& budget, const LqrInstance& instance,
                            const ReinforceConfig& config, Rng& rng) {
  LQRLAB_REQUIRE(config.batch_size >= 1, "batch_size must be >= 1");
  LQRLAB_REQUIRE(config.exploration_std > 0.0, "exploration_std must be positive");
  LQRLAB_REQUIRE(config.step >= 0.0, "step must be nonnegative");
  MatrixXd K = initial_gain_or_zero(config.initial_gain, instance);
  MomentState moments =
      MomentState::zeros(K.size(), config.beta1, config.beta2, config.eps_reg);
  BaselineState baseline;

  SearchTrace trace;
  std::vector<Trajectory> batch(config.batch_size);
  std::vector<double> returns(config.batch_size);
  for (int it = 0; it < config.n_iters; ++it) {
    const GaussianLinear policy{K, config.exploration_std};
    double mean_return = 0.0;
    for (int b = 0; b < config.batch_size; ++b) {
      batch[b] = oracle_query(budget, instance, Policy{policy},
                              instance.episode_len, rng);
      returns[b] = -trajectory_cost(batch[b], instance.cost);
      mean_return += returns[b] / config.batch_size;
    }
    const double b0 = config.baseline ? baseline.current : 0.0;
    MatrixXd grad = MatrixXd::Zero(K.rows(), K.cols());
    for (int b = 0; b < config.batch_size; ++b)
      grad += reinforce_trajectory_gradient(batch[b], policy, returns[b], b0);
    grad /= static_cast<double>(config.batch_size);
    baseline.record(mean_return);
    trace.gradient_norms.push_back(grad.norm());

    VectorXd direction = flatten_gain(grad);
    if (config.adaptive) direction = adaptive_step(moments, direction);
    if (direction.allFinite())
      K += config.step * unflatten_gain(direction, K.rows(), K.cols());
    trace.points.push_back({budget.samples_used(), evaluate_gain(instance, K)});
  }
  trace.final_gain = K;
  return trace;
}

SearchTrace random_search_train(EpisodeBudget& budget, const LqrInstance& instance,
                                const RandomSearchConfig& config, Rng& rng) {
  LQRLAB_REQUIRE(config.sigma > 0.0, "sigma must be positive");
  LQRLAB_REQUIRE(config.step >= 0.0, "step must be nonnegative");
  LQRLAB_REQUIRE(config.directions >= 1, "directions must be >= 1");
  const auto d = instance.system.state_dim();
  const auto p = instance.system.input_dim();
  VectorXd theta = flatten_gain(initial_gain_or_zero(config.initial_gain, instance));
  WhitenState stats = WhitenState::empty(d);

  auto effective_gain = [&](const VectorXd& th) -> MatrixXd {
    MatrixXd K = unflatten_gain(th, p, d);
    if (config.whitening) K = K * stats.inverse_scale().asDiagonal();
    return K;
  };

  SearchTrace trace;
  std::vector<VectorXd> seen;
  std::vector<double> rewards;
  for (int it = 0; it < config.n_iters; ++it) {
    const WhitenState snapshot = stats;
    rewards.clear();
    const RewardFn reward = [&](const VectorXd& th) {
      const MatrixXd K = unflatten_gain(th, p, d);
      const ActionFn policy = [&](int, const VectorXd& x, Rng&) -> VectorXd {
        return config.whitening ? VectorXd(-K * snapshot.standardize(x))
                                : VectorXd(-K * x);
      };
      const auto traj =
          oracle_query(budget, instance, policy, instance.episode_len, rng);
      if (config.whitening)
        seen.insert(seen.end(), traj.states.begin(), traj.states.end() - 1);
      rewards.push_back(-trajectory_cost(traj, instance.cost));
      return rewards.back();
    };
    VectorXd g = rs_multi(reward, theta, config.sigma, config.directions, rng);
    if (config.reward_scaling) {
      const Eigen::Map<const VectorXd> r(rewards.data(),
                                         static_cast<Eigen::Index>(rewards.size()));
      const double sd = std::sqrt((r.array() - r.mean()).square().mean());
      if (sd > 0.0 && std::isfinite(sd)) g /= sd;
    }
    trace.gradient_norms.push_back(g.norm());
    if (g.allFinite()) theta += config.step * g;
    for (const auto& x : seen) stats.observe(x);
    seen.clear();
    trace.points.push_back(
        {budget.samples_used(), evaluate_gain(instance, effective_gain(theta))});
  }
  trace.final_gain = effective_gain(theta);
  return trace;
}

ScoreEstimate score_function_estimate(const RewardFn& reward, const VectorXd& theta,
                                      double sigma, int n_samples, Rng& rng,
                                      double baseline) {
  LQRLAB_REQUIRE(n_samples >= 2, "need at least two samples");
  const auto n = theta.size();
  VectorXd mean = VectorXd::Zero(n), m2 = VectorXd::Zero(n);
  double r_mean = 0.0, r_m2 = 0.0;
  for (int i = 1; i <= n_samples; ++i) {
    const VectorXd z = theta + sigma * rng.normal_vector(n);
    const double r = reward(z);
    const VectorXd g = (r - baseline) * score_gradient(z, theta, sigma);
    const VectorXd delta = g - mean;
    mean += delta / i;
    m2 += delta.cwiseProduct(g - mean);
    const double dr = r - r_mean;
    r_mean += dr / i;
    r_m2 += dr * (r - r_mean);
  }
  ScoreEstimate est;
  est.gradient.mean = mean;
  est.gradient.std_error = (m2 / (n_samples - 1.0) / n_samples).cwiseSqrt();
  est.mean_reward = r_mean;
  est.reward_std_error = std::sqrt(r_m2 / (n_samples - 1.0) / n_samples);
  return est;
}

GradientNormStats gradient_variance_diag(int d, double sigma, const VectorXd& theta0,
                                         int n_samples, Rng& rng) {
  LQRLAB_REQUIRE(d >= 1 && theta0.size() == d, "theta0 must have length d");
  LQRLAB_REQUIRE(sigma > 0.0, "sigma must be positive");
  LQRLAB_REQUIRE(n_samples >= 1, "n_samples must be >= 1");
  double mean = 0.0, m2 = 0.0;
  for (int i = 1; i <= n_samples; ++i) {
    const VectorXd z = theta0 + sigma * rng.normal_vector(d);
    const double norm = (z.squaredNorm() * score_gradient(z, theta0, sigma)).norm();
    const double delta = norm - mean;
    mean += delta / i;
    m2 += delta * (norm - mean);
  }
  GradientNormStats stats;
  stats.mean = mean;
  stats.std_error = n_samples > 1 ? std::sqrt(m2 / (n_samples - 1.0) / n_samples) : 0.0;
  return stats;
}

}  // namespace lqrlab
