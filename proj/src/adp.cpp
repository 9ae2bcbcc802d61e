#include "lqrlab/adp.hpp"

#include <cmath>
#include <limits>

#include <Eigen/Cholesky>
#include <Eigen/LU>

#include "lqrlab/errors.hpp"
#include "lqrlab/riccati.hpp"

namespace lqrlab {

namespace {

VectorXd join(const VectorXd& x, const VectorXd& u) {
  VectorXd z(x.size() + u.size());
  z << x, u;
  return z;
}

Eigen::LLT<MatrixXd> factor_input_block(const QuadraticQ& q) {
  LQRLAB_REQUIRE(q.input_dim() > 0, "Q-function has no input block");
  const MatrixXd Wuu = q.Wuu();
  Eigen::LLT<MatrixXd> llt(0.5 * (Wuu + Wuu.transpose()));
  if (llt.info() != Eigen::Success || !Wuu.allFinite())
    throw NonExtractablePolicy("W_uu is not positive definite");
  return llt;
}

}  // namespace

std::vector<Transition> transitions_of(const Trajectory& traj) {
  std::vector<Transition> out;
  out.reserve(traj.inputs.size());
  for (std::size_t t = 0; t < traj.inputs.size(); ++t)
    out.push_back({traj.states[t], traj.inputs[t], traj.stage_costs[t],
                   traj.states[t + 1]});
  return out;
}

double q_eval(const QuadraticQ& q, const VectorXd& x, const VectorXd& u) {
  LQRLAB_REQUIRE(x.size() == q.state_dim && u.size() == q.input_dim(),
                 "state/input dimensions do not match the Q-function");
  const VectorXd z = join(x, u);
  return z.dot(q.W * z) + q.offset;
}

MatrixXd greedy_gain(const QuadraticQ& q) {
  return factor_input_block(q).solve(MatrixXd(q.Wux()));
}

QuadraticValue value_from_q(const QuadraticQ& q) {
  const MatrixXd K = greedy_gain(q);
  MatrixXd P = q.Wxx() - q.Wxu() * K;
  return {0.5 * (P + P.transpose()), q.offset};
}

QuadraticQ q_from_model(const LinearSystem& system, const MatrixXd& Q,
                        const MatrixXd& R, const MatrixXd& M, double gamma,
                        double offset) {
  const auto d = system.state_dim();
  const auto p = system.input_dim();
  MatrixXd AB(d, d + p);
  AB << system.A(), system.B();
  QuadraticQ q;
  q.state_dim = d;
  q.W = gamma * AB.transpose() * M * AB;
  q.W.topLeftCorner(d, d) += Q;
  q.W.bottomRightCorner(p, p) += R;
  q.W = (0.5 * (q.W + q.W.transpose())).eval();
  q.offset = offset;
  return q;
}

QuadraticQ q_learning_step(const QuadraticQ& q, const Transition& tr, double eta,
                           double gamma) {
  LQRLAB_REQUIRE(eta >= 0.0 && eta <= 1.0, "eta must be in [0, 1]");
  LQRLAB_REQUIRE(gamma >= 0.0 && gamma < 1.0, "gamma must be in [0, 1)");
  const QuadraticValue v = value_from_q(q);
  const double target = tr.cost + gamma * (tr.x_next.dot(v.P * tr.x_next) + v.offset);
  const double delta = q_eval(q, tr.x, tr.u) - target;
  const VectorXd z = join(tr.x, tr.u);
  QuadraticQ next = q;
  next.W.noalias() -= (eta * delta) * (z * z.transpose());
  next.W = (0.5 * (next.W + next.W.transpose())).eval();
  next.offset -= eta * delta;
  return next;
}

Eigen::Index quadratic_feature_dim(Eigen::Index n) { return n * (n + 1) / 2 + 1; }

VectorXd quadratic_features(const VectorXd& z) {
  const auto n = z.size();
  VectorXd phi(quadratic_feature_dim(n));
  Eigen::Index k = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    phi[k++] = z[i] * z[i];
    for (Eigen::Index j = i + 1; j < n; ++j) phi[k++] = 2.0 * z[i] * z[j];
  }
  phi[k] = 1.0;
  return phi;
}

QuadraticQ q_from_weights(const VectorXd& w, Eigen::Index state_dim,
                          Eigen::Index input_dim) {
  const auto n = state_dim + input_dim;
  LQRLAB_REQUIRE(w.size() == quadratic_feature_dim(n), "weight vector size mismatch");
  QuadraticQ q;
  q.state_dim = state_dim;
  q.W.resize(n, n);
  Eigen::Index k = 0;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i; j < n; ++j, ++k) q.W(i, j) = q.W(j, i) = w[k];
  q.offset = w[k];
  return q;
}

QuadraticQ lstdq(const std::vector<Transition>& data, const MatrixXd& K,
                 double gamma, double ridge) {
  LQRLAB_REQUIRE(!data.empty(), "LSTDQ needs at least one transition");
  LQRLAB_REQUIRE(gamma >= 0.0 && gamma < 1.0, "gamma must be in [0, 1)");
  LQRLAB_REQUIRE(ridge >= 0.0, "ridge must be nonnegative");
  const auto d = data.front().x.size();
  const auto p = data.front().u.size();
  LQRLAB_REQUIRE(K.rows() == p && K.cols() == d, "policy gain must be p x d");
  const auto k = quadratic_feature_dim(d + p);

  MatrixXd lhs = MatrixXd::Zero(k, k);
  VectorXd rhs = VectorXd::Zero(k);
  for (const auto& tr : data) {
    const VectorXd phi = quadratic_features(join(tr.x, tr.u));
    const VectorXd u_next = -K * tr.x_next;
    const VectorXd phi_next = quadratic_features(join(tr.x_next, u_next));
    lhs.noalias() += phi * (phi - gamma * phi_next).transpose();
    rhs.noalias() += tr.cost * phi;
  }
  if (!lhs.allFinite() || !rhs.allFinite())
    throw InsufficientData("LSTDQ system contains non-finite entries");
  lhs.diagonal().array() += ridge;

  Eigen::FullPivLU<MatrixXd> lu(lhs);
  if (lu.rank() < k)
    throw InsufficientData("LSTDQ system has rank " + std::to_string(lu.rank()) +
                           " < " + std::to_string(k));
  return q_from_weights(lu.solve(rhs), d, p);
}

LspiResult lspi(EpisodeBudget& budget, const LqrInstance& instance,
                const LspiConfig& config, Rng& rng) {
  LQRLAB_REQUIRE(config.n_iters >= 0, "n_iters must be >= 0");
  LQRLAB_REQUIRE(config.samples_per_iter >= 1, "samples_per_iter must be >= 1");
  LQRLAB_REQUIRE(config.exploration_std > 0.0, "exploration_std must be positive");
  const auto d = instance.system.state_dim();
  const auto p = instance.system.input_dim();
  MatrixXd K = config.initial_gain.size() == 0 ? MatrixXd::Zero(p, d)
                                               : config.initial_gain;
  LQRLAB_REQUIRE(K.rows() == p && K.cols() == d, "initial gain must be p x d");

  LspiResult result;
  result.gains.push_back(K);
  std::vector<Transition> data;
  for (int it = 0; it < config.n_iters; ++it) {
    const Policy explore = GaussianLinear{K, config.exploration_std};
    for (int collected = 0; collected < config.samples_per_iter;) {
      const int horizon =
          std::min(instance.episode_len, config.samples_per_iter - collected);
      const auto traj = oracle_query(budget, instance, explore, horizon, rng);
      for (auto& tr : transitions_of(traj)) data.push_back(std::move(tr));
      collected += horizon;
    }
    if (result.failed) continue;
    try {
      QuadraticQ q = lstdq(data, K, config.gamma, config.ridge);
      K = greedy_gain(q);
      if (!K.allFinite()) throw NonExtractablePolicy("greedy gain is not finite");
      result.qs.push_back(std::move(q));
      result.gains.push_back(K);
    } catch (const LqrLabError& e) {
      // Data collection continues so the budget charge stays n_iters·samples_per_iter.
      result.failed = true;
      result.failure = e.what();
    }
  }
  return result;
}

QLearningResult q_learning_train(EpisodeBudget& budget, const LqrInstance& instance,
                                 const QLearningConfig& config, Rng& rng) {
  LQRLAB_REQUIRE(config.eta > 0.0 && config.eta <= 1.0, "eta must be in (0, 1]");
  LQRLAB_REQUIRE(config.epsilon >= 0.0 && config.epsilon <= 1.0,
                 "epsilon must be in [0, 1]");
  const auto d = instance.system.state_dim();
  const auto p = instance.system.input_dim();
  QuadraticQ q = q_from_model(instance.system, instance.cost.Q(), instance.cost.R(),
                              MatrixXd::Zero(d, d));
  MatrixXd K = MatrixXd::Zero(p, d);

  QLearningResult result;
  auto update = [&](const Transition& tr) {
    const double norm2 = quadratic_features(join(tr.x, tr.u)).squaredNorm();
    q = q_learning_step(q, tr, config.eta / (1.0 + norm2), config.gamma);
    K = greedy_gain(q);
  };

  for (int ep = 0; ep < config.n_episodes && !result.failed; ++ep) {
    VectorXd prev_x, prev_u;
    double prev_cost = 0.0;
    const ActionFn policy = [&](int t, const VectorXd& x, Rng& r) -> VectorXd {
      if (t > 0) update({prev_x, prev_u, prev_cost, x});
      VectorXd u = r.uniform() < config.epsilon
                       ? VectorXd(config.exploration_std * r.normal_vector(p))
                       : VectorXd(-K * x);
      prev_x = x;
      prev_u = u;
      prev_cost = instance.cost.stage(x, u);
      return u;
    };
    try {
      const auto traj =
          oracle_query(budget, instance, policy, instance.episode_len, rng);
      update({prev_x, prev_u, prev_cost, traj.states.back()});
      if (!q.W.allFinite()) throw NonExtractablePolicy("Q weights diverged");
    } catch (const LqrLabError& e) {
      result.failed = true;
      result.failure = e.what();
    }
  }
  result.q = q;
  result.gain = K;
  return result;
}

std::vector<DiscountSweepPoint> discount_sweep(const LqrInstance& instance,
                                               const std::vector<double>& gammas,
                                               LspiConfig base, std::uint64_t seed) {
  std::vector<DiscountSweepPoint> out;
  for (std::size_t i = 0; i < gammas.size(); ++i) {
    base.gamma = gammas[i];
    EpisodeBudget budget;
    Rng rng(derive_seed({seed, i}));
    const auto run = lspi(budget, instance, base, rng);
    double cost = std::numeric_limits<double>::infinity();
    if (!run.failed) {
      try {
        cost = closed_loop_average_cost(instance.system, instance.cost,
                                        run.final_gain());
      } catch (const Instability&) {
      }
    }
    out.push_back({gammas[i], run.final_gain(), run.failed, cost});
  }
  return out;
}

}  // namespace lqrlab
