#include "lqrlab/core_lds.hpp"

#include <cmath>
#include <limits>
#include <string>

#include <Eigen/Eigenvalues>

#include "lqrlab/errors.hpp"

namespace lqrlab {

namespace {

std::string shape(const MatrixXd& M) {
  return std::to_string(M.rows()) + "x" + std::to_string(M.cols());
}

MatrixXd psd_factor(const MatrixXd& S) {
  if (S.isZero(0.0)) return MatrixXd::Zero(S.rows(), S.cols());
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(S);
  VectorXd root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * root.asDiagonal();
}

}  // namespace

bool is_symmetric(const MatrixXd& M, double rel_tol) {
  if (M.rows() != M.cols()) return false;
  const double scale = std::max(1.0, M.norm());
  return (M - M.transpose()).norm() <= rel_tol * scale;
}

bool is_psd(const MatrixXd& M, double tol) {
  if (!is_symmetric(M)) return false;
  if (M.size() == 0) return true;
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(0.5 * (M + M.transpose()),
                                             Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff() >= -tol * std::max(1.0, M.norm());
}

LinearSystem::LinearSystem(MatrixXd A, MatrixXd B, MatrixXd noise_cov)
    : A_(std::move(A)), B_(std::move(B)), noise_cov_(std::move(noise_cov)) {
  LQRLAB_REQUIRE(A_.rows() == A_.cols(), "A must be square, got " + shape(A_));
  LQRLAB_REQUIRE(B_.rows() == A_.rows(),
                 "B must have " + std::to_string(A_.rows()) + " rows, got " +
                     shape(B_));
  LQRLAB_REQUIRE(noise_cov_.rows() == A_.rows() && noise_cov_.cols() == A_.rows(),
                 "noise_cov must be d x d, got " + shape(noise_cov_));
  LQRLAB_REQUIRE(is_psd(noise_cov_), "noise_cov must be symmetric PSD");
  noise_factor_ = psd_factor(noise_cov_);
}

LinearSystem::LinearSystem(MatrixXd A, MatrixXd B)
    : LinearSystem(A, B, MatrixXd::Zero(A.rows(), A.rows())) {}

QuadraticCost::QuadraticCost(MatrixXd Q, MatrixXd R, MatrixXd S)
    : Q_(std::move(Q)), R_(std::move(R)), S_(std::move(S)) {
  LQRLAB_REQUIRE(Q_.rows() == Q_.cols(), "Q must be square, got " + shape(Q_));
  LQRLAB_REQUIRE(S_.rows() == Q_.rows() && S_.cols() == Q_.rows(),
                 "S must match Q, got " + shape(S_));
  LQRLAB_REQUIRE(R_.rows() == R_.cols() && R_.rows() > 0,
                 "R must be square and nonempty, got " + shape(R_));
  LQRLAB_REQUIRE(is_psd(Q_), "Q must be symmetric PSD");
  LQRLAB_REQUIRE(is_psd(S_), "S must be symmetric PSD");
  LQRLAB_REQUIRE(is_symmetric(R_), "R must be symmetric");
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(R_, Eigen::EigenvaluesOnly);
  LQRLAB_REQUIRE(es.eigenvalues().minCoeff() > 0.0, "R must be positive definite");
}

QuadraticCost::QuadraticCost(MatrixXd Q, MatrixXd R)
    : QuadraticCost(Q, R, MatrixXd::Zero(Q.rows(), Q.cols())) {}

double QuadraticCost::stage(const VectorXd& x, const VectorXd& u) const {
  return x.dot(Q_ * x) + u.dot(R_ * u);
}

double QuadraticCost::terminal(const VectorXd& x) const { return x.dot(S_ * x); }

LqrInstance::LqrInstance(LinearSystem system_, QuadraticCost cost_, VectorXd x0_,
                         int episode_len_)
    : system(std::move(system_)),
      cost(std::move(cost_)),
      x0(std::move(x0_)),
      episode_len(episode_len_) {
  const auto d = system.state_dim();
  LQRLAB_REQUIRE(cost.Q().rows() == d, "cost Q does not match state dimension");
  LQRLAB_REQUIRE(cost.R().rows() == system.input_dim(),
                 "cost R does not match input dimension");
  LQRLAB_REQUIRE(x0.size() == d, "x0 does not match state dimension");
  LQRLAB_REQUIRE(episode_len >= 1, "episode_len must be >= 1");
}

void validate_trajectory(const Trajectory& traj, const QuadraticCost& cost) {
  const auto T = traj.inputs.size();
  LQRLAB_REQUIRE(traj.states.size() == T + 1, "trajectory needs T+1 states");
  LQRLAB_REQUIRE(traj.stage_costs.size() == T, "trajectory needs T stage costs");
  for (std::size_t t = 0; t < T; ++t) {
    const double c = cost.stage(traj.states[t], traj.inputs[t]);
    LQRLAB_REQUIRE(std::abs(c - traj.stage_costs[t]) <=
                       1e-10 * std::max(1.0, std::abs(c)),
                   "stage cost mismatch at t=" + std::to_string(t));
  }
}

VectorXd act(const Policy& policy, int t, const VectorXd& x, Rng& rng) {
  return std::visit(
      [&](const auto& p) -> VectorXd {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, LinearGain>) {
          return -p.K * x;
        } else if constexpr (std::is_same_v<P, TimeVaryingGains>) {
          LQRLAB_REQUIRE(t < static_cast<int>(p.gains.size()),
                         "time-varying policy shorter than horizon");
          return -p.gains[t] * x;
        } else {
          VectorXd u = -p.K * x;
          for (Eigen::Index i = 0; i < u.size(); ++i)
            u[i] += p.exploration_std * rng.normal();
          return u;
        }
      },
      policy);
}

void check_policy(const Policy& policy, Eigen::Index d, Eigen::Index p) {
  auto fits = [&](const MatrixXd& K) { return K.rows() == p && K.cols() == d; };
  std::visit(
      [&](const auto& pol) {
        using P = std::decay_t<decltype(pol)>;
        if constexpr (std::is_same_v<P, TimeVaryingGains>) {
          for (const auto& K : pol.gains)
            LQRLAB_REQUIRE(fits(K), "gain must be p x d, got " + shape(K));
        } else {
          LQRLAB_REQUIRE(fits(pol.K), "gain must be p x d, got " + shape(pol.K));
          if constexpr (std::is_same_v<P, GaussianLinear>)
            LQRLAB_REQUIRE(pol.exploration_std > 0.0,
                           "exploration_std must be positive");
        }
      },
      policy);
}

std::int64_t EpisodeBudget::remaining() const {
  if (!cap_) return std::numeric_limits<std::int64_t>::max();
  return *cap_ - samples_used_;
}

void EpisodeBudget::charge(int horizon) {
  LQRLAB_REQUIRE(horizon >= 1, "horizon must be >= 1");
  if (cap_ && samples_used_ + horizon > *cap_)
    throw BudgetExhausted("episode of " + std::to_string(horizon) +
                          " samples exceeds remaining budget " +
                          std::to_string(*cap_ - samples_used_));
  log_.push_back({static_cast<int>(log_.size()), horizon});
  samples_used_ += horizon;
}

VectorXd step(const LinearSystem& system, const VectorXd& x, const VectorXd& u,
              Rng& rng) {
  LQRLAB_REQUIRE(x.size() == system.state_dim(), "state dimension mismatch");
  LQRLAB_REQUIRE(u.size() == system.input_dim(), "input dimension mismatch");
  VectorXd next = system.A() * x;
  if (u.size() > 0) next.noalias() += system.B() * u;
  next.noalias() += system.noise_factor() * rng.normal_vector(x.size());
  return next;
}

Trajectory rollout(const LqrInstance& instance, const ActionFn& policy,
                   int horizon, Rng& rng) {
  LQRLAB_REQUIRE(horizon >= 1, "horizon must be >= 1");
  Trajectory traj;
  traj.states.reserve(horizon + 1);
  traj.inputs.reserve(horizon);
  traj.stage_costs.reserve(horizon);
  traj.states.push_back(instance.x0);
  for (int t = 0; t < horizon; ++t) {
    const VectorXd& x = traj.states.back();
    VectorXd u = policy(t, x, rng);
    LQRLAB_REQUIRE(u.size() == instance.system.input_dim(),
                   "policy produced wrong input dimension");
    traj.stage_costs.push_back(instance.cost.stage(x, u));
    VectorXd next = step(instance.system, x, u, rng);
    traj.inputs.push_back(std::move(u));
    traj.states.push_back(std::move(next));
  }
  return traj;
}

Trajectory rollout(const LqrInstance& instance, const Policy& policy,
                   int horizon, Rng& rng) {
  check_policy(policy, instance.system.state_dim(), instance.system.input_dim());
  return rollout(
      instance,
      ActionFn([&policy](int t, const VectorXd& x, Rng& r) {
        return act(policy, t, x, r);
      }),
      horizon, rng);
}

double trajectory_cost(const Trajectory& traj, const QuadraticCost& cost) {
  LQRLAB_REQUIRE(traj.states.size() == traj.inputs.size() + 1,
                 "trajectory needs T+1 states");
  double total = 0.0;
  for (std::size_t t = 0; t < traj.inputs.size(); ++t)
    total += cost.stage(traj.states[t], traj.inputs[t]);
  total += cost.terminal(traj.states.back());
  return 0.5 * total;
}

Trajectory oracle_query(EpisodeBudget& budget, const LqrInstance& instance,
                        const Policy& policy, int horizon, Rng& rng) {
  check_policy(policy, instance.system.state_dim(), instance.system.input_dim());
  budget.charge(horizon);
  return rollout(instance, policy, horizon, rng);
}

Trajectory oracle_query(EpisodeBudget& budget, const LqrInstance& instance,
                        const ActionFn& policy, int horizon, Rng& rng) {
  budget.charge(horizon);
  return rollout(instance, policy, horizon, rng);
}

}  // namespace lqrlab
