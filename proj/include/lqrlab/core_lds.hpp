#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <variant>
#include <vector>

#include <Eigen/Core>

#include "lqrlab/rng.hpp"

namespace lqrlab {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// x_{t+1} = A x_t + B u_t + e_t, e_t ~ N(0, noise_cov).
class LinearSystem {
 public:
  LinearSystem(MatrixXd A, MatrixXd B, MatrixXd noise_cov);
  /// Noiseless system.
  LinearSystem(MatrixXd A, MatrixXd B);

  const MatrixXd& A() const { return A_; }
  const MatrixXd& B() const { return B_; }
  const MatrixXd& noise_cov() const { return noise_cov_; }
  /// F with F Fᵀ = noise_cov; zero when the system is noiseless.
  const MatrixXd& noise_factor() const { return noise_factor_; }

  Eigen::Index state_dim() const { return A_.rows(); }
  Eigen::Index input_dim() const { return B_.cols(); }

 private:
  MatrixXd A_, B_, noise_cov_, noise_factor_;
};

/// Stage cost xᵀQx + uᵀRu, terminal cost xᵀSx.
class QuadraticCost {
 public:
  QuadraticCost(MatrixXd Q, MatrixXd R, MatrixXd S);
  /// Zero terminal cost.
  QuadraticCost(MatrixXd Q, MatrixXd R);

  const MatrixXd& Q() const { return Q_; }
  const MatrixXd& R() const { return R_; }
  const MatrixXd& S() const { return S_; }

  double stage(const VectorXd& x, const VectorXd& u) const;
  double terminal(const VectorXd& x) const;

 private:
  MatrixXd Q_, R_, S_;
};

struct LqrInstance {
  LqrInstance(LinearSystem system, QuadraticCost cost, VectorXd x0,
              int episode_len);

  LinearSystem system;
  QuadraticCost cost;
  VectorXd x0;
  int episode_len;
};

/// Rollout record. stage_costs[t] = xᵀQx + uᵀRu at step t (no ½ factor; the
/// ½ is applied by trajectory_cost).
struct Trajectory {
  std::vector<VectorXd> states;
  std::vector<VectorXd> inputs;
  std::vector<double> stage_costs;

  int horizon() const { return static_cast<int>(inputs.size()); }
};

/// Throws ContractViolation when lengths or recorded stage costs disagree.
void validate_trajectory(const Trajectory& traj, const QuadraticCost& cost);

/// u = −Kx.
struct LinearGain {
  MatrixXd K;
};

/// u_t = −K_t x_t.
struct TimeVaryingGains {
  std::vector<MatrixXd> gains;
};

/// u = −Kx + σ_u·η, η ~ N(0, I).
struct GaussianLinear {
  MatrixXd K;
  double exploration_std;
};

using Policy = std::variant<LinearGain, TimeVaryingGains, GaussianLinear>;

/// Generic feedback law used by rollout: (t, x_t, rng) -> u_t.
using ActionFn = std::function<VectorXd(int, const VectorXd&, Rng&)>;

VectorXd act(const Policy& policy, int t, const VectorXd& x, Rng& rng);

/// Throws ContractViolation if the policy's gains do not fit (d, p).
void check_policy(const Policy& policy, Eigen::Index d, Eigen::Index p);

/// Single-owner sample counter for the episodic oracle.
class EpisodeBudget {
 public:
  struct Entry {
    int episode;
    int horizon;
  };

  EpisodeBudget() = default;
  explicit EpisodeBudget(std::int64_t cap) : cap_(cap) {}

  std::int64_t samples_used() const { return samples_used_; }
  const std::vector<Entry>& log() const { return log_; }
  std::optional<std::int64_t> cap() const { return cap_; }
  std::int64_t remaining() const;

  /// Records one episode of `horizon` samples; throws BudgetExhausted past the cap.
  void charge(int horizon);

 private:
  std::int64_t samples_used_ = 0;
  std::vector<Entry> log_;
  std::optional<std::int64_t> cap_;
};

VectorXd step(const LinearSystem& system, const VectorXd& x, const VectorXd& u,
              Rng& rng);

Trajectory rollout(const LqrInstance& instance, const Policy& policy,
                   int horizon, Rng& rng);
Trajectory rollout(const LqrInstance& instance, const ActionFn& policy,
                   int horizon, Rng& rng);

/// ½·Σ_t stage_t + ½·x_Tᵀ S x_T, recomputed from states and inputs.
double trajectory_cost(const Trajectory& traj, const QuadraticCost& cost);

Trajectory oracle_query(EpisodeBudget& budget, const LqrInstance& instance,
                        const Policy& policy, int horizon, Rng& rng);
Trajectory oracle_query(EpisodeBudget& budget, const LqrInstance& instance,
                        const ActionFn& policy, int horizon, Rng& rng);

/// Symmetric-PSD check used for covariance and cost matrices.
bool is_symmetric(const MatrixXd& M, double rel_tol = 1e-12);
bool is_psd(const MatrixXd& M, double tol = 1e-12);

}  // namespace lqrlab
