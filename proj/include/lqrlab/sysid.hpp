#pragma once

#include <optional>
#include <vector>

#include "lqrlab/core_lds.hpp"
#include "lqrlab/riccati.hpp"

namespace lqrlab {

struct ModelEstimate {
  MatrixXd A_hat;
  MatrixXd B_hat;
  MatrixXd residual_cov;  ///< (1/n)·Σ r rᵀ over one-step residuals
  int n_transitions = 0;

  LinearSystem as_system() const { return {A_hat, B_hat, residual_cov}; }
};

struct UncertaintyEstimate {
  double eps_A = 0.0;  ///< operator-norm error quantile for A_hat
  double eps_B = 0.0;
  double confidence = 0.95;
  int n_boot = 0;
};

/// Jointly fits x_{t+1} ≈ A x_t + B u_t over every transition of every
/// trajectory, minimizing Σ‖x_{t+1} − A x_t − B u_t‖² + ridge·‖[A B]‖_F².
/// With ridge = 0 the stacked regressors must have full column rank d+p,
/// otherwise InsufficientExcitation is thrown.
ModelEstimate least_squares_identify(const std::vector<Trajectory>& trajectories,
                                     double ridge = 0.0);

struct NominalResult {
  ModelEstimate estimate;
  std::vector<Trajectory> data;
  /// Certainty-equivalent gain; empty when the DARE on the estimate failed.
  std::optional<MatrixXd> gain;
};

/// Identify-then-control. Collects n_episodes excitation rollouts of length
/// instance.episode_len with u_t ~ N(0, excitation_std²·I), fits the model, and
/// solves the DARE on (A_hat, B_hat) with the instance's true cost.
NominalResult nominal_pipeline(EpisodeBudget& budget, const LqrInstance& instance,
                               int n_episodes, double excitation_std, Rng& rng,
                               double ridge = 0.0);

/// Parametric bootstrap: resimulates every trajectory on (A_hat, B_hat) with
/// noise N(0, residual_cov), replaying the recorded inputs from the recorded
/// initial states, refits, and reports the nearest-rank `confidence` quantile
/// of ‖A_boot − A_hat‖₂ and ‖B_boot − B_hat‖₂.
UncertaintyEstimate bootstrap_uncertainty(const ModelEstimate& estimate,
                                          const std::vector<Trajectory>& trajectories,
                                          Rng& rng, int n_boot = 100,
                                          double confidence = 0.95,
                                          double ridge = 0.0);

/// Largest singular value.
double operator_norm(const MatrixXd& M);

/// Nearest-rank empirical quantile: the ⌈q·n⌉-th smallest value.
double nearest_rank_quantile(std::vector<double> values, double q);

}  // namespace lqrlab
