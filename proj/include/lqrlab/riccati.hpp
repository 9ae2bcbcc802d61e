#pragma once

#include <vector>

#include "lqrlab/core_lds.hpp"

namespace lqrlab {

struct RiccatiSolution {
  MatrixXd M;  ///< value matrix
  MatrixXd K;  ///< gain, u = −Kx
  double residual = 0.0;  ///< ‖M − Ric(M)‖_F
  int iterations = 0;
};

struct FiniteHorizonSolution {
  std::vector<MatrixXd> gains;           ///< K_0 .. K_{N−1}
  std::vector<MatrixXd> value_matrices;  ///< M_0 .. M_N, M_N = S
  std::vector<double> offsets;           ///< c_0 .. c_N, c_N = 0
};

struct StabilityReport {
  double spectral_radius = 0.0;
  bool stable = false;
};

/// Backward Riccati recursion over N stages, starting from the terminal cost S.
/// Throws IllPosedCost if R + BᵀM_{t+1}B is numerically singular.
FiniteHorizonSolution finite_horizon_solve(const LinearSystem& system,
                                           const QuadraticCost& cost, int N);

/// Stabilizing solution of the DARE by value iteration on the Riccati map.
/// Stops once ‖M − Ric(M)‖_F ≤ tol·(1 + ‖M‖_F); throws NoStabilizingSolution on
/// divergence, non-convergence within max_iter, or a non-stabilizing fixed point.
RiccatiSolution dare_solve(const LinearSystem& system, const QuadraticCost& cost,
                           double tol = 1e-12, int max_iter = 1'000'000);

/// One application of the Riccati map, Q + AᵀMA − AᵀMB(R+BᵀMB)⁻¹BᵀMA.
MatrixXd riccati_map(const LinearSystem& system, const QuadraticCost& cost,
                     const MatrixXd& M);

/// K = (R + BᵀMB)⁻¹BᵀMA.
MatrixXd gain_from_value(const LinearSystem& system, const QuadraticCost& cost,
                         const MatrixXd& M);

StabilityReport stability_report(const LinearSystem& system, const MatrixXd& K);

double spectral_radius(const MatrixXd& M);

/// Solves X = F X Fᵀ + W by squared Smith iteration. Throws Instability when
/// ρ(F) ≥ 1.
MatrixXd solve_discrete_lyapunov(const MatrixXd& F, const MatrixXd& W,
                                 double tol = 1e-12);

/// Steady-state average stage cost ½·trace((Q + KᵀRK)X), X the closed-loop
/// state covariance. Throws Instability if ρ(A−BK) ≥ 1.
double closed_loop_average_cost(const LinearSystem& system,
                                const QuadraticCost& cost, const MatrixXd& K);

/// (J_hat − J_star)/J_star; J_star must be positive.
double relative_suboptimality(double J_hat, double J_star);

/// Receding-horizon action: plan H steps on `model` with terminal value
/// `terminal_value` and return only the first input −K_0 x.
VectorXd rhc_action(const LinearSystem& model, const QuadraticCost& cost,
                    const MatrixXd& terminal_value, int H, const VectorXd& x);

}  // namespace lqrlab
