#include "lqrlab/riccati.hpp"

#include <cmath>
#include <limits>
#include <string>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "lqrlab/errors.hpp"

namespace lqrlab {

namespace {

// Solves (R + BᵀMB) X = rhs; throws IllPosedCost when the matrix is not safely
// positive definite.
MatrixXd solve_input_block(const MatrixXd& H, const MatrixXd& rhs) {
  Eigen::LDLT<MatrixXd> ldlt(H);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive() ||
      ldlt.rcond() < 1e-14)
    throw IllPosedCost("R + B'MB is numerically singular or indefinite");
  return ldlt.solve(rhs);
}

MatrixXd symmetrize(const MatrixXd& M) { return 0.5 * (M + M.transpose()); }

}  // namespace

MatrixXd gain_from_value(const LinearSystem& system, const QuadraticCost& cost,
                         const MatrixXd& M) {
  const auto& A = system.A();
  const auto& B = system.B();
  LQRLAB_REQUIRE(M.rows() == A.rows() && M.cols() == A.rows(),
                 "value matrix must be d x d");
  const MatrixXd BtM = B.transpose() * M;
  return solve_input_block(cost.R() + BtM * B, BtM * A);
}

MatrixXd riccati_map(const LinearSystem& system, const QuadraticCost& cost,
                     const MatrixXd& M) {
  const auto& A = system.A();
  const auto& B = system.B();
  const MatrixXd BtMA = B.transpose() * M * A;
  const MatrixXd K = solve_input_block(cost.R() + B.transpose() * M * B, BtMA);
  return symmetrize(cost.Q() + A.transpose() * M * A - BtMA.transpose() * K);
}

FiniteHorizonSolution finite_horizon_solve(const LinearSystem& system,
                                           const QuadraticCost& cost, int N) {
  LQRLAB_REQUIRE(N >= 1, "horizon N must be >= 1");
  LQRLAB_REQUIRE(cost.Q().rows() == system.state_dim() &&
                     cost.R().rows() == system.input_dim(),
                 "cost does not match system dimensions");
  const auto& A = system.A();
  const auto& B = system.B();
  FiniteHorizonSolution sol;
  sol.gains.resize(N);
  sol.value_matrices.resize(N + 1);
  sol.offsets.assign(N + 1, 0.0);
  sol.value_matrices[N] = cost.S();
  for (int t = N - 1; t >= 0; --t) {
    const MatrixXd& next = sol.value_matrices[t + 1];
    const MatrixXd BtM = B.transpose() * next;
    MatrixXd K = solve_input_block(cost.R() + BtM * B, BtM * A);
    sol.value_matrices[t] = symmetrize(cost.Q() + A.transpose() * next * A -
                                       (BtM * A).transpose() * K);
    sol.offsets[t] =
        sol.offsets[t + 1] + 0.5 * (next * system.noise_cov()).trace();
    sol.gains[t] = std::move(K);
  }
  return sol;
}

RiccatiSolution dare_solve(const LinearSystem& system, const QuadraticCost& cost,
                           double tol, int max_iter) {
  LQRLAB_REQUIRE(cost.Q().rows() == system.state_dim() &&
                     cost.R().rows() == system.input_dim(),
                 "cost does not match system dimensions");
  LQRLAB_REQUIRE(tol > 0.0 && max_iter >= 1, "invalid DARE tolerance settings");
  MatrixXd M = MatrixXd::Zero(system.state_dim(), system.state_dim());
  for (int it = 1; it <= max_iter; ++it) {
    MatrixXd next = riccati_map(system, cost, M);
    if (!next.allFinite())
      throw NoStabilizingSolution("Riccati iteration diverged after " +
                                  std::to_string(it) + " iterations");
    const double residual = (next - M).norm();
    M = std::move(next);
    if (residual <= tol * (1.0 + M.norm())) {
      RiccatiSolution sol;
      sol.M = M;
      sol.K = gain_from_value(system, cost, M);
      sol.residual = (riccati_map(system, cost, M) - M).norm();
      sol.iterations = it;
      if (!stability_report(system, sol.K).stable)
        throw NoStabilizingSolution(
            "Riccati fixed point does not stabilize (A, B)");
      return sol;
    }
  }
  throw NoStabilizingSolution("Riccati iteration did not converge within " +
                              std::to_string(max_iter) + " iterations");
}

double spectral_radius(const MatrixXd& M) {
  LQRLAB_REQUIRE(M.rows() == M.cols(), "spectral radius needs a square matrix");
  if (M.size() == 0) return 0.0;
  if (M.isApprox(M.transpose(), 0.0)) {
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(M, Eigen::EigenvaluesOnly);
    return es.eigenvalues().cwiseAbs().maxCoeff();
  }
  Eigen::EigenSolver<MatrixXd> es(M, false);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

StabilityReport stability_report(const LinearSystem& system, const MatrixXd& K) {
  LQRLAB_REQUIRE(K.rows() == system.input_dim() && K.cols() == system.state_dim(),
                 "gain must be p x d");
  StabilityReport report;
  report.spectral_radius = spectral_radius(system.A() - system.B() * K);
  report.stable = report.spectral_radius < 1.0;
  return report;
}

MatrixXd solve_discrete_lyapunov(const MatrixXd& F, const MatrixXd& W,
                                 double tol) {
  LQRLAB_REQUIRE(F.rows() == F.cols() && W.rows() == F.rows() &&
                     W.cols() == F.rows(),
                 "Lyapunov operands must be square and conformant");
  if (spectral_radius(F) >= 1.0)
    throw Instability("Lyapunov equation has no bounded solution: rho(F) >= 1");
  // X_{k+1} = X_k + F_k X_k F_kᵀ, F_{k+1} = F_k²; after k steps X sums 2^k terms.
  MatrixXd X = W;
  MatrixXd Fk = F;
  for (int it = 0; it < 200; ++it) {
    MatrixXd increment = Fk * X * Fk.transpose();
    X += increment;
    Fk = Fk * Fk;
    if (increment.norm() <= tol * (1.0 + X.norm())) break;
  }
  // Polish with plain fixed-point sweeps so the residual meets tol directly.
  for (int it = 0; it < 50; ++it) {
    MatrixXd next = F * X * F.transpose() + W;
    const double r = (next - X).norm();
    X = symmetrize(next);
    if (r <= tol * (1.0 + X.norm())) break;
  }
  return X;
}

double closed_loop_average_cost(const LinearSystem& system,
                                const QuadraticCost& cost, const MatrixXd& K) {
  LQRLAB_REQUIRE(K.rows() == system.input_dim() && K.cols() == system.state_dim(),
                 "gain must be p x d");
  const MatrixXd closed = system.A() - system.B() * K;
  const MatrixXd X = solve_discrete_lyapunov(closed, system.noise_cov());
  return 0.5 * ((cost.Q() + K.transpose() * cost.R() * K) * X).trace();
}

double relative_suboptimality(double J_hat, double J_star) {
  LQRLAB_REQUIRE(J_star > 0.0, "J_star must be positive");
  return (J_hat - J_star) / J_star;
}

VectorXd rhc_action(const LinearSystem& model, const QuadraticCost& cost,
                    const MatrixXd& terminal_value, int H, const VectorXd& x) {
  LQRLAB_REQUIRE(x.size() == model.state_dim(), "state dimension mismatch");
  const QuadraticCost planning(cost.Q(), cost.R(), terminal_value);
  const auto plan = finite_horizon_solve(model, planning, H);
  return -plan.gains.front() * x;
}

}  // namespace lqrlab
