#include "lqrlab/sysid.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Cholesky>
#include <Eigen/QR>
#include <Eigen/SVD>

#include "lqrlab/errors.hpp"

namespace lqrlab {

double operator_norm(const MatrixXd& M) {
  if (M.size() == 0) return 0.0;
  Eigen::JacobiSVD<MatrixXd> svd(M);
  return svd.singularValues()(0);
}

double nearest_rank_quantile(std::vector<double> values, double q) {
  LQRLAB_REQUIRE(!values.empty(), "quantile of an empty sample");
  LQRLAB_REQUIRE(q > 0.0 && q <= 1.0, "quantile level must be in (0, 1]");
  std::sort(values.begin(), values.end());
  const auto n = values.size();
  auto rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(n)));
  rank = std::clamp<std::size_t>(rank, 1, n);
  return values[rank - 1];
}

ModelEstimate least_squares_identify(const std::vector<Trajectory>& trajectories,
                                     double ridge) {
  LQRLAB_REQUIRE(ridge >= 0.0, "ridge must be nonnegative");
  Eigen::Index n = 0;
  Eigen::Index d = -1, p = -1;
  for (const auto& traj : trajectories) {
    LQRLAB_REQUIRE(traj.states.size() == traj.inputs.size() + 1,
                   "trajectory needs T+1 states");
    if (traj.inputs.empty()) continue;
    if (d < 0) {
      d = traj.states.front().size();
      p = traj.inputs.front().size();
    }
    n += static_cast<Eigen::Index>(traj.inputs.size());
  }
  LQRLAB_REQUIRE(n >= 1, "identification needs at least one transition");

  // Rows are transitions: Z = [xᵀ uᵀ], Y = x_nextᵀ, so Y ≈ Z Θ with Θ = [A B]ᵀ.
  MatrixXd Z(n, d + p);
  MatrixXd Y(n, d);
  Eigen::Index row = 0;
  for (const auto& traj : trajectories) {
    for (std::size_t t = 0; t < traj.inputs.size(); ++t, ++row) {
      LQRLAB_REQUIRE(traj.states[t].size() == d && traj.inputs[t].size() == p,
                     "inconsistent dimensions across trajectories");
      Z.row(row).head(d) = traj.states[t].transpose();
      Z.row(row).tail(p) = traj.inputs[t].transpose();
      Y.row(row) = traj.states[t + 1].transpose();
    }
  }

  MatrixXd theta;
  if (ridge == 0.0) {
    Eigen::ColPivHouseholderQR<MatrixXd> qr(Z);
    if (qr.rank() < d + p)
      throw InsufficientExcitation(
          "regressors have rank " + std::to_string(qr.rank()) + " < d+p = " +
          std::to_string(d + p));
    theta = qr.solve(Y);
  } else {
    MatrixXd gram = Z.transpose() * Z;
    gram.diagonal().array() += ridge;
    theta = gram.llt().solve(Z.transpose() * Y);
  }

  ModelEstimate est;
  est.A_hat = theta.topRows(d).transpose();
  est.B_hat = theta.bottomRows(p).transpose();
  const MatrixXd residuals = Y - Z * theta;
  MatrixXd cov = residuals.transpose() * residuals / static_cast<double>(n);
  est.residual_cov = 0.5 * (cov + cov.transpose());
  est.n_transitions = static_cast<int>(n);
  return est;
}

NominalResult nominal_pipeline(EpisodeBudget& budget, const LqrInstance& instance,
                               int n_episodes, double excitation_std, Rng& rng,
                               double ridge) {
  LQRLAB_REQUIRE(n_episodes >= 1, "n_episodes must be >= 1");
  LQRLAB_REQUIRE(excitation_std > 0.0, "excitation_std must be positive");
  const auto d = instance.system.state_dim();
  const auto p = instance.system.input_dim();
  const Policy probe = GaussianLinear{MatrixXd::Zero(p, d), excitation_std};

  NominalResult result;
  result.data.reserve(n_episodes);
  for (int e = 0; e < n_episodes; ++e)
    result.data.push_back(
        oracle_query(budget, instance, probe, instance.episode_len, rng));
  result.estimate = least_squares_identify(result.data, ridge);

  const LinearSystem model(result.estimate.A_hat, result.estimate.B_hat);
  try {
    result.gain = dare_solve(model, instance.cost).K;
  } catch (const NoStabilizingSolution&) {
  } catch (const IllPosedCost&) {
  }
  return result;
}

UncertaintyEstimate bootstrap_uncertainty(const ModelEstimate& estimate,
                                          const std::vector<Trajectory>& trajectories,
                                          Rng& rng, int n_boot, double confidence,
                                          double ridge) {
  LQRLAB_REQUIRE(n_boot >= 2, "n_boot must be >= 2");
  LQRLAB_REQUIRE(confidence > 0.0 && confidence < 1.0,
                 "confidence must be in (0, 1)");
  const LinearSystem fitted = estimate.as_system();
  std::vector<double> errs_A, errs_B;
  errs_A.reserve(n_boot);
  errs_B.reserve(n_boot);
  for (int b = 0; b < n_boot; ++b) {
    std::vector<Trajectory> synthetic;
    synthetic.reserve(trajectories.size());
    for (const auto& traj : trajectories) {
      Trajectory sim;
      sim.states.push_back(traj.states.front());
      for (const auto& u : traj.inputs) {
        sim.states.push_back(step(fitted, sim.states.back(), u, rng));
        sim.inputs.push_back(u);
      }
      synthetic.push_back(std::move(sim));
    }
    const ModelEstimate refit = least_squares_identify(synthetic, ridge);
    errs_A.push_back(operator_norm(refit.A_hat - estimate.A_hat));
    errs_B.push_back(operator_norm(refit.B_hat - estimate.B_hat));
  }
  UncertaintyEstimate out;
  out.eps_A = nearest_rank_quantile(errs_A, confidence);
  out.eps_B = nearest_rank_quantile(errs_B, confidence);
  out.confidence = confidence;
  out.n_boot = n_boot;
  return out;
}

}  // namespace lqrlab
