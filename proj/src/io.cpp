#include "lqrlab/io.hpp"

#include <fstream>
#include <sstream>

#include "lqrlab/errors.hpp"

namespace lqrlab::io {

MatrixXd matrix_from_json(const json& j, const std::string& field) {
  if (j.is_number()) return MatrixXd::Constant(1, 1, j.get<double>());
  if (!j.is_array()) throw ConfigError(field + ": expected a nested array");
  const auto rows = static_cast<Eigen::Index>(j.size());
  if (rows == 0) return MatrixXd(0, 0);
  if (!j.front().is_array())
    throw ConfigError(field + ": expected rows as arrays (row-major)");
  const auto cols = static_cast<Eigen::Index>(j.front().size());
  MatrixXd M(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const auto& row = j[r];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols)
      throw ConfigError(field + ": ragged row " + std::to_string(r));
    for (Eigen::Index c = 0; c < cols; ++c) {
      if (!row[c].is_number())
        throw ConfigError(field + ": non-numeric entry");
      M(r, c) = row[c].get<double>();
    }
  }
  return M;
}

VectorXd vector_from_json(const json& j, const std::string& field) {
  if (j.is_number()) return VectorXd::Constant(1, j.get<double>());
  if (!j.is_array()) throw ConfigError(field + ": expected an array");
  VectorXd v(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw ConfigError(field + ": non-numeric entry");
    v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
  }
  return v;
}

json matrix_to_json(const MatrixXd& M) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < M.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < M.cols(); ++c) row.push_back(M(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

json vector_to_json(const VectorXd& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

namespace {

const json& require(const json& j, const char* key) {
  if (!j.contains(key)) throw ConfigError(std::string("missing field '") + key + "'");
  return j.at(key);
}

}  // namespace

LqrInstance instance_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("instance document must be an object");
  MatrixXd A = matrix_from_json(require(j, "A"), "A");
  MatrixXd B = matrix_from_json(require(j, "B"), "B");
  MatrixXd Q = matrix_from_json(require(j, "Q"), "Q");
  MatrixXd R = matrix_from_json(require(j, "R"), "R");
  MatrixXd noise = j.contains("noise_cov")
                       ? matrix_from_json(j.at("noise_cov"), "noise_cov")
                       : MatrixXd::Zero(A.rows(), A.rows());
  MatrixXd S = j.contains("S") ? matrix_from_json(j.at("S"), "S")
                               : MatrixXd::Zero(Q.rows(), Q.cols());
  VectorXd x0 = vector_from_json(require(j, "x0"), "x0");
  const auto& len = require(j, "episode_len");
  if (!len.is_number_integer()) throw ConfigError("episode_len must be an integer");
  try {
    return LqrInstance(LinearSystem(std::move(A), std::move(B), std::move(noise)),
                       QuadraticCost(std::move(Q), std::move(R), std::move(S)),
                       std::move(x0), len.get<int>());
  } catch (const ContractViolation& e) {
    throw ConfigError(std::string("invalid instance: ") + e.what());
  }
}

json instance_to_json(const LqrInstance& instance) {
  return {{"A", matrix_to_json(instance.system.A())},
          {"B", matrix_to_json(instance.system.B())},
          {"noise_cov", matrix_to_json(instance.system.noise_cov())},
          {"Q", matrix_to_json(instance.cost.Q())},
          {"R", matrix_to_json(instance.cost.R())},
          {"S", matrix_to_json(instance.cost.S())},
          {"x0", vector_to_json(instance.x0)},
          {"episode_len", instance.episode_len}};
}

json solution_to_json(const RiccatiSolution& sol, const StabilityReport& report,
                      double average_cost) {
  return {{"M", matrix_to_json(sol.M)},
          {"K", matrix_to_json(sol.K)},
          {"spectral_radius", report.spectral_radius},
          {"stable", report.stable},
          {"average_cost", average_cost},
          {"residual", sol.residual},
          {"iterations", sol.iterations}};
}

json estimate_to_json(const ModelEstimate& est, const UncertaintyEstimate* unc) {
  json out = {{"A", matrix_to_json(est.A_hat)},
              {"B", matrix_to_json(est.B_hat)},
              {"noise_cov", matrix_to_json(est.residual_cov)},
              {"n_transitions", est.n_transitions}};
  if (unc) {
    out["eps_A"] = unc->eps_A;
    out["eps_B"] = unc->eps_B;
    out["confidence"] = unc->confidence;
    out["n_boot"] = unc->n_boot;
  }
  return out;
}

json q_to_json(const QuadraticQ& q) {
  return {{"W", matrix_to_json(q.W)},
          {"offset", q.offset},
          {"state_dim", q.state_dim}};
}

QuadraticQ q_from_json(const json& j) {
  QuadraticQ q;
  q.W = matrix_from_json(require(j, "W"), "W");
  q.offset = require(j, "offset").get<double>();
  q.state_dim = require(j, "state_dim").get<Eigen::Index>();
  if (q.W.rows() != q.W.cols() || q.state_dim > q.W.rows())
    throw ConfigError("W must be square with state_dim <= its size");
  if (!is_symmetric(q.W)) throw ConfigError("W must be symmetric");
  return q;
}

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  try {
    return json::parse(in, nullptr, true, /*ignore_comments=*/true);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw WriteError("cannot open " + path.string() + " for writing");
  out << text;
  out.flush();
  if (!out) throw WriteError("write to " + path.string() + " failed");
}

}  // namespace lqrlab::io
