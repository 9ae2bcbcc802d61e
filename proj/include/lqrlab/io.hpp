#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "lqrlab/adp.hpp"
#include "lqrlab/core_lds.hpp"
#include "lqrlab/riccati.hpp"
#include "lqrlab/sysid.hpp"

namespace lqrlab::io {

using nlohmann::json;

/// Row-major nested arrays. A bare number is read as a 1×1 matrix.
MatrixXd matrix_from_json(const json& j, const std::string& field);
VectorXd vector_from_json(const json& j, const std::string& field);
json matrix_to_json(const MatrixXd& M);
json vector_to_json(const VectorXd& v);

/// Instance document: A, B, Q, R, x0, episode_len required; noise_cov and S
/// default to zero.
LqrInstance instance_from_json(const json& j);
json instance_to_json(const LqrInstance& instance);

json solution_to_json(const RiccatiSolution& sol, const StabilityReport& report,
                      double average_cost);
json estimate_to_json(const ModelEstimate& est, const UncertaintyEstimate* unc);
json q_to_json(const QuadraticQ& q);
QuadraticQ q_from_json(const json& j);

json read_json_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace lqrlab::io
