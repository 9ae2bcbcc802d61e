#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "lqrlab/core_lds.hpp"

namespace lqrlab::bench {

/// x_{t+1} = [[1,1],[0,1]]x + [0;1]u, Q = diag(1,0), R = r0, x0 = (−1,0).
LqrInstance instance_double_integrator(double r0 = 1.0, double noise_var = 1e-4,
                                       int episode_len = 10);

/// Three coupled heat sources: A tridiagonal (1.01 diagonal, 0.01 off-diagonal),
/// B = Q = I₃, R = r_scale·I₃, x0 = (1,1,1).
LqrInstance instance_laplacian(double r_scale = 1000.0, double noise_var = 1e-4,
                               int episode_len = 6);

/// Registered method names, in registry order.
const std::vector<std::string>& method_names();

struct MethodSpec {
  std::string name;
  nlohmann::json config = nlohmann::json::object();
};

struct ExperimentSpec {
  LqrInstance instance;
  std::vector<MethodSpec> methods;
  std::vector<int> seeds;
  std::vector<std::int64_t> budgets;  ///< strictly increasing sample budgets
  std::uint64_t seed_base = 0;
};

/// Outcome of running one method from scratch under a sample cap.
struct MethodOutcome {
  std::optional<MatrixXd> gain;
  std::int64_t samples = 0;
};

/// Throws ConfigError for unknown method names or malformed config blocks.
void validate_method(const MethodSpec& method);

MethodOutcome run_method(const MethodSpec& method, const LqrInstance& instance,
                         std::int64_t budget, Rng& rng);

struct RunRecord {
  std::string method;
  int seed = 0;
  std::int64_t samples = 0;
  double cost = 0.0;  ///< +inf is the failure sentinel
  bool stabilized = false;

  bool operator==(const RunRecord&) const = default;
};

struct Summary {
  std::string method;
  std::int64_t samples = 0;
  double median = 0.0;
  double min = 0.0;
  double max = 0.0;
  double stabilized_fraction = 0.0;
  int n = 0;
};

/// Records plus per-(method, samples) summaries derived from them.
class ResultTable {
 public:
  ResultTable() = default;
  explicit ResultTable(std::vector<RunRecord> records);

  const std::vector<RunRecord>& records() const { return records_; }
  const std::vector<Summary>& summaries() const { return summaries_; }
  const Summary* find(const std::string& method, std::int64_t samples) const;
  std::vector<Summary> summaries_for(const std::string& method) const;

 private:
  std::vector<RunRecord> records_;
  std::vector<Summary> summaries_;
};

/// Median in the extended reals: +inf sorts above every finite value and an
/// even-sized median touching +inf is +inf.
double extended_median(std::vector<double> values);

/// Per-cell stream seed: derive_seed(seed_base, method index, seed, budget index).
std::uint64_t cell_seed(std::uint64_t seed_base, std::size_t method_index, int seed,
                        std::size_t budget_index);

/// Runs every (method, seed, budget) cell from scratch. Unknown methods are
/// rejected before any run starts.
ResultTable run_experiment(const ExperimentSpec& spec);

/// Fraction of seeds with stabilized = true, keyed by (method, samples).
std::map<std::pair<std::string, std::int64_t>, double> stabilization_fraction(
    const ResultTable& table);

/// Smallest sample count whose median cost is at most `threshold`.
std::optional<std::int64_t> samples_to_reach(const ResultTable& table,
                                             const std::string& method,
                                             double threshold);

/// CSV with header `method,seed,samples,cost,stabilized`; costs use the
/// shortest round-trip decimal form and `inf` for the failure sentinel.
std::string emit_csv(const ResultTable& table);
ResultTable parse_csv(std::istream& in);
ResultTable parse_csv(const std::string& text);

enum class PlotMetric { kCost, kStabilization };
PlotMetric parse_metric(const std::string& name);

/// SVG document: per-method median line with a min–max band on log-x axes.
std::string emit_plot(const ResultTable& table, PlotMetric metric);

/// Spec document: instance fields (or "preset") plus methods, seeds, budgets,
/// seed_base.
ExperimentSpec experiment_from_json(const nlohmann::json& j);

}  // namespace lqrlab::bench
