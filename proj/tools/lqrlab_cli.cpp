// Command-line front end: solve, identify, bench, plot, diag variance.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "lqrlab/bench.hpp"
#include "lqrlab/errors.hpp"
#include "lqrlab/io.hpp"
#include "lqrlab/policysearch.hpp"
#include "lqrlab/riccati.hpp"
#include "lqrlab/rng.hpp"
#include "lqrlab/sysid.hpp"

namespace {

using namespace lqrlab;

constexpr int kExitFailure = 1;
constexpr int kExitConfig = 2;
constexpr int kExitWrite = 3;

// Parses "a..b" into a, 2a, 4a, ... up to b. A single integer is one dimension.
std::vector<int> parse_dims(const std::string& text) {
  const auto dots = text.find("..");
  try {
    if (dots == std::string::npos) {
      const int d = std::stoi(text);
      if (d < 1) throw ConfigError("dimension must be positive");
      return {d};
    }
    const int lo = std::stoi(text.substr(0, dots));
    const int hi = std::stoi(text.substr(dots + 2));
    if (lo < 1 || hi < lo) throw ConfigError("bad dimension range '" + text + "'");
    std::vector<int> dims;
    for (long d = lo; d <= hi; d *= 2) dims.push_back(static_cast<int>(d));
    return dims;
  } catch (const std::logic_error&) {
    throw ConfigError("bad dimension range '" + text + "'");
  }
}

void emit(const std::string& text, const std::string& out_path) {
  if (out_path.empty() || out_path == "-") {
    std::cout << text;
    std::cout.flush();
    if (!std::cout) throw WriteError("write to stdout failed");
  } else {
    io::write_text_file(out_path, text);
  }
}

int run_solve(const std::string& instance_path) {
  const LqrInstance inst = io::instance_from_json(io::read_json_file(instance_path));
  const RiccatiSolution sol = dare_solve(inst.system, inst.cost);
  const StabilityReport report = stability_report(inst.system, sol.K);
  const double avg = 0.5 * (sol.M * inst.system.noise_cov()).trace();
  std::cout << io::solution_to_json(sol, report, avg).dump(2) << "\n";
  return 0;
}

int run_identify(const std::string& instance_path, int episodes, double excitation,
                 std::uint64_t seed, int n_boot) {
  const LqrInstance inst = io::instance_from_json(io::read_json_file(instance_path));
  if (episodes < 1) throw ConfigError("--episodes must be at least 1");
  if (!(excitation > 0.0)) throw ConfigError("--excitation must be positive");
  EpisodeBudget budget;
  Rng rng(seed);
  const NominalResult res = nominal_pipeline(budget, inst, episodes, excitation, rng);
  nlohmann::json out;
  if (n_boot >= 2) {
    const UncertaintyEstimate unc =
        bootstrap_uncertainty(res.estimate, res.data, rng, n_boot);
    out = io::estimate_to_json(res.estimate, &unc);
  } else {
    out = io::estimate_to_json(res.estimate, nullptr);
  }
  out["samples"] = budget.samples_used();
  if (res.gain) {
    out["K"] = io::matrix_to_json(*res.gain);
    const double cost = evaluate_gain(inst, *res.gain);
    out["stabilizing"] = std::isfinite(cost);
    if (std::isfinite(cost)) out["average_cost"] = cost;
  } else {
    out["K"] = nullptr;
    out["stabilizing"] = false;
  }
  std::cout << out.dump(2) << "\n";
  return 0;
}

int run_bench(const std::string& spec_path, const std::string& out_path, bool quiet) {
  const bench::ExperimentSpec spec =
      bench::experiment_from_json(io::read_json_file(spec_path));
  const bench::ResultTable table = bench::run_experiment(spec);
  emit(bench::emit_csv(table), out_path);
  if (!quiet) {
    std::cerr << std::left << std::setw(15) << "method" << std::setw(10) << "samples"
              << std::setw(14) << "median" << "stabilized\n";
    for (const auto& s : table.summaries())
      std::cerr << std::setw(15) << s.method << std::setw(10) << s.samples
                << std::setw(14) << s.median << s.stabilized_fraction << "\n";
  }
  return 0;
}

int run_plot(const std::string& csv_path, const std::string& metric,
             const std::string& out_path) {
  std::ifstream in(csv_path);
  if (!in) throw ConfigError("cannot open " + csv_path);
  const bench::ResultTable table = bench::parse_csv(in);
  emit(bench::emit_plot(table, bench::parse_metric(metric)), out_path);
  return 0;
}

int run_diag_variance(const std::string& dims_text, double sigma, int samples,
                      std::uint64_t seed) {
  if (!(sigma > 0.0)) throw ConfigError("--sigma must be positive");
  if (samples < 2) throw ConfigError("--samples must be at least 2");
  const std::vector<int> dims = parse_dims(dims_text);
  std::vector<double> lx, ly;
  std::cout << "d,mean_norm,std_error\n";
  for (std::size_t i = 0; i < dims.size(); ++i) {
    Rng rng(derive_seed({seed, static_cast<std::uint64_t>(dims[i])}));
    const auto stats = gradient_variance_diag(dims[i], sigma, VectorXd::Zero(dims[i]),
                                              samples, rng);
    std::cout << dims[i] << "," << stats.mean << "," << stats.std_error << "\n";
    lx.push_back(std::log(dims[i]));
    ly.push_back(std::log(stats.mean));
  }
  if (lx.size() >= 2) {
    const double n = static_cast<double>(lx.size());
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < lx.size(); ++i) mx += lx[i] / n, my += ly[i] / n;
    double sxy = 0, sxx = 0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
      sxy += (lx[i] - mx) * (ly[i] - my);
      sxx += (lx[i] - mx) * (lx[i] - mx);
    }
    std::cerr << "log-log slope: " << sxy / sxx << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Linear quadratic regulator learning toolkit"};
  app.require_subcommand(1);

  std::string instance_path;
  auto* solve = app.add_subcommand("solve", "Solve the DARE for an instance file");
  solve->add_option("instance", instance_path, "instance JSON")->required();

  int episodes = 1;
  double excitation = 1.0;
  std::uint64_t seed = 0;
  int n_boot = 100;
  auto* identify =
      app.add_subcommand("identify", "Least-squares identification plus nominal gain");
  identify->add_option("instance", instance_path, "instance JSON")->required();
  identify->add_option("--episodes", episodes, "number of excitation rollouts");
  identify->add_option("--excitation", excitation, "input standard deviation");
  identify->add_option("--seed", seed, "random seed");
  identify->add_option("--bootstrap", n_boot, "bootstrap resamples (0 disables)");

  std::string spec_path, out_path;
  bool quiet = false;
  auto* bench_cmd = app.add_subcommand("bench", "Run a benchmark spec");
  bench_cmd->add_option("spec", spec_path, "spec JSON")->required();
  bench_cmd->add_option("--out", out_path, "CSV destination (default stdout)");
  bench_cmd->add_flag("--quiet", quiet, "suppress the summary on stderr");

  std::string csv_path, metric = "cost";
  auto* plot = app.add_subcommand("plot", "Render benchmark results as SVG");
  plot->add_option("csv", csv_path, "results CSV")->required();
  plot->add_option("--metric", metric, "cost or stabilization");
  plot->add_option("--out", out_path, "SVG destination (default stdout)");

  std::string dims = "2..64";
  double sigma = 1.0;
  int samples = 20000;
  auto* diag = app.add_subcommand("diag", "Diagnostics");
  diag->require_subcommand(1);
  auto* variance =
      diag->add_subcommand("variance", "Score-function gradient norm versus dimension");
  variance->add_option("--dims", dims, "range a..b, doubling from a");
  variance->add_option("--sigma", sigma, "sampling standard deviation");
  variance->add_option("--samples", samples, "samples per dimension");
  variance->add_option("--seed", seed, "random seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*solve) return run_solve(instance_path);
    if (*identify) return run_identify(instance_path, episodes, excitation, seed, n_boot);
    if (*bench_cmd) return run_bench(spec_path, out_path, quiet);
    if (*plot) return run_plot(csv_path, metric, out_path);
    if (*variance) return run_diag_variance(dims, sigma, samples, seed);
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const ContractViolation& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const WriteError& e) {
    std::cerr << "write error: " << e.what() << "\n";
    return kExitWrite;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitFailure;
}
