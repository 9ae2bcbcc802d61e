// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any FAIL.
// Usage: acceptance [config-dir]

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "lqrlab/adp.hpp"
#include "lqrlab/bench.hpp"
#include "lqrlab/io.hpp"
#include "lqrlab/policysearch.hpp"
#include "lqrlab/riccati.hpp"
#include "lqrlab/sysid.hpp"

#include "oracles.hpp"

namespace lqrlab {
namespace {

using Clock = std::chrono::steady_clock;
namespace fs = std::filesystem;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

class Report {
 public:
  void add(int id, const std::string& name, double budget_s,
           const std::function<Outcome()>& body) {
    const auto t0 = Clock::now();
    Outcome out;
    try {
      out = body();
    } catch (const std::exception& e) {
      out = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
    if (secs > budget_s) {
      out.pass = false;
      out.detail += fmt(" [over time budget %.0fs]", budget_s);
    }
    std::printf("%s %2d %-28s %7.2fs  %s\n", out.pass ? "PASS" : "FAIL", id, name.c_str(),
                secs, out.detail.c_str());
    std::fflush(stdout);
    failures_ += !out.pass;
  }
  int failures() const { return failures_; }

 private:
  int failures_ = 0;
};

// Criterion tolerances.
constexpr double kGoldenTol = 1e-9;
constexpr double kDareResidualTol = 1e-10;
constexpr double kTraceIdentityTol = 1e-8;
constexpr double kMonteCarloTol = 0.02;
constexpr int kMonteCarloSteps = 1'000'000;
constexpr double kModelErrorTol = 1e-2;
constexpr double kSuboptTol = 1e-2;
constexpr double kPolicyGradientFactor = 100.0;
constexpr double kRateSlope = -0.5, kRateSlopeTol = 0.2;
constexpr double kSpectralTol = 1e-12;
constexpr double kSigmaBound = 3.0;
constexpr int kUnbiasedDraws = 100'000;
constexpr double kVarianceSlope = 1.5, kVarianceSlopeTol = 0.2;
constexpr int kVarianceDraws = 20'000;
constexpr double kRhcTol = 1e-10;
constexpr double kLstdqTol = 1e-6;

double residual_of(const LinearSystem& sys, const QuadraticCost& cost, const MatrixXd& M) {
  return (M - riccati_map(sys, cost, M)).norm();
}

Outcome dare_check() {
  std::ostringstream msg;
  bool ok = true;
  const MatrixXd one = MatrixXd::Ones(1, 1);
  const auto s = dare_solve(LinearSystem(one, one), QuadraticCost(one, one));
  const double phi = test::golden_ratio();
  const double eM = std::abs(s.M(0, 0) - phi), eK = std::abs(s.K(0, 0) - (phi - 1.0));
  ok = ok && eM <= kGoldenTol && eK <= kGoldenTol;
  msg << "scalar |dM|=" << eM << " |dK|=" << eK;
  for (const auto& [name, inst] : {std::pair{"double-integrator", bench::instance_double_integrator()},
                                   std::pair{"laplacian", bench::instance_laplacian()}}) {
    const auto sol = dare_solve(inst.system, inst.cost);
    const double res = residual_of(inst.system, inst.cost, sol.M);
    const MatrixXd K_vi = test::gain_of(inst.system.A(), inst.system.B(), inst.cost.R(),
                                        test::riccati_value_iteration(
                                            inst.system.A(), inst.system.B(), inst.cost.Q(),
                                            inst.cost.R(), 100'000));
    const double rho = spectral_radius(inst.system.A() - inst.system.B() * sol.K);
    const double gain_gap = (sol.K - K_vi).cwiseAbs().maxCoeff();
    ok = ok && res <= kDareResidualTol && rho < 1.0 && gain_gap <= 1e-8;
    msg << "; " << name << " residual=" << res << " rho=" << rho
        << " |K-K_vi|=" << gain_gap;
  }
  return {ok, msg.str()};
}

// Time-average of ½ stage cost along one long closed-loop trajectory.
double simulated_average_cost(const LinearSystem& sys, const QuadraticCost& cost,
                              const MatrixXd& K, std::uint64_t seed) {
  Rng rng(seed);
  VectorXd x = VectorXd::Zero(sys.state_dim());
  for (int t = 0; t < 1000; ++t) x = step(sys, x, -K * x, rng);
  double total = 0.0;
  for (int t = 0; t < kMonteCarloSteps; ++t) {
    const VectorXd u = -K * x;
    total += 0.5 * cost.stage(x, u);
    x = step(sys, x, u, rng);
  }
  return total / kMonteCarloSteps;
}

Outcome cost_identity() {
  std::ostringstream msg;
  bool ok = true;
  const MatrixXd one = MatrixXd::Ones(1, 1);
  const LqrInstance di = bench::instance_double_integrator();
  const std::vector<std::pair<std::string, std::pair<LinearSystem, QuadraticCost>>> cases = {
      {"scalar", {LinearSystem(one, one, one), QuadraticCost(one, one)}},
      {"double-integrator", {di.system, di.cost}}};
  for (const auto& [name, sc] : cases) {
    const auto& [sys, cost] = sc;
    const auto sol = dare_solve(sys, cost);
    const double J = closed_loop_average_cost(sys, cost, sol.K);
    const double trace = 0.5 * (sol.M * sys.noise_cov()).trace();
    const double id_err = std::abs(J - trace) / trace;
    const double mc = simulated_average_cost(sys, cost, sol.K, 2024);
    const double mc_err = std::abs(mc - J) / J;
    ok = ok && id_err <= kTraceIdentityTol && mc_err <= kMonteCarloTol;
    msg << name << " trace-rel=" << id_err << " mc-rel=" << mc_err << "; ";
  }
  return {ok, msg.str()};
}

double model_error(const ModelEstimate& est, const LinearSystem& truth) {
  return std::max((est.A_hat - truth.A()).cwiseAbs().maxCoeff(),
                  (est.B_hat - truth.B()).cwiseAbs().maxCoeff());
}

Outcome nominal_reproduction() {
  const LqrInstance inst = bench::instance_double_integrator();
  const double J_star =
      closed_loop_average_cost(inst.system, inst.cost, dare_solve(inst.system, inst.cost).K);
  std::vector<double> errors, subopt;
  for (int seed = 0; seed < 10; ++seed) {
    Rng rng(derive_seed({3, static_cast<std::uint64_t>(seed)}));
    EpisodeBudget budget;
    const NominalResult res = nominal_pipeline(budget, inst, 1, 1.0, rng);
    errors.push_back(model_error(res.estimate, inst.system));
    subopt.push_back(res.gain ? relative_suboptimality(
                                    evaluate_gain(inst, *res.gain), J_star)
                              : std::numeric_limits<double>::infinity());
  }
  const double me = bench::extended_median(errors);
  const double ms = bench::extended_median(subopt);
  return {me <= kModelErrorTol && ms <= kSuboptTol,
          "median model error=" + fmt("%.3g", me) + " median rel-subopt=" + fmt("%.3g", ms)};
}

bench::ResultTable run_spec(const fs::path& path) {
  return bench::run_experiment(bench::experiment_from_json(io::read_json_file(path)));
}

std::string reach_text(const std::optional<std::int64_t>& v) {
  return v ? std::to_string(*v) : "never";
}

Outcome sample_efficiency_ordering(const fs::path& config_dir) {
  const bench::ResultTable table = run_spec(config_dir / "double_integrator_bench.json");
  const LqrInstance inst = bench::instance_double_integrator();
  const double J_star =
      closed_loop_average_cost(inst.system, inst.cost, dare_solve(inst.system, inst.cost).K);
  const auto nom = bench::samples_to_reach(table, "nominal", 2 * J_star);
  const auto lspi = bench::samples_to_reach(table, "lspi", 2 * J_star);
  const auto rs = bench::samples_to_reach(table, "random-search", 2 * J_star);
  const auto pg = bench::samples_to_reach(table, "reinforce", 2 * J_star);
  std::ostringstream msg;
  msg << "samples to 2x: nominal=" << reach_text(nom) << " lspi=" << reach_text(lspi)
      << " random-search=" << reach_text(rs) << " reinforce=" << reach_text(pg);
  // A method that never reaches the threshold ranks above every finite count.
  const auto rank = [](const std::optional<std::int64_t>& v) {
    return v ? static_cast<double>(*v) : std::numeric_limits<double>::infinity();
  };
  const bool ok = nom && lspi && rank(nom) <= rank(lspi) && rank(lspi) < rank(rs) &&
                  rank(rs) < rank(pg) &&
                  rank(pg) >= kPolicyGradientFactor * rank(nom);
  return {ok, msg.str()};
}

Outcome identification_rate() {
  const LqrInstance inst = bench::instance_double_integrator();
  std::vector<double> log_t, log_err;
  std::ostringstream msg;
  for (int episodes = 2; episodes <= 128; episodes *= 2) {
    std::vector<double> errors;
    for (int seed = 0; seed < 20; ++seed) {
      Rng rng(derive_seed({5, static_cast<std::uint64_t>(episodes),
                           static_cast<std::uint64_t>(seed)}));
      EpisodeBudget budget;
      errors.push_back(
          model_error(nominal_pipeline(budget, inst, episodes, 1.0, rng).estimate, inst.system));
    }
    log_t.push_back(episodes * inst.episode_len);
    log_err.push_back(bench::extended_median(errors));
  }
  const double slope = test::loglog_slope(log_t, log_err);
  return {std::abs(slope - kRateSlope) <= kRateSlopeTol, "slope=" + fmt("%.3f", slope)};
}

// Summary with the largest sample count not above `budget`.
const bench::Summary* at_budget(const bench::ResultTable& t, const std::string& method,
                                std::int64_t budget) {
  std::optional<std::int64_t> best;
  for (const auto& s : t.summaries_for(method))
    if (s.samples <= budget) best = s.samples;
  return best ? t.find(method, *best) : nullptr;
}

Outcome laplacian_safety(const bench::ResultTable& table) {
  std::ostringstream msg;
  const LqrInstance inst = bench::instance_laplacian();
  const double rho = spectral_radius(inst.system.A());
  bool ok = std::abs(rho - (1.01 + 0.01 * std::sqrt(2.0))) <= kSpectralTol;
  msg << "rho(A)-1.01-0.01*sqrt2=" << rho - (1.01 + 0.01 * std::sqrt(2.0));

  const auto nominal = table.summaries_for("nominal");
  int inversions = 0;
  for (std::size_t i = 1; i < nominal.size(); ++i)
    inversions += nominal[i].stabilized_fraction < nominal[i - 1].stabilized_fraction;
  ok = ok && !nominal.empty() && nominal.front().stabilized_fraction < 1.0 && inversions <= 1;
  msg << "; nominal stab@" << nominal.front().samples << "=" << nominal.front().stabilized_fraction
      << " inversions=" << inversions;

  const auto* nom500 = at_budget(table, "nominal", 500);
  const auto* lspi = at_budget(table, "lspi", 5000);
  const auto* rs = at_budget(table, "random-search", 5000);
  const auto* pg = at_budget(table, "reinforce", 5000);
  if (!nom500 || !lspi || !rs || !pg) return {false, msg.str() + "; missing budget rows"};
  ok = ok && pg->median > nom500->median && rs->median > nom500->median &&
       lspi->median > nom500->median && lspi->median > rs->median;
  msg << "; medians: nominal@" << nom500->samples << "=" << nom500->median << " reinforce@"
      << pg->samples << "=" << pg->median << " random-search@" << rs->samples << "="
      << rs->median << " lspi@" << lspi->samples << "=" << lspi->median;
  return {ok, msg.str()};
}

Outcome reinforce_unbiased() {
  Rng rng(7);
  const VectorXd theta = (VectorXd(2) << 1.0, 0.0).finished();
  const auto est = score_function_estimate(
      [](const VectorXd& u) { return u.squaredNorm(); }, theta, 1.0, kUnbiasedDraws, rng);
  const VectorXd z = (est.gradient.mean - 2.0 * theta).cwiseQuotient(est.gradient.std_error);
  const double zr = (est.mean_reward - (theta.squaredNorm() + 2.0)) / est.reward_std_error;
  const bool ok = z.cwiseAbs().maxCoeff() <= kSigmaBound && std::abs(zr) <= kSigmaBound;
  return {ok, "gradient z=(" + fmt("%.2f", z(0)) + "," + fmt("%.2f", z(1)) +
                  ") reward z=" + fmt("%.2f", zr)};
}

Outcome variance_scaling() {
  std::vector<double> lx, ly;
  for (int d = 2; d <= 64; d *= 2) {
    Rng rng(derive_seed({8, static_cast<std::uint64_t>(d)}));
    const auto s = gradient_variance_diag(d, 1.0, VectorXd::Zero(d), kVarianceDraws, rng);
    lx.push_back(d);
    ly.push_back(s.mean);
  }
  const double slope = test::loglog_slope(lx, ly);
  Rng rng(derive_seed({8, 1}));
  const auto s1 = gradient_variance_diag(1, 1.0, VectorXd::Zero(1), kVarianceDraws, rng);
  const double expected = std::sqrt(2.0 / M_PI) * 2.0;
  const double z = (s1.mean - expected) / s1.std_error;
  const bool ok = std::abs(slope - kVarianceSlope) <= kVarianceSlopeTol &&
                  std::abs(z) <= kSigmaBound &&
                  std::abs(test::chi_third_moment(1) - expected) <= 1e-12;
  return {ok, "slope=" + fmt("%.3f", slope) + " d=1 z=" + fmt("%.2f", z)};
}

Outcome rhc_fixed_point() {
  double worst = 0.0;
  Rng rng(9);
  for (const LqrInstance& inst :
       {bench::instance_double_integrator(), bench::instance_laplacian()}) {
    const auto sol = dare_solve(inst.system, inst.cost);
    for (int i = 0; i < 100; ++i) {
      const VectorXd x = rng.normal_vector(inst.system.state_dim());
      const VectorXd u_star = -sol.K * x;
      for (int H : {1, 2, 5, 20}) {
        const VectorXd u = rhc_action(inst.system, inst.cost, sol.M, H, x);
        worst = std::max(worst, (u - u_star).cwiseAbs().maxCoeff() / (1.0 + u_star.norm()));
      }
    }
  }
  return {worst <= kRhcTol, "max deviation=" + fmt("%.3g", worst)};
}

Outcome lstdq_exact() {
  const double a = 1.2, b = 1.0, q = 1.0, r = 1.0, K = 0.8, gamma = 0.9;
  const double P = (q + r * K * K) / (1.0 - gamma * (a - b * K) * (a - b * K));
  // Q(x,u) = q x² + r u² + γ P (a x + b u)².
  MatrixXd W(2, 2);
  W << q + gamma * P * a * a, gamma * P * a * b, gamma * P * a * b, r + gamma * P * b * b;

  Rng rng(10);
  std::vector<Transition> data;
  for (int i = 0; i < 50; ++i) {
    const VectorXd x = rng.normal_vector(1), u = rng.normal_vector(1);
    data.push_back({x, u, q * x(0) * x(0) + r * u(0) * u(0), a * x + b * u});
  }
  const QuadraticQ est = lstdq(data, MatrixXd::Constant(1, 1, K), gamma);
  const double err = std::max((est.W - W).cwiseAbs().maxCoeff(), std::abs(est.offset));
  return {err <= kLstdqTol, "max |W - W_closed|=" + fmt("%.3g", err)};
}

}  // namespace
}  // namespace lqrlab

int main(int argc, char** argv) {
  using namespace lqrlab;
  const fs::path config_dir = argc > 1 ? fs::path(argv[1]) : fs::path(LQRLAB_CONFIG_DIR);
  Report report;
  report.add(1, "dare-analytic", 1, dare_check);
  report.add(2, "cost-identity", 30, cost_identity);
  report.add(3, "nominal-reproduction", 5, nominal_reproduction);
  report.add(4, "sample-efficiency-ordering", 300, [&] { return sample_efficiency_ordering(config_dir); });
  report.add(5, "identification-rate", 60, identification_rate);
  bench::ResultTable laplacian;
  report.add(6, "laplacian-safety", 180, [&] {
    laplacian = run_spec(config_dir / "laplacian_bench.json");
    return laplacian_safety(laplacian);
  });
  report.add(7, "reinforce-unbiased", 10, reinforce_unbiased);
  report.add(8, "variance-scaling", 30, variance_scaling);
  report.add(9, "rhc-fixed-point", 1, rhc_fixed_point);
  report.add(10, "lstdq-exact", 5, lstdq_exact);
  report.add(11, "determinism", 60, [&] {
    const auto spec = bench::experiment_from_json(
        io::read_json_file(config_dir / "laplacian_bench.json"));
    const std::string a = bench::emit_csv(laplacian);
    const std::string b = bench::emit_csv(bench::run_experiment(spec));
    const bool ok = a == b;
    return Outcome{ok, std::to_string(a.size()) + " bytes, identical=" + (ok ? "yes" : "no")};
  });
  return report.failures() == 0 ? 0 : 1;
}
