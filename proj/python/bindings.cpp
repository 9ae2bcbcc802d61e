#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "lqrlab/bench.hpp"
#include "lqrlab/errors.hpp"
#include "lqrlab/io.hpp"
#include "lqrlab/policysearch.hpp"
#include "lqrlab/riccati.hpp"
#include "lqrlab/sysid.hpp"

namespace py = pybind11;
using namespace lqrlab;

namespace {

py::dict instance_dict(const LqrInstance& inst) {
  py::dict d;
  d["A"] = inst.system.A();
  d["B"] = inst.system.B();
  d["noise_cov"] = inst.system.noise_cov();
  d["Q"] = inst.cost.Q();
  d["R"] = inst.cost.R();
  d["S"] = inst.cost.S();
  d["x0"] = inst.x0;
  d["episode_len"] = inst.episode_len;
  return d;
}

LqrInstance parse_instance(const std::string& text) {
  return io::instance_from_json(nlohmann::json::parse(text));
}

}  // namespace

PYBIND11_MODULE(_lqrlab, m) {
  m.doc() = "lqrlab native core";

  auto& base = py::register_exception<LqrLabError>(m, "LqrLabError", PyExc_RuntimeError);
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const nlohmann::json::exception& e) {
      const auto config = py::module_::import("lqrlab._lqrlab").attr("ConfigError");
      py::set_error(config, e.what());
    }
  });

  m.def(
      "dare",
      [](const MatrixXd& A, const MatrixXd& B, const MatrixXd& Q, const MatrixXd& R) {
        const auto sol = dare_solve(LinearSystem(A, B), QuadraticCost(Q, R));
        py::dict d;
        d["M"] = sol.M;
        d["K"] = sol.K;
        d["residual"] = sol.residual;
        d["iterations"] = sol.iterations;
        return d;
      },
      py::arg("A"), py::arg("B"), py::arg("Q"), py::arg("R"),
      "Stabilizing DARE solution; the gain acts as u = -Kx.");

  m.def(
      "average_cost",
      [](const MatrixXd& A, const MatrixXd& B, const MatrixXd& noise_cov, const MatrixXd& Q,
         const MatrixXd& R, const MatrixXd& K) {
        return closed_loop_average_cost(LinearSystem(A, B, noise_cov), QuadraticCost(Q, R), K);
      },
      py::arg("A"), py::arg("B"), py::arg("noise_cov"), py::arg("Q"), py::arg("R"),
      py::arg("K"));

  m.def("spectral_radius", &spectral_radius, py::arg("M"));

  m.def(
      "instance_from_json", [](const std::string& text) { return instance_dict(parse_instance(text)); },
      py::arg("text"), "Validated instance fields as numpy arrays.");

  m.def(
      "identify",
      [](const std::string& instance_text, int episodes, double excitation,
         std::uint64_t seed) {
        const LqrInstance inst = parse_instance(instance_text);
        if (episodes < 1) throw ConfigError("episodes must be >= 1");
        Rng rng(seed);
        EpisodeBudget budget;
        const NominalResult res = nominal_pipeline(budget, inst, episodes, excitation, rng);
        py::dict d;
        d["A_hat"] = res.estimate.A_hat;
        d["B_hat"] = res.estimate.B_hat;
        d["samples"] = budget.samples_used();
        d["K"] = res.gain ? py::cast(*res.gain) : py::none();
        return d;
      },
      py::arg("instance"), py::arg("episodes"), py::arg("excitation") = 1.0,
      py::arg("seed") = 0);

  m.def(
      "run_bench",
      [](const std::string& spec_text) {
        const auto spec = bench::experiment_from_json(nlohmann::json::parse(spec_text));
        py::gil_scoped_release release;
        return bench::emit_csv(bench::run_experiment(spec));
      },
      py::arg("spec"), "Runs an experiment spec and returns the CSV text.");

  m.def(
      "plot_svg",
      [](const std::string& csv, const std::string& metric) {
        return bench::emit_plot(bench::parse_csv(csv), bench::parse_metric(metric));
      },
      py::arg("csv"), py::arg("metric") = "cost");

  m.def(
      "gradient_norm",
      [](int d, double sigma, int samples, std::uint64_t seed) {
        Rng rng(seed);
        const auto s = gradient_variance_diag(d, sigma, VectorXd::Zero(d), samples, rng);
        return py::make_tuple(s.mean, s.std_error);
      },
      py::arg("d"), py::arg("sigma") = 1.0, py::arg("samples") = 20000, py::arg("seed") = 0,
      "Mean and standard error of the score-function gradient norm for R(u) = |u|^2.");
}
