#include "radsym/harness.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

namespace py = pybind11;
using namespace radsym;

namespace {

py::dict report_dict(const SolverReport& r) {
  py::dict d;
  d["algorithm"] = r.algorithm;
  d["model"] = r.model;
  d["seed"] = r.seed;
  d["N"] = r.N;
  d["M"] = r.M;
  d["inner_iterations"] = r.inner_iterations;
  d["outer_iterations"] = r.outer_iterations;
  d["inner_per_outer"] = r.inner_per_outer;
  d["residual_history"] = r.residual_history;
  d["error_history"] = r.error_history;
  d["rmse"] = r.rmse;
  d["rmse_capsule"] = r.rmse_capsule;
  d["time_viewfactor"] = r.time_viewfactor;
  d["time_basis"] = r.time_basis;
  d["time_iteration"] = r.time_iteration;
  d["time_total"] = r.time_total;
  d["converged"] = r.converged;
  d["status"] = r.status;
  return d;
}

BenchmarkConfig config_from(const std::string& text) {
  return parse_config(nlohmann::json::parse(text));
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Radiation flux in a cylinder-to-sphere cavity";

  py::register_exception<Error>(m, "RadsymError", PyExc_RuntimeError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);

  m.def("preset_names", &preset_names);
  m.def(
      "preset_config",
      [](const std::string& name) {
        BenchmarkConfig cfg;
        cfg.model = model_preset(name);
        return to_json(cfg).dump();
      },
      py::arg("name"), "Full JSON config for a preset.");
  m.def("validate_config", [](const std::string& text) { return to_json(config_from(text)).dump(); },
        py::arg("config_json"), "Parses a JSON config and returns its canonical form.");

  m.def(
      "region_sizes",
      [](const std::string& config_json) {
        const BenchmarkConfig cfg = config_from(config_json);
        const CavityModel model = assemble_cavity(cfg.model.geometry, cfg.model.source);
        py::dict d;
        for (int r = 0; r < kRegionCount; ++r) {
          d[region_name(static_cast<Region>(r))] = model.region_ranges[r].size();
        }
        return d;
      },
      py::arg("config_json"));

  m.def(
      "run_pipeline",
      [](const std::string& config_json) {
        const BenchmarkConfig cfg = config_from(config_json);
        PipelineResult res;
        {
          py::gil_scoped_release release;
          res = run_pipeline(cfg);
        }
        py::list reports;
        for (const auto& r : res.reports) reports.append(report_dict(r));
        py::dict out;
        out["reports"] = reports;
        out["reference"] = res.reference;
        out["failures"] = res.failures;
        return out;
      },
      py::arg("config_json"), "Runs every configured solver and seed.");

  m.def("spherical_harmonic", &spherical_harmonic, py::arg("m"), py::arg("k"), py::arg("theta"),
        py::arg("phi"));
  m.def("zernike_annular", &zernike_annular, py::arg("l"), py::arg("k"), py::arg("r"),
        py::arg("inner_ratio"), py::arg("phi"));
  m.def("legendre_fourier", &legendre_fourier, py::arg("l"), py::arg("k"), py::arg("z"),
        py::arg("phi"));
  m.def("sample_count", &sample_count, py::arg("s"), py::arg("N"), py::arg("floor_override") = 0);
  m.def("lhs_indices", &lhs_indices, py::arg("n"), py::arg("m"), py::arg("seed"));

  m.def(
      "greedy_solve",
      [](const std::string& algorithm, const Matrix& A, const Vector& y, Index K, int max_iter,
         double tol) {
        GreedyOptions opt;
        opt.max_iter = max_iter;
        opt.tol = tol;
        const GreedyResult r =
            run_greedy(parse_algorithm(algorithm), A, y, SparsityPattern::global(A.cols(), K), opt);
        py::dict d;
        d["c"] = r.c;
        d["iterations"] = r.iterations;
        d["residual_history"] = r.residual_history;
        d["converged"] = r.converged;
        d["stop_reason"] = r.stop_reason;
        return d;
      },
      py::arg("algorithm"), py::arg("A"), py::arg("y"), py::arg("K"), py::arg("max_iter") = 0,
      py::arg("tol") = 1e-8, "Sparse solve of A c = y with at most K nonzeros.");

  m.def(
      "asymmetry",
      [](const Vector& c) {
        const AsymmetryMetrics a = asymmetry_metrics(c);
        py::dict d;
        d["amplitude"] = a.amplitude;
        d["cumulative_energy"] = a.cumulative_energy;
        d["max_asymmetry"] = a.max_asymmetry;
        return d;
      },
      py::arg("c"), "Mode amplitudes relative to the mean mode.");
}
