#include <doctest.h>

#include "radsym/harness.hpp"
#include "toy.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <sstream>

using namespace radsym;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("radsym-test-" + name);
  fs::remove_all(p);
  return p;
}

BenchmarkConfig toy_config() {
  BenchmarkConfig cfg;
  cfg.model = test::toy_preset();
  cfg.solvers = {"NR", "PCG", "CGSTP", "NIHT"};
  cfg.seeds = 2;
  return cfg;
}

}  // namespace

TEST_CASE("config parsing") {
  const BenchmarkConfig cfg = parse_config(json::parse(R"({
    "model": "s3-1", "solvers": ["cgstp", "NR"], "seeds": 3, "seed": 9,
    "K": [20, 30, 30, 90], "samples": [150, 150, 150, 350],
    "inner": {"max_iter": 100}, "outer": {"tol": 1e-5}
  })"));
  CHECK(cfg.model.name == "s3-1");
  CHECK(cfg.model.geometry.element_count() == 20736);
  CHECK(cfg.seeds == 3);
  CHECK(cfg.seed == 9);
  CHECK(cfg.model.K == RegionCounts{20, 30, 30, 90});
  CHECK(cfg.inner.max_iter == 100);
  CHECK(cfg.outer_tol == 1e-5);

  const BenchmarkConfig d = parse_config(json::object());
  CHECK(d.model.name == "s2-1");
  CHECK(d.solvers == std::vector<std::string>{"CGSTP"});

  // Serialized configs parse back to the same settings.
  const json j = to_json(cfg);
  CHECK(to_json(parse_config(j)) == j);
}

TEST_CASE("config errors") {
  const char* bad[] = {
      R"({"modle": "s2-1"})",
      R"({"model": "s9-9"})",
      R"({"geometry": {"radius": 3}})",
      R"({"inner": {"maxiter": 3}})",
      R"({"solvers": ["OMP"]})",
      R"({"K": [1, 2, 3]})",
      R"({"K": [500, 35, 35, 100]})",
      R"({"seeds": 0})",
      R"({"seeds": "two"})",
      R"({"geometry": {"resolution": {"n_z": 0}}})",
      R"({"source": {"profile": "square"}})",
  };
  for (const char* text : bad) {
    INFO(text);
    CHECK_THROWS_AS(parse_config(json::parse(text)), ConfigError);
  }
  CHECK_THROWS_AS(load_config("/nonexistent/radsym.json"), ConfigError);
}

TEST_CASE("region lists") {
  CHECK(parse_region_list("150,300,300,400") == RegionCounts{150, 300, 300, 400});
  CHECK_THROWS_AS(parse_region_list("1,2,3"), ConfigError);
  CHECK_THROWS_AS(parse_region_list("1,2,x,4"), ConfigError);
  CHECK_THROWS_AS(parse_region_list("1,2,3,4,5"), ConfigError);
}

TEST_CASE("geometry keys separate different setups") {
  const ModelPreset a = model_preset("s2-1");
  ModelPreset b = a;
  CHECK(geometry_key(a) == geometry_key(b));
  b.geometry.leh_radius = 200;
  CHECK(geometry_key(a) != geometry_key(b));
  CHECK(geometry_key(a).size() == 16);
}

TEST_CASE("pipeline reports are complete and deterministic") {
  const BenchmarkConfig cfg = toy_config();
  const PipelineResult a = run_pipeline(cfg);
  const PipelineResult b = run_pipeline(cfg);
  CHECK(a.failures.empty());
  REQUIRE(a.reports.size() == 2 + 2 * 2);
  for (const auto& r : a.reports) {
    INFO(r.algorithm);
    CHECK(r.model == "toy");
    CHECK(r.N == 200);
    CHECK(r.status == "ok");
    CHECK(r.rmse >= 0);
    CHECK(r.outer_iterations > 0);
    CHECK(r.time_total >= r.time_iteration);
    CHECK_FALSE(r.residual_history.empty());
  }
  std::ostringstream sa, sb;
  write_reports_csv(sa, a.reports, false);
  write_reports_csv(sb, b.reports, false);
  CHECK(sa.str() == sb.str());
  CHECK((a.reference - b.reference).norm() == 0.0);
}

TEST_CASE("pipeline writes its artifacts") {
  BenchmarkConfig cfg = toy_config();
  cfg.solvers = {"CGSTP"};
  cfg.seeds = 1;
  const fs::path dir = scratch_dir("artifacts");
  cfg.out_dir = dir.string();
  cfg.cache_dir = (dir / "cache").string();
  const PipelineResult r = run_pipeline(cfg);
  CHECK(r.failures.empty());
  CHECK(r.reports.size() == 1);
  for (const char* f : {"reports.csv", "history.csv", "config.json", "flux_CGSTP.csv",
                        "coefficients_CGSTP.csv", "plan_CGSTP.csv"}) {
    INFO(f);
    CHECK(fs::exists(dir / f));
  }
  CHECK(fs::exists(dir / "cache" / ("vf_" + geometry_key(cfg.model) + ".bin")));
  // Second run reads the cached matrix.
  const ModelContext ctx = prepare_model(cfg.model);
  const FullCoupling V = full_coupling(ctx, cfg.cache_dir);
  CHECK(V.from_cache);
  CHECK(V.dense);
  CHECK(load_config((dir / "config.json").string()).model.K == cfg.model.K);
  fs::remove_all(dir);
}

TEST_CASE("failed runs are recorded and the rest continue") {
  BenchmarkConfig cfg = toy_config();
  cfg.solvers = {"IHT", "CGSTP"};
  cfg.seeds = 1;
  cfg.inner.step = 50;  // forces the IHT divergence guard
  const PipelineResult r = run_pipeline(cfg);
  REQUIRE(r.reports.size() == 2);
  CHECK(r.reports[0].algorithm == "IHT");
  CHECK(r.reports[0].status != "ok");
  CHECK(r.failures.size() == 1);
  CHECK(r.reports[1].status == "ok");
}

TEST_CASE("streaming coupling is used past the memory budget") {
  const ModelContext ctx = prepare_model(test::toy_preset());
  const FullCoupling V = full_coupling(ctx, {}, 1024);
  CHECK_FALSE(V.dense);
  const BaselineRun nr = run_baseline(ctx, V, "NR");
  const FullCoupling D = full_coupling(ctx);
  const BaselineRun nd = run_baseline(ctx, D, "NR");
  CHECK(nr.result.converged);
  CHECK((nr.result.B - nd.result.B).norm() < 1e-8 * nd.result.B.norm());
  CHECK(nr.result.linear_solver != nd.result.linear_solver);
}

TEST_CASE("asymmetry metrics") {
  Vector c = Vector::Zero(9);
  c[0] = 1;
  c[6] = 0.02;  // (m, k) = (2, 0)
  const AsymmetryMetrics m = asymmetry_metrics(c);
  CHECK(m.amplitude[0] == 1.0);
  CHECK(m.amplitude[6] == doctest::Approx(0.02));
  CHECK(m.max_asymmetry == doctest::Approx(0.02));
  CHECK(m.cumulative_energy.back() == doctest::Approx(1.0));
  CHECK(m.cumulative_energy[0] == doctest::Approx(1 / (1 + 0.0004)));
  CHECK_THROWS(asymmetry_metrics(Vector::Zero(4)));

  // Projection of Y00 + 0.02 Y20 sampled on the capsule mesh.
  const CavityModel model = assemble_cavity(model_preset("s2-1").geometry, {});
  Vector flux = Vector::Zero(model.size());
  const IndexRange cap = model.range(Region::Capsule);
  for (Index i = cap.begin; i < cap.begin + cap.size(); ++i) {
    const Vec3& x = model.elements[static_cast<std::size_t>(i)].centroid;
    const double theta = std::acos(x.z() / x.norm());
    flux[i] = spherical_harmonic(0, 0, theta, 0) + 0.02 * spherical_harmonic(2, 0, theta, 0);
  }
  const AsymmetryMetrics p = asymmetry_metrics(capsule_coefficients(model, flux, 36));
  CHECK(p.amplitude[6] == doctest::Approx(0.02).epsilon(1e-3));
  CHECK(p.max_asymmetry == doctest::Approx(0.02).epsilon(1e-3));
}

TEST_CASE("sparsity sweep on the toy reference") {
  const ModelContext ctx = prepare_model(test::toy_preset());
  const FullCoupling V = full_coupling(ctx);
  const Vector ref = run_baseline(ctx, V, "NR").result.B;
  const auto sweep = sparsity_sweep(ctx, ref, {1, 4, 16});
  REQUIRE(sweep.size() == kRegionCount);
  for (const auto& s : sweep) {
    INFO(s.family);
    CHECK(s.significant >= 1);
    CHECK(std::is_sorted(s.ranked.rbegin(), s.ranked.rend()));
    REQUIRE(s.by_level.size() == 3);
    CHECK(s.by_level[2].error <= s.by_level[0].error);
  }
}

TEST_CASE("speedup table") {
  SolverReport base, cs, iht, cg;
  base.model = cs.model = iht.model = cg.model = "s2-1";
  base.N = cs.N = 9776;
  base.algorithm = "NR";
  cs.algorithm = "CGSTP";
  iht.algorithm = "IHT";
  cg.algorithm = "CGIHT";
  base.time_total = cs.time_total = 12.0;
  cs.time_iteration = 1;
  iht.time_iteration = 4;
  cg.time_iteration = 3;
  const auto rows = speedup_table({base, cs, iht, cg});
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].ratio == 1.0);
  CHECK(rows[0].dt_iht == 3.0);
  CHECK(rows[0].dt_cgiht == 2.0);
  CHECK_THROWS_AS(speedup_table({cs}), ConfigError);
  CHECK(median({3, 1, 2}) == 2.0);
  CHECK(median({4, 1, 2, 3}) == 2.5);
}

TEST_CASE("flux and coefficient csv layouts") {
  const ModelContext ctx = prepare_model(test::toy_preset());
  std::ostringstream f, c;
  write_flux_csv(f, *ctx.model, Vector::Ones(200));
  CHECK(f.str().rfind("index,region", 0) == 0);
  write_coefficients_csv(c, *ctx.basis, Vector::Zero(ctx.basis->cols()));
  const std::string text = c.str();
  CHECK(std::count(text.begin(), text.end(), '\n') == ctx.basis->cols() + 1);
}
