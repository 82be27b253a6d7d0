#include "radsym/harness.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>

using namespace radsym;
namespace fs = std::filesystem;

namespace {

struct Common {
  std::string config;
  std::string model;
  std::vector<std::string> solvers;
  int seeds = 0;
  std::string out;
  std::string cache;
  std::string k;
  std::string samples;
};

void add_common(CLI::App* cmd, Common& c, bool solver_flags) {
  cmd->add_option("--config", c.config, "JSON config file");
  cmd->add_option("--model", c.model, "preset: s2-1, s2-2, s3-1, s3-2");
  cmd->add_option("--out", c.out, "output directory");
  cmd->add_option("--cache-vf", c.cache, "view-factor cache directory");
  cmd->add_option("--k", c.k, "sparsity per region: s,u,u,w");
  cmd->add_option("--samples", c.samples, "sample counts per region: s,u,u,w");
  if (solver_flags) {
    cmd->add_option("--solver", c.solvers, "solvers, comma separated")->delimiter(',');
    cmd->add_option("--seeds", c.seeds, "number of seeded runs");
  }
}

BenchmarkConfig resolve(const Common& c) {
  BenchmarkConfig cfg = c.config.empty() ? parse_config(nlohmann::json::object()) : load_config(c.config);
  if (!c.model.empty()) {
    const ModelPreset p = model_preset(c.model);
    cfg.model = p;
  }
  if (!c.solvers.empty()) cfg.solvers = c.solvers;
  if (c.seeds != 0) cfg.seeds = c.seeds;
  if (!c.out.empty()) cfg.out_dir = c.out;
  if (!c.cache.empty()) cfg.cache_dir = c.cache;
  if (!c.k.empty()) cfg.model.K = parse_region_list(c.k);
  if (!c.samples.empty()) cfg.model.sample_overrides = parse_region_list(c.samples);
  cfg.validate();
  return cfg;
}

std::ofstream open_out(const std::string& dir, const std::string& name) {
  if (dir.empty()) throw ConfigError("--out is required for this command");
  fs::create_directories(dir);
  std::ofstream os(fs::path(dir) / name);
  if (!os) throw Error("cannot write " + (fs::path(dir) / name).string());
  return os;
}

void print_reports(const std::vector<SolverReport>& reports) {
  std::cout << std::left << std::setw(8) << "solver" << std::setw(6) << "seed" << std::setw(8)
            << "outer" << std::setw(9) << "inner" << std::setw(12) << "rmse" << std::setw(10)
            << "time" << "status\n";
  for (const auto& r : reports) {
    std::cout << std::left << std::setw(8) << r.algorithm << std::setw(6) << r.seed << std::setw(8)
              << r.outer_iterations << std::setw(9) << r.inner_iterations << std::setw(12)
              << std::setprecision(3) << r.rmse << std::setw(10) << std::setprecision(4)
              << r.time_total << r.status << '\n';
  }
}

int cmd_mesh(const Common& c) {
  const BenchmarkConfig cfg = resolve(c);
  const CavityModel m = assemble_cavity(cfg.model.geometry, cfg.model.source);
  std::cout << cfg.model.name << ": N = " << m.size() << '\n';
  for (int r = 0; r < kRegionCount; ++r) {
    std::cout << "  " << region_name(static_cast<Region>(r)) << ' ' << m.region_ranges[r].size()
              << '\n';
  }
  if (!cfg.out_dir.empty()) {
    auto os = open_out(cfg.out_dir, "mesh.csv");
    write_mesh_csv(os, m);
  }
  return 0;
}

int cmd_viewfactor(const Common& c) {
  const BenchmarkConfig cfg = resolve(c);
  const ModelContext ctx = prepare_model(cfg.model);
  const FullCoupling V = full_coupling(ctx, cfg.cache_dir);
  std::cout << cfg.model.name << ": N = " << ctx.model->size()
            << (V.dense ? (V.from_cache ? ", dense (cached)" : ", dense") : ", streaming")
            << ", " << V.time_viewfactor + ctx.time_mesh << " s\n";
  if (V.dense) {
    const Matrix& M = static_cast<const DenseCoupling&>(*V.op).matrix();
    const Vector s = M.rowwise().sum();
    std::cout << "row sums: min " << s.minCoeff() << ", max " << s.maxCoeff() << '\n';
  }
  return 0;
}

int cmd_solve(const Common& c, bool bench) {
  BenchmarkConfig cfg = resolve(c);
  if (bench && c.solvers.empty() && c.config.empty()) cfg.solvers = {"NR", "CGSTP", "CGIHT", "IHT"};
  const PipelineResult res = run_pipeline(cfg);
  print_reports(res.reports);
  if (bench) {
    try {
      const auto rows = speedup_table(res.reports);
      for (const auto& r : rows) {
        std::cout << r.model << ": CGSTP/NR time ratio " << r.ratio << '\n';
      }
      if (!cfg.out_dir.empty()) {
        auto os = open_out(cfg.out_dir, "speedup.csv");
        write_speedup_csv(os, rows);
      }
    } catch (const ConfigError& e) {
      std::cout << "no speedup table: " << e.what() << '\n';
    }
  }
  for (const auto& f : res.failures) std::cerr << "failed: " << f << '\n';
  return res.failures.empty() ? 0 : 1;
}

int cmd_sweep(const Common& c) {
  const BenchmarkConfig cfg = resolve(c);
  const ModelContext ctx = prepare_model(cfg.model);
  const FullCoupling V = full_coupling(ctx, cfg.cache_dir);
  const BaselineRun ref = run_baseline(ctx, V, "NR", cfg.newton);
  if (!ref.result.converged) throw Error("reference solve did not converge");
  const auto sweep = sparsity_sweep(ctx, ref.result.B, {1, 5, 10, 20, 35, 50, 100, 200, 400});
  for (const auto& s : sweep) {
    std::cout << region_name(s.region) << " (" << s.family << "): " << s.significant
              << " significant coefficients\n";
  }
  if (!cfg.out_dir.empty()) {
    auto os = open_out(cfg.out_dir, "sweep.csv");
    os << "region,family,kind,terms,error\n";
    for (const auto& s : sweep) {
      for (const auto& p : s.by_terms) {
        os << region_name(s.region) << ',' << s.family << ",leading," << p.terms << ',' << p.error << '\n';
      }
      for (const auto& p : s.by_level) {
        os << region_name(s.region) << ',' << s.family << ",largest," << p.terms << ',' << p.error << '\n';
      }
    }
  }
  return 0;
}

int cmd_asymmetry(const Common& c) {
  const BenchmarkConfig cfg = resolve(c);
  const ModelContext ctx = prepare_model(cfg.model);
  Vector B;
  const std::string solver = c.solvers.empty() ? "NR" : c.solvers.front();
  if (is_greedy_name(solver)) {
    B = run_cs(ctx, parse_algorithm(solver), cfg.seed, nullptr, cfg.inner, cfg.outer_tol,
               cfg.outer_max)
            .result.B;
  } else {
    const FullCoupling V = full_coupling(ctx, cfg.cache_dir);
    B = run_baseline(ctx, V, solver, cfg.newton, cfg.pcg).result.B;
  }
  const AsymmetryMetrics m = asymmetry_metrics(capsule_coefficients(*ctx.model, B, 36));
  std::cout << "max drive asymmetry " << m.max_asymmetry << " (" << solver << ")\n";
  if (!cfg.out_dir.empty()) {
    auto os = open_out(cfg.out_dir, "asymmetry.csv");
    os << "mode,amplitude,cumulative_energy\n";
    for (std::size_t n = 0; n < m.amplitude.size(); ++n) {
      os << n << ',' << m.amplitude[n] << ',' << m.cumulative_energy[n] << '\n';
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Radiation flux in a cylinder-to-sphere cavity"};
  app.require_subcommand(1);
  Common c;
  auto* mesh = app.add_subcommand("mesh", "build the surface mesh");
  auto* vf = app.add_subcommand("viewfactor", "compute the view-factor matrix");
  auto* solve = app.add_subcommand("solve", "run solvers on a model");
  auto* bench = app.add_subcommand("bench", "run solvers and report speedups");
  auto* sweep = app.add_subcommand("sweep", "coefficient sparsity of the reference flux");
  auto* asym = app.add_subcommand("asymmetry", "capsule drive asymmetry");
  add_common(mesh, c, false);
  add_common(vf, c, false);
  add_common(solve, c, true);
  add_common(bench, c, true);
  add_common(sweep, c, false);
  add_common(asym, c, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }
  try {
    if (mesh->parsed()) return cmd_mesh(c);
    if (vf->parsed()) return cmd_viewfactor(c);
    if (solve->parsed()) return cmd_solve(c, false);
    if (bench->parsed()) return cmd_solve(c, true);
    if (sweep->parsed()) return cmd_sweep(c);
    if (asym->parsed()) return cmd_asymmetry(c);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
