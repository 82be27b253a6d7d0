#pragma once

#include "radsym/solvers.hpp"

#include <json.hpp>

#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

namespace radsym {

struct ModelPreset {
  std::string name = "custom";
  CavityGeometry geometry;
  SourceSpec source;
  MaterialParams material;
  TermCounts terms{400, 325, 325, 1225};
  RegionCounts K{30, 35, 35, 100};
  RegionSparsity sparsity{30, 35, 35, 100};  // s in s·log10(N)
  RegionCounts sample_overrides{150, 150, 150, 400};
};

std::vector<std::string> preset_names();
/// Names are case-insensitive: s2-1, s2-2, s3-1, s3-2.
ModelPreset model_preset(const std::string& name);

struct BenchmarkConfig {
  ModelPreset model = model_preset("s2-1");
  std::vector<std::string> solvers{"CGSTP"};
  int seeds = 1;
  std::uint64_t seed = 1;  // run i uses seed + i
  std::string out_dir;
  std::string cache_dir;
  GreedyOptions inner;
  double outer_tol = 1e-6;
  int outer_max = 50;
  NewtonOptions newton;
  InexactNewtonOptions pcg;

  void validate() const;
};

/// Reads a config document; unknown keys are configuration errors.
BenchmarkConfig parse_config(const nlohmann::json& doc);
BenchmarkConfig load_config(const std::string& path);
nlohmann::json to_json(const BenchmarkConfig& cfg);
nlohmann::json geometry_json(const ModelPreset& preset);
/// Hex FNV-1a of the canonical geometry and source JSON.
std::string geometry_key(const ModelPreset& preset);

RegionCounts parse_region_list(const std::string& text);

/// Mesh, view kernel and normalized block basis for one model.
struct ModelContext {
  ModelPreset preset;
  std::shared_ptr<const CavityModel> model;
  std::shared_ptr<const ViewKernel> kernel;
  std::shared_ptr<const BasisSet> basis;  // columns scaled to unit RMS
  double time_mesh = 0;
  double time_basis = 0;
};

ModelContext prepare_model(const ModelPreset& preset);

/// Full coupling operator: dense when N² doubles fit the memory budget
/// (loaded from or stored to `cache_dir` when given), streaming otherwise.
struct FullCoupling {
  std::shared_ptr<const CouplingOperator> op;
  double time_viewfactor = 0;
  bool from_cache = false;
  bool dense = false;
};

FullCoupling full_coupling(const ModelContext& ctx, const std::string& cache_dir = {},
                           std::size_t budget = 0);

struct BaselineRun {
  NewtonResult result;
  SolverReport report;
};

/// "NR" or "PCG" on the full system.
BaselineRun run_baseline(const ModelContext& ctx, const FullCoupling& V, const std::string& solver,
                         const NewtonOptions& nr = {}, const InexactNewtonOptions& pcg = {});

struct CsRun {
  CsResult result;
  SamplePlan plan;
};

CsRun run_cs(const ModelContext& ctx, GreedyAlgorithm algorithm, std::uint64_t seed,
             const Vector* reference, const GreedyOptions& inner = {}, double outer_tol = 1e-6,
             int outer_max = 50);

struct PipelineResult {
  std::vector<SolverReport> reports;
  Vector reference;
  std::vector<std::string> failures;
};

/// mesh → V → basis → sampling → solve for every (solver, seed). A failed run
/// is recorded and the rest continue. Writes CSV artifacts when out_dir is set.
PipelineResult run_pipeline(const BenchmarkConfig& cfg);

void write_reports_csv(std::ostream& os, const std::vector<SolverReport>& reports,
                       bool include_timing = true);
void write_history_csv(std::ostream& os, const std::vector<SolverReport>& reports);
void write_flux_csv(std::ostream& os, const CavityModel& model, const Vector& B);
void write_coefficients_csv(std::ostream& os, const BasisSet& basis, const Vector& c);

// ---------------------------------------------------------------------------
// Representation analysis

struct SweepPoint {
  Region region;
  std::string family;
  Index terms;
  double error;  // relative RMSE of the fit over the region
};

struct RegionSparsityReport {
  Region region;
  std::string family;
  Index significant = 0;             // |c| > threshold with flux / region mean
  std::vector<double> ranked;        // |c| sorted descending
  std::vector<SweepPoint> by_terms;  // error vs leading-term count
  std::vector<SweepPoint> by_level;  // error vs kept-largest count
};

/// Fits each region of `flux` on the normalized basis of `ctx` after
/// dividing by the region mean.
std::vector<RegionSparsityReport> sparsity_sweep(const ModelContext& ctx, const Vector& flux,
                                                 const std::vector<Index>& grid,
                                                 double threshold = 1e-3);

struct AsymmetryMetrics {
  std::vector<double> amplitude;          // |c_n| / c_0 in term order
  std::vector<double> cumulative_energy;  // Σ_{m≤n} c_m² / Σ c²
  double max_asymmetry = 0;               // over n ≥ 1
};

AsymmetryMetrics asymmetry_metrics(const Vector& c_capsule);
/// Projects capsule flux onto raw spherical harmonics with `terms` modes.
Vector capsule_coefficients(const CavityModel& model, const Vector& flux, Index terms);

struct SpeedupRow {
  std::string model;
  Index N = 0;
  double baseline_time = 0;  // median total
  double cs_time = 0;        // median CGSTP total
  double ratio = 0;          // cs_time / baseline_time
  double dt_iht = 0;         // IHT iteration time - CGSTP iteration time
  double dt_cgiht = 0;
};

/// One row per model present in the reports. Throws ConfigError when a model
/// lacks a baseline or a CGSTP run.
std::vector<SpeedupRow> speedup_table(const std::vector<SolverReport>& reports,
                                      const std::string& baseline = "NR");
void write_speedup_csv(std::ostream& os, const std::vector<SpeedupRow>& rows);

double median(std::vector<double> v);

}  // namespace radsym
