#pragma once

#include "radsym/balance.hpp"
#include "radsym/sampling.hpp"

#include <functional>
#include <string>
#include <vector>

namespace radsym {

// ---------------------------------------------------------------------------
// Sparsity and thresholding

/// Per-block sparsity: at most k[b] nonzeros inside blocks[b]. Blocks tile
/// [0, L) in order.
struct SparsityPattern {
  std::vector<IndexRange> blocks;
  std::vector<Index> k;

  static SparsityPattern global(Index L, Index K);
  static SparsityPattern blockwise(const std::vector<IndexRange>& blocks,
                                   const std::vector<Index>& k);
  Index length() const { return blocks.empty() ? 0 : blocks.back().end; }
  Index total() const;
  void validate(Index L) const;
};

/// Keeps the K largest magnitudes; ties go to the lower index.
Vector hard_threshold(const Vector& v, Index K);
Vector hard_threshold(const Vector& v, const SparsityPattern& pattern);
/// Indices that hard_threshold would keep, sorted ascending.
IndexList top_k_indices(const Vector& v, const SparsityPattern& pattern);
/// Sorted indices of the nonzero entries.
IndexList support_of(const Vector& v);

// ---------------------------------------------------------------------------
// Greedy linear solvers for A c = y with ‖c‖₀ ≤ K

enum class GreedyAlgorithm { IHT, NIHT, CGIHT, SP, CGSTP };

const char* algorithm_name(GreedyAlgorithm a);
GreedyAlgorithm parse_algorithm(const std::string& name);
bool is_greedy_name(const std::string& name);

/// Per-iteration view of a greedy solver, for tracing and tests. `direction`
/// and `restriction` are empty for solvers without search directions.
struct GreedyTrace {
  int iteration = 0;
  const Vector* c = nullptr;
  const Vector* direction = nullptr;
  const IndexList* support = nullptr;
  const IndexList* restriction = nullptr;
  double step = 0;
  double weight = 0;
  double residual = 0;
};

struct GreedyOptions {
  int max_iter = 0;           // 0: 5000 for IHT/NIHT/CGIHT, 200 for SP/CGSTP
  double tol = 1e-8;          // on ‖y - Ac‖ / ‖y‖
  double stagnation = 1e-6;   // IHT family: stop when the best residual of the last
  int stagnation_window = 50;  // window iterations improved by less than stagnation·window
  double step = 1.0;          // IHT step μ, applied after rescaling ‖A‖₂ below 1
  double divergence_factor = 10.0;
  std::function<void(const GreedyTrace&)> observer;
};

struct GreedyResult {
  Vector c;
  int iterations = 0;
  std::vector<double> residual_history;  // relative residual, iterations + 1 entries
  bool converged = false;
  std::string stop_reason;
  IndexList support;
  Index rank_deficient_solves = 0;
};

GreedyResult iht(const Matrix& A, const Vector& y, const SparsityPattern& K,
                 const GreedyOptions& opt = {});
GreedyResult niht(const Matrix& A, const Vector& y, const SparsityPattern& K,
                  const GreedyOptions& opt = {});
GreedyResult cgiht(const Matrix& A, const Vector& y, const SparsityPattern& K,
                   const GreedyOptions& opt = {});
GreedyResult subspace_pursuit(const Matrix& A, const Vector& y, const SparsityPattern& K,
                              const GreedyOptions& opt = {});
GreedyResult cgstp(const Matrix& A, const Vector& y, const SparsityPattern& K,
                   const GreedyOptions& opt = {});
GreedyResult run_greedy(GreedyAlgorithm a, const Matrix& A, const Vector& y,
                        const SparsityPattern& K, const GreedyOptions& opt = {});

/// Minimum-norm least squares on the listed columns; the returned vector has
/// length A.cols() and is zero off the support.
Vector restricted_least_squares(const Matrix& A, const Vector& y, const IndexList& support,
                                bool* rank_deficient = nullptr);

/// Largest singular value by power iteration on AᵀA.
double spectral_norm(const Matrix& A, int iterations = 200, double tol = 1e-10);

// ---------------------------------------------------------------------------
// Dense baselines on the full flux vector

enum class LinearSolverKind { Auto, DenseLU, Krylov };

struct NewtonOptions {
  double tol = 1e-8;             // ‖F(B)‖ / ‖E‖
  int max_iter = 30;
  int max_halvings = 30;
  LinearSolverKind linear = LinearSolverKind::Auto;
  double krylov_tol = 1e-12;     // GMRES relative residual
  int krylov_max = 2000;
  int krylov_restart = 80;
  std::size_t memory_budget = 0;  // 0: memory_budget_bytes()
  Vector initial;                 // empty: default starting flux
};

struct NewtonResult {
  Vector B;
  int iterations = 0;
  std::vector<double> residual_history;  // relative, iterations + 1 entries
  bool converged = false;
  std::string linear_solver;
  int linear_iterations = 0;
  int halvings = 0;
  int stagnations = 0;
};

/// Starting flux for the baselines: per element, the root of
/// B + C·B^{1/β} = E + V E (one bounce of reflected source added).
Vector default_initial_flux(const BalanceSystem& sys);

NewtonResult newton_raphson(const BalanceSystem& sys, const NewtonOptions& opt = {});

struct InexactNewtonOptions {
  double tol = 1e-8;
  int max_iter = 50;
  double inner_tol = 1e-2;    // on the normal-equation residual
  int inner_max = 2000;
  int max_halvings = 30;
  Vector initial;
};

/// Newton outer loop whose steps are solved by Jacobi-preconditioned
/// conjugate gradients on the normal equations JᵀJ δ = -JᵀF.
NewtonResult inexact_newton_pcg(const BalanceSystem& sys, const InexactNewtonOptions& opt = {});

// ---------------------------------------------------------------------------
// Compressed nonlinear solve

struct SolverReport {
  std::string algorithm;
  std::string model;
  Index N = 0;
  Index M = 0;
  RegionCounts K{};
  std::uint64_t seed = 0;
  int inner_iterations = 0;
  int outer_iterations = 0;
  std::vector<int> inner_per_outer;
  std::vector<double> residual_history;  // outer: ‖f(c)‖/‖E‖ on sampled rows
  std::vector<double> error_history;     // outer: relative RMSE vs reference, if given
  double rmse = -1;                      // all elements
  double rmse_capsule = -1;
  double time_viewfactor = 0;
  double time_basis = 0;
  double time_iteration = 0;
  double time_total = 0;
  Index clamp_events = 0;
  Index damping_events = 0;
  Index rank_deficient_solves = 0;
  bool converged = false;
  std::string status = "ok";
};

struct CsOptions {
  GreedyAlgorithm algorithm = GreedyAlgorithm::CGSTP;
  RegionCounts K{30, 35, 35, 100};
  GreedyOptions inner;
  double outer_tol = 1e-6;
  int outer_max = 50;
  int max_halvings = 20;
  // Optional full reference flux; fills error_history per outer iteration.
  const Vector* reference = nullptr;
};

struct CsResult {
  Vector c;
  Vector B;  // Ψc on every element
  SolverReport report;
};

/// Constant-only starting coefficients: each region's constant term is set
/// so Ψc equals the sampled-row mean of E in that region.
Vector constant_start(const SampledSystem& sys);

CsResult nonlinear_cs_solve(const SampledSystem& sys, const CsOptions& opt);

/// Relative RMSE sqrt(mean((B - ref)²)) / rms(ref).
double rmse(const Vector& B, const Vector& ref);

}  // namespace radsym
