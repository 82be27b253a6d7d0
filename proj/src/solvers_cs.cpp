#include "radsym/solvers.hpp"

#include <chrono>
#include <cmath>

namespace radsym {

double rmse(const Vector& B, const Vector& ref) {
  if (B.size() != ref.size() || ref.size() == 0) throw DimensionError("rmse: size mismatch");
  const double scale = std::sqrt(ref.squaredNorm() / double(ref.size()));
  const double err = std::sqrt((B - ref).squaredNorm() / double(ref.size()));
  return scale > 0 ? err / scale : err;
}

Vector constant_start(const SampledSystem& sys) {
  const BasisSet& basis = *sys.basis;
  Vector c = Vector::Zero(basis.cols());
  const double global = sys.E_rows.size() ? sys.E_rows.mean() : 0.0;
  for (const BasisBlock& blk : basis.blocks()) {
    if (blk.cols.size() == 0) continue;
    double sum = 0;
    Index count = 0;
    for (std::size_t k = 0; k < sys.rows.size(); ++k) {
      if (blk.rows.contains(sys.rows[k])) {
        sum += sys.E_rows[static_cast<Index>(k)];
        ++count;
      }
    }
    const double target = count ? sum / double(count) : global;
    const double v0 = blk.values(0, 0);
    if (v0 == 0) throw ConfigError("basis block lacks a constant leading term");
    c[blk.cols.begin] = target / v0;
  }
  return c;
}

CsResult nonlinear_cs_solve(const SampledSystem& sys, const CsOptions& opt) {
  using clock = std::chrono::steady_clock;
  const auto t0 = clock::now();
  const BasisSet& basis = *sys.basis;
  const std::vector<IndexRange> ranges = basis.column_ranges();
  std::vector<Index> k(opt.K.begin(), opt.K.end());
  const SparsityPattern pattern = SparsityPattern::blockwise(ranges, k);

  CsResult out;
  SolverReport& rep = out.report;
  rep.algorithm = algorithm_name(opt.algorithm);
  rep.N = basis.rows();
  rep.M = sys.measurements();
  rep.K = opt.K;

  const double Enorm = sys.E_rows.norm() > 0 ? sys.E_rows.norm() : 1.0;
  Vector c = constant_start(sys);
  const auto record = [&](const Vector& coeffs) {
    rep.residual_history.push_back(residual_sparse(coeffs, sys, &rep.clamp_events).norm() /
                                   Enorm);
    if (opt.reference) rep.error_history.push_back(rmse(basis.apply(coeffs), *opt.reference));
  };
  record(c);

  while (rep.outer_iterations < opt.outer_max) {
    const LinearizedSystem lin = linearize(c, sys);
    rep.clamp_events += lin.clamped;
    GreedyResult inner;
    try {
      inner = run_greedy(opt.algorithm, lin.A, lin.y, pattern, opt.inner);
    } catch (const ConvergenceError&) {
      rep.status = "inner_diverged";
      break;
    }
    rep.inner_iterations += inner.iterations;
    rep.inner_per_outer.push_back(inner.iterations);
    rep.rank_deficient_solves += inner.rank_deficient_solves;

    const Vector dc = inner.c - c;
    double step = 1.0;
    int halvings = 0;
    Vector c_new = inner.c;
    while (!((sys.PhiPsi * c_new).minCoeff() > 0)) {
      if (++halvings > opt.max_halvings) break;
      step *= 0.5;
      ++rep.damping_events;
      c_new = c + step * dc;
    }
    if (halvings > opt.max_halvings) {
      rep.status = "damping_failed";
      break;
    }
    const double denom = c_new.norm() > 0 ? c_new.norm() : 1.0;
    const double change = (c_new - c).norm() / denom;
    c = std::move(c_new);
    ++rep.outer_iterations;
    record(c);
    if (change < opt.outer_tol) {
      rep.converged = true;
      break;
    }
  }
  if (!rep.converged && rep.status == "ok") rep.status = "outer_max";

  out.c = c;
  out.B = basis.apply(c);
  if (opt.reference) {
    rep.rmse = rmse(out.B, *opt.reference);
    const IndexRange cap = basis.block(Region::Capsule).rows;
    rep.rmse_capsule =
        rmse(out.B.segment(cap.begin, cap.size()), opt.reference->segment(cap.begin, cap.size()));
  }
  rep.time_iteration = std::chrono::duration<double>(clock::now() - t0).count();
  return out;
}

}  // namespace radsym
