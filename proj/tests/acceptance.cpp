#include "radsym/harness.hpp"
#include "toy.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <set>
#include <sstream>

using namespace radsym;

namespace {

using clock_type = std::chrono::steady_clock;

double seconds_since(clock_type::time_point t0) {
  return std::chrono::duration<double>(clock_type::now() - t0).count();
}

// Pinned thresholds.
constexpr Index kN21 = 9776, kN22 = 38952, kN31 = 20736, kN32 = 82944;
constexpr double kSymmetryTol = 1e-12;
constexpr double kSphereRowTol = 0.02;
constexpr double kZernikeTol = 1e-10;
constexpr double kGramTol = 1e-2;
constexpr double kLatitudeTol = 1e-10;
constexpr double kJacobianTol = 1e-6;
constexpr int kNewtonMaxIter = 4;
constexpr double kNewtonResidual = 1e-8;
constexpr double kScalarRootTol = 1e-12;
constexpr Index kSynthL = 1000, kSynthK = 30;
constexpr int kSynthSeeds = 20;
constexpr double kSynthErr = 1e-6;
constexpr double kSynthRate = 0.95;
constexpr double kPipelineRmse = 1.5e-3;
constexpr int kInnerLo = 20, kInnerHi = 80;
constexpr int kSeeds = 20;
constexpr int kProfileOuter = 8;
constexpr double kProfileBand = 0.10;
constexpr Index kSigLo[3] = {20, 25, 70}, kSigHi[3] = {45, 50, 140};
constexpr double kSigThreshold = 1e-3;
constexpr double kEnergy35 = 0.995;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// Shared S2-1 state: context, reference flux and the seeded greedy runs.
struct S21 {
  ModelContext ctx;
  FullCoupling V;
  BaselineRun nr;
  std::map<std::string, std::vector<SolverReport>> runs;
};

class Acceptance {
 public:
  explicit Acceptance(std::string cache) : cache_(std::move(cache)) {}

  S21& s21() {
    if (!s21_) {
      s21_.emplace();
      s21_->ctx = prepare_model(model_preset("s2-1"));
      s21_->V = full_coupling(s21_->ctx, cache_);
      s21_->nr = run_baseline(s21_->ctx, s21_->V, "NR");
    }
    return *s21_;
  }

  const std::vector<SolverReport>& s21_runs(GreedyAlgorithm a) {
    S21& s = s21();
    auto& out = s.runs[algorithm_name(a)];
    if (out.empty()) {
      for (int i = 0; i < kSeeds; ++i) {
        out.push_back(seeded_run(s.ctx, a, 1 + static_cast<std::uint64_t>(i), s.nr.result.B));
      }
    }
    return out;
  }

  static SolverReport seeded_run(const ModelContext& ctx, GreedyAlgorithm a, std::uint64_t seed,
                                 const Vector& ref) {
    try {
      return run_cs(ctx, a, seed, &ref).result.report;
    } catch (const std::exception& e) {
      SolverReport r;
      r.algorithm = algorithm_name(a);
      r.seed = seed;
      r.status = std::string("error: ") + e.what();
      return r;
    }
  }

  Outcome c1() {
    const std::pair<const char*, Index> expect[] = {
        {"s2-1", kN21}, {"s2-2", kN22}, {"s3-1", kN31}, {"s3-2", kN32}};
    Outcome o{true, ""};
    for (const auto& [name, n] : expect) {
      const Index got = assemble_cavity(model_preset(name).geometry, {}).size();
      o.pass &= got == n;
      o.detail += fmt("%s N=%lld ", name, static_cast<long long>(got));
    }
    return o;
  }

  Outcome c2() {
    S21& s = s21();
    const auto& dense = dynamic_cast<const DenseCoupling&>(*s.V.op);
    const Matrix& V = dense.matrix();
    const Vector& a = s.ctx.kernel->areas();
    double worst = 0;
    for (Index j = 0; j < V.cols(); ++j) {
      for (Index i = j + 1; i < V.rows(); ++i) {
        const double kij = V(i, j) / a[j], kji = V(j, i) / a[i];
        const double scale = std::max(std::abs(kij), std::abs(kji));
        if (scale > 0) worst = std::max(worst, std::abs(kij - kji) / scale);
      }
    }
    const double coarse = sphere_row_error(36), fine = sphere_row_error(72);
    return {worst <= kSymmetryTol && coarse < kSphereRowTol && fine < coarse,
            fmt("symmetry %.2e; sphere |rowsum-1| 5deg %.4f, 2.5deg %.4f", worst, coarse, fine)};
  }

  Outcome c3() {
    double zern = 0;
    for (int n = 0; n <= 12; ++n) {
      for (int m = n % 2; m <= n; m += 2) {
        for (int t = 0; t <= 20; ++t) {
          const double r = t / 20.0;
          zern = std::max(zern, std::abs(zernike_annular_radial((n - m) / 2, m, r, 0.0) -
                                         circle_zernike(n, m, r)));
        }
      }
    }
    const CavityModel m = assemble_cavity(model_preset("s2-2").geometry, {});
    const double rt = m.geometry.leh_radius / m.geometry.cavity_radius;
    double gram[3];
    const std::pair<Region, BasisFamily> fam[3] = {
        {Region::Capsule, BasisFamily::SphericalHarmonic},
        {Region::EndFaceTop, BasisFamily::AnnularZernike},
        {Region::Wall, BasisFamily::LegendreFourier}};
    for (int f = 0; f < 3; ++f) {
      const auto el = m.region_elements(fam[f].first);
      const Matrix B = build_basis_matrix(el, fam[f].first, TermIndexMap(fam[f].second, 100), rt);
      Vector w(B.rows());
      for (Index i = 0; i < w.size(); ++i) w[i] = el[static_cast<std::size_t>(i)].area;
      const Matrix G = B.transpose() * w.asDiagonal() * B;
      gram[f] = 0;
      for (Index i = 0; i < G.rows(); ++i) {
        for (Index j = 0; j < G.cols(); ++j) {
          if (i != j) gram[f] = std::max(gram[f], std::abs(G(i, j)) / std::sqrt(G(i, i) * G(j, j)));
        }
      }
    }
    double lat = 0;
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0, 2 * std::numbers::pi);
    for (int deg = 0; deg <= 5; ++deg) {
      for (double theta : {0.15, 0.7, 1.3, 2.2, 3.0}) {
        auto sum = [&](double phi) {
          double s = 0;
          for (int k = -deg; k <= deg; ++k) s += std::pow(spherical_harmonic(deg, k, theta, phi), 2);
          return s;
        };
        const double s0 = sum(0);
        for (int t = 0; t < 8; ++t) lat = std::max(lat, std::abs(sum(u(rng)) - s0) / std::max(1.0, s0));
      }
    }
    const bool ok = zern <= kZernikeTol && gram[0] < kGramTol && gram[1] < kGramTol &&
                    gram[2] < kGramTol && lat <= kLatitudeTol;
    return {ok, fmt("zernike %.1e; gram SH %.2e AZ %.2e LF %.2e; latitude %.1e", zern, gram[0],
                    gram[1], gram[2], lat)};
  }

  Outcome c4() {
    const ModelContext ctx = prepare_model(test::toy_preset());
    auto V = std::make_shared<DenseCoupling>(assemble_view_matrix(*ctx.kernel));
    const BalanceSystem sys = make_balance_system(V, ctx.model->source.flux, ctx.preset.material);
    IndexList rows(static_cast<std::size_t>(ctx.model->size()));
    std::iota(rows.begin(), rows.end(), Index{0});
    const SampledSystem all = make_sampled_system(rows, V->matrix(), ctx.model->source.flux,
                                                  ctx.basis, ctx.preset.material);
    std::mt19937_64 rng(2024);
    std::normal_distribution<double> g;
    double worst = 0;
    for (int trial = 0; trial < 20; ++trial) {
      Vector c = constant_start(all);
      Vector dc(c.size());
      for (Index i = 0; i < dc.size(); ++i) dc[i] = g(rng);
      const Vector B0 = ctx.basis->apply(c);
      dc *= 0.3 * B0.minCoeff() / ctx.basis->apply(dc).cwiseAbs().maxCoeff();
      c += dc;
      const Matrix J = jacobian(c, sys, *ctx.basis);
      const double h = 1e-6 * std::max(1.0, c.cwiseAbs().maxCoeff());
      Matrix Jfd(J.rows(), J.cols());
      for (Index k = 0; k < c.size(); ++k) {
        Vector cp = c, cm = c;
        cp[k] += h;
        cm[k] -= h;
        Jfd.col(k) = (residual_sparse(cp, sys, *ctx.basis) - residual_sparse(cm, sys, *ctx.basis)) / (2 * h);
      }
      worst = std::max(worst, (J - Jfd).cwiseAbs().maxCoeff() / J.cwiseAbs().maxCoeff());
    }
    return {worst < kJacobianTol, fmt("max relative error %.2e over 20 points, N=%lld", worst,
                                      static_cast<long long>(ctx.model->size()))};
  }

  Outcome c5() {
    S21& s = s21();
    const NewtonResult& r = s.nr.result;
    const double res = r.residual_history.back();

    const ModelContext toy = prepare_model(test::toy_preset());
    const Index n = toy.model->size();
    auto V0 = std::make_shared<DenseCoupling>(Matrix::Zero(n, n));
    const Vector E = make_balance_system(std::make_shared<DenseCoupling>(assemble_view_matrix(*toy.kernel)),
                                         toy.model->source.flux, toy.preset.material)
                         .E;
    const BalanceSystem sys{V0, E, toy.preset.material};
    NewtonOptions opt;
    opt.tol = 1e-14;
    opt.initial = E;
    const NewtonResult t = newton_raphson(sys, opt);
    const double C = sys.params.C(), ib = 1 / sys.params.beta;
    double worst = 0;
    for (Index i = 0; i < n; ++i) {
      double lo = 0, hi = std::max(E[i], 0.0);
      for (int it = 0; it < 300; ++it) {
        const double mid = 0.5 * (lo + hi);
        (mid + C * std::pow(mid, ib) > E[i] ? hi : lo) = mid;
      }
      const double root = 0.5 * (lo + hi);
      worst = std::max(worst, std::abs(t.B[i] - root) / std::max(root, 1e-300));
    }
    return {r.converged && r.iterations <= kNewtonMaxIter && res < kNewtonResidual &&
                worst <= kScalarRootTol,
            fmt("S2-1 NR %d iterations, residual %.2e, %.1fs; toy scalar-root error %.1e",
                r.iterations, res, s.nr.report.time_total, worst)};
  }

  Outcome c6() {
    const Index M = static_cast<Index>(4 * kSynthK * std::log10(double(kSynthL)) * 10);
    int ok_sp = 0, ok_cg = 0;
    std::vector<double> it_sp, it_cg;
    for (int seed = 1; seed <= kSynthSeeds; ++seed) {
      std::mt19937_64 rng(static_cast<std::uint64_t>(seed));
      std::normal_distribution<double> g;
      Matrix A(M, kSynthL);
      for (Index j = 0; j < kSynthL; ++j)
        for (Index i = 0; i < M; ++i) A(i, j) = g(rng) / std::sqrt(double(M));
      IndexList all(static_cast<std::size_t>(kSynthL));
      std::iota(all.begin(), all.end(), Index{0});
      std::shuffle(all.begin(), all.end(), rng);
      IndexList supp(all.begin(), all.begin() + kSynthK);
      std::sort(supp.begin(), supp.end());
      Vector c0 = Vector::Zero(kSynthL);
      for (Index j : supp) c0[j] = g(rng);
      const Vector y = A * c0;
      const auto K = SparsityPattern::global(kSynthL, kSynthK);
      const GreedyResult sp = subspace_pursuit(A, y, K);
      const GreedyResult cg = cgstp(A, y, K);
      auto good = [&](const GreedyResult& r) {
        return r.support == supp && (r.c - c0).norm() / c0.norm() < kSynthErr;
      };
      ok_sp += good(sp);
      ok_cg += good(cg);
      it_sp.push_back(sp.iterations);
      it_cg.push_back(cg.iterations);
    }
    const double msp = median(it_sp), mcg = median(it_cg);
    const int need = static_cast<int>(std::ceil(kSynthRate * kSynthSeeds));
    return {ok_sp >= need && ok_cg >= need && mcg <= msp,
            fmt("M=%lld; recovered SP %d/%d, CGSTP %d/%d; median iterations SP %.1f, CGSTP %.1f",
                static_cast<long long>(M), ok_sp, kSynthSeeds, ok_cg, kSynthSeeds, msp, mcg)};
  }

  Outcome c7() {
    auto summarize = [](const std::vector<SolverReport>& runs, double& rm, double& it) {
      std::vector<double> r, n;
      for (const auto& x : runs) {
        r.push_back(x.rmse >= 0 ? x.rmse : INFINITY);
        n.push_back(x.inner_iterations);
      }
      rm = median(r);
      it = median(n);
    };
    double r21, i21, r31, i31;
    summarize(s21_runs(GreedyAlgorithm::CGSTP), r21, i21);

    const ModelContext ctx = prepare_model(model_preset("s3-1"));
    const FullCoupling V = full_coupling(ctx, cache_);
    const Vector ref = run_baseline(ctx, V, "NR").result.B;
    std::vector<SolverReport> s31;
    for (int i = 0; i < kSeeds; ++i) {
      s31.push_back(seeded_run(ctx, GreedyAlgorithm::CGSTP, 1 + static_cast<std::uint64_t>(i), ref));
    }
    summarize(s31, r31, i31);
    auto in_band = [](double it) { return it >= kInnerLo && it <= kInnerHi; };
    return {r21 <= kPipelineRmse && r31 <= kPipelineRmse && in_band(i21) && in_band(i31),
            fmt("median over %d seeds: S2-1 rmse %.2e inner %.1f; S3-1 rmse %.2e inner %.1f", kSeeds,
                r21, i21, r31, i31)};
  }

  Outcome c8() {
    double it[3], rm[3];
    const GreedyAlgorithm algs[3] = {GreedyAlgorithm::CGSTP, GreedyAlgorithm::CGIHT,
                                     GreedyAlgorithm::IHT};
    for (int a = 0; a < 3; ++a) {
      std::vector<double> n, r;
      for (const auto& x : s21_runs(algs[a])) {
        n.push_back(x.inner_iterations);
        r.push_back(x.rmse >= 0 ? x.rmse : INFINITY);
      }
      it[a] = median(n);
      rm[a] = median(r);
    }
    return {it[0] < it[1] && it[1] < it[2] && rm[0] < rm[1] && rm[1] < rm[2],
            fmt("median iterations CGSTP %.0f, CGIHT %.0f, IHT %.0f; median rmse %.2e, %.2e, %.2e",
                it[0], it[1], it[2], rm[0], rm[1], rm[2])};
  }

  Outcome c9() {
    std::vector<double> reach;
    for (const auto& r : s21_runs(GreedyAlgorithm::CGSTP)) {
      const auto& e = r.error_history;
      if (e.empty()) {
        reach.push_back(INFINITY);
        continue;
      }
      const double fin = e.back();
      std::size_t k = 0;
      while (k < e.size() && std::abs(e[k] - fin) > kProfileBand * fin) ++k;
      reach.push_back(static_cast<double>(k));
    }
    const double med = median(reach);
    return {med <= kProfileOuter,
            fmt("median outer iterations to within 10%% of final error: %.1f (max %.0f)", med,
                *std::max_element(reach.begin(), reach.end()))};
  }

  Outcome c10() {
    S21& s = s21();
    const auto sweep = sparsity_sweep(s.ctx, s.nr.result.B, {35}, kSigThreshold);
    Index sig[kRegionCount];
    bool ok = true;
    for (int r = 0; r < kRegionCount; ++r) {
      sig[r] = sweep[static_cast<std::size_t>(r)].significant;
      const int f = r == 0 ? 0 : r == 3 ? 2 : 1;
      ok &= sig[r] >= kSigLo[f] && sig[r] <= kSigHi[f];
    }
    const AsymmetryMetrics am =
        asymmetry_metrics(capsule_coefficients(*s.ctx.model, s.nr.result.B, 400));
    const double e35 = am.cumulative_energy[34];
    ok &= e35 > kEnergy35;
    return {ok, fmt("significant SH %lld, AZ %lld/%lld, LF %lld; SH energy of 35 modes %.5f",
                    static_cast<long long>(sig[0]), static_cast<long long>(sig[1]),
                    static_cast<long long>(sig[2]), static_cast<long long>(sig[3]), e35)};
  }

  Outcome c11() {
    std::string detail;
    bool ok = true;
    const std::pair<const char*, const char*> families[2] = {{"s2-1", "s2-2"}, {"s3-1", "s3-2"}};
    for (const auto& [lo, hi] : families) {
      double ratio[2];
      Index n[2];
      int k = 0;
      for (const char* name : {lo, hi}) {
        const ModelContext ctx = prepare_model(model_preset(name));
        const FullCoupling V = full_coupling(ctx);
        const BaselineRun nr = run_baseline(ctx, V, "NR");
        const CsRun cs = run_cs(ctx, GreedyAlgorithm::CGSTP, 1, nullptr);
        ratio[k] = cs.result.report.time_total / nr.report.time_total;
        n[k] = ctx.model->size();
        detail += fmt("%s N=%lld NR %.1fs CGSTP %.1fs; ", name, static_cast<long long>(n[k]),
                      nr.report.time_total, cs.result.report.time_total);
        ok &= nr.result.converged;
        ++k;
      }
      ok &= ratio[1] < ratio[0];
    }

    // Iteration times of three greedy solvers on one linearized S2-1 system.
    S21& s = s21();
    const SamplePlan plan =
        build_plan(*s.ctx.model, s.ctx.preset.sparsity, s.ctx.preset.sample_overrides, 1);
    const SampledSystem sys =
        make_sampled_system(plan.indices, assemble_view_rows(*s.ctx.kernel, plan.indices),
                            s.ctx.model->source.flux, s.ctx.basis, s.ctx.preset.material);
    const LinearizedSystem lin = linearize(constant_start(sys), sys);
    std::vector<IndexRange> blocks;
    std::vector<Index> ks;
    for (const BasisBlock& b : s.ctx.basis->blocks()) blocks.push_back(b.cols);
    for (int r = 0; r < kRegionCount; ++r) ks.push_back(s.ctx.preset.K[r]);
    const auto K = SparsityPattern::blockwise(blocks, ks);
    double t[3];
    const GreedyAlgorithm algs[3] = {GreedyAlgorithm::CGSTP, GreedyAlgorithm::CGIHT,
                                     GreedyAlgorithm::IHT};
    for (int a = 0; a < 3; ++a) {
      const auto t0 = clock_type::now();
      try {
        run_greedy(algs[a], lin.A, lin.y, K);
      } catch (const ConvergenceError&) {
      }
      t[a] = seconds_since(t0);
    }
    ok &= t[0] < t[1] && t[1] < t[2];
    detail += fmt("iteration time CGSTP %.3fs, CGIHT %.3fs, IHT %.3fs", t[0], t[1], t[2]);
    return {ok, detail};
  }

 private:
  static double circle_zernike(int n, int m, double r) {
    auto fact = [](int k) { return std::tgamma(k + 1.0); };
    double s = 0;
    for (int k = 0; k <= (n - m) / 2; ++k) {
      s += (k % 2 ? -1.0 : 1.0) * fact(n - k) /
           (fact(k) * fact((n + m) / 2 - k) * fact((n - m) / 2 - k)) * std::pow(r, n - 2 * k);
    }
    return s;
  }

  static double sphere_row_error(int n_theta) {
    auto el = build_capsule_mesh(1.0, n_theta, 2 * n_theta, true);
    for (auto& e : el) e.region = Region::Wall;
    ViewFactorOptions opt;
    opt.capsule_convex = false;
    const ViewKernel k(std::move(el), opt);
    double worst = 0;
    std::vector<double> row(static_cast<std::size_t>(k.size()));
    for (Index i = 0; i < k.size(); ++i) {
      k.row(i, row.data());
      const double s = std::accumulate(row.begin(), row.end(), 0.0);
      worst = std::max(worst, std::abs(s - 1.0));
    }
    return worst;
  }

  std::string cache_;
  std::optional<S21> s21_;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"radsym acceptance checks"};
  std::string cache;
  std::vector<int> only;
  app.add_option("--cache", cache, "view-factor cache directory");
  app.add_option("--only", only, "run only these criteria")->check(CLI::Range(1, 11));
  CLI11_PARSE(app, argc, argv);

  Acceptance acc(cache);
  using Check = Outcome (Acceptance::*)();
  const Check checks[] = {&Acceptance::c1, &Acceptance::c2, &Acceptance::c3, &Acceptance::c4,
                          &Acceptance::c5, &Acceptance::c6, &Acceptance::c7, &Acceptance::c8,
                          &Acceptance::c9, &Acceptance::c10, &Acceptance::c11};
  const std::set<int> want(only.begin(), only.end());
  int failed = 0;
  for (int c = 1; c <= 11; ++c) {
    if (!want.empty() && !want.count(c)) continue;
    const auto t0 = clock_type::now();
    Outcome o;
    try {
      o = (acc.*checks[c - 1])();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    failed += !o.pass;
    std::cout << "criterion " << c << ": " << (o.pass ? "PASS" : "FAIL") << "  " << o.detail
              << fmt("  [%.0fs]", seconds_since(t0)) << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
