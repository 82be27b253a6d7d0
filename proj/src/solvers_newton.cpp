#include "radsym/solvers.hpp"

#include <cmath>
#include <functional>
#include <sstream>

namespace radsym {

namespace {

using Op = std::function<Vector(const Vector&)>;

// Restarted GMRES with right Jacobi preconditioning, x0 = 0.
Vector gmres(const Op& A, const Vector& b, const Vector& inv_diag, double tol, int restart,
             int max_iter, int& iterations) {
  const Index n = b.size();
  Vector x = Vector::Zero(n);
  const double bnorm = b.norm();
  if (bnorm == 0) return x;
  Vector r = b;
  double beta = bnorm;
  int total = 0;
  const int m = std::max(1, restart);
  while (total < max_iter) {
    std::vector<Vector> Q;
    Q.reserve(static_cast<std::size_t>(m) + 1);
    Q.push_back(r / beta);
    Eigen::MatrixXd H = Eigen::MatrixXd::Zero(m + 1, m);
    Eigen::VectorXd cs = Eigen::VectorXd::Zero(m), sn = Eigen::VectorXd::Zero(m);
    Eigen::VectorXd g = Eigen::VectorXd::Zero(m + 1);
    g[0] = beta;
    int j = 0;
    for (; j < m && total < max_iter; ++j, ++total) {
      Vector w = A(inv_diag.cwiseProduct(Q[static_cast<std::size_t>(j)]));
      for (int i = 0; i <= j; ++i) {
        H(i, j) = w.dot(Q[static_cast<std::size_t>(i)]);
        w.noalias() -= H(i, j) * Q[static_cast<std::size_t>(i)];
      }
      H(j + 1, j) = w.norm();
      for (int i = 0; i < j; ++i) {
        const double t = cs[i] * H(i, j) + sn[i] * H(i + 1, j);
        H(i + 1, j) = -sn[i] * H(i, j) + cs[i] * H(i + 1, j);
        H(i, j) = t;
      }
      const double den = std::hypot(H(j, j), H(j + 1, j));
      cs[j] = den > 0 ? H(j, j) / den : 1.0;
      sn[j] = den > 0 ? H(j + 1, j) / den : 0.0;
      const double hjj = H(j, j), hj1 = H(j + 1, j);
      H(j, j) = cs[j] * hjj + sn[j] * hj1;
      H(j + 1, j) = 0;
      g[j + 1] = -sn[j] * g[j];
      g[j] = cs[j] * g[j];
      const bool done = std::abs(g[j + 1]) <= tol * bnorm;
      if (!done && hj1 > 0) Q.push_back(w / hj1);
      if (done || hj1 == 0) {
        ++j;
        ++total;
        break;
      }
    }
    const Eigen::VectorXd y =
        H.topLeftCorner(j, j).triangularView<Eigen::Upper>().solve(g.head(j));
    Vector update = Vector::Zero(n);
    for (int i = 0; i < j; ++i) update.noalias() += y[i] * Q[static_cast<std::size_t>(i)];
    x.noalias() += inv_diag.cwiseProduct(update);
    r = b - A(x);
    beta = r.norm();
    if (beta <= tol * bnorm) break;
  }
  iterations += total;
  return x;
}

double positive_root(double rhs, double C, double e) {
  if (!(rhs > 0)) return 0.0;
  // g(B) = B + C B^e - rhs is increasing and concave on (0, rhs].
  double lo = 0, hi = rhs, b = rhs;
  for (int it = 0; it < 200; ++it) {
    const double g = b + C * std::pow(b, e) - rhs;
    if (g > 0) hi = b; else lo = b;
    const double dg = 1 + C * e * std::pow(b, e - 1);
    double next = b - g / dg;
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::abs(next - b) <= 1e-15 * b) return next;
    b = next;
  }
  return b;
}

struct LineSearch {
  Vector B;
  Vector F;
  double rel = 0;
  bool accepted = false;
};

LineSearch backtrack(const BalanceSystem& sys, const Vector& B, const Vector& delta, double rel,
                     double Enorm, int max_halvings, NewtonResult& out) {
  double step = 1.0;
  for (int h = 0; h <= max_halvings; ++h) {
    LineSearch ls;
    ls.B = B + step * delta;
    if (ls.B.minCoeff() > 0) {
      ls.F = residual_full(ls.B, sys);
      ls.rel = ls.F.norm() / Enorm;
      if (ls.rel < rel) {
        ls.accepted = true;
        return ls;
      }
    }
    step *= 0.5;
    ++out.halvings;
  }
  ++out.stagnations;
  return {};
}

double norm_or_one(const Vector& E) {
  const double n = E.norm();
  return n > 0 ? n : 1.0;
}

Vector start_flux(const BalanceSystem& sys, const Vector& initial) {
  if (initial.size() == 0) return default_initial_flux(sys);
  if (initial.size() != sys.size()) throw DimensionError("initial flux length mismatch");
  if (!(initial.minCoeff() > 0)) throw DomainError("initial flux must be positive");
  return initial;
}

}  // namespace

Vector default_initial_flux(const BalanceSystem& sys) {
  const Vector rhs = sys.E + sys.V->apply(sys.E);
  const double C = sys.params.C(), e = 1.0 / sys.params.beta;
  double floor = 0;
  for (Index i = 0; i < rhs.size(); ++i) floor = std::max(floor, rhs[i]);
  floor = floor > 0 ? 1e-12 * floor : 1e-300;
  Vector B(rhs.size());
  for (Index i = 0; i < rhs.size(); ++i) B[i] = std::max(positive_root(rhs[i], C, e), floor);
  return B;
}

NewtonResult newton_raphson(const BalanceSystem& sys, const NewtonOptions& opt) {
  const Index n = sys.size();
  const auto* dense = dynamic_cast<const DenseCoupling*>(sys.V.get());
  const std::size_t budget = opt.memory_budget ? opt.memory_budget : memory_budget_bytes();
  const std::size_t need = 2 * dense_bytes(n, n);
  bool use_lu = false;
  switch (opt.linear) {
    case LinearSolverKind::DenseLU:
      if (!dense) throw ConfigError("dense LU needs an assembled view-factor matrix");
      if (need > budget) throw CapacityError("dense Jacobian exceeds memory budget", need);
      use_lu = true;
      break;
    case LinearSolverKind::Krylov:
      break;
    case LinearSolverKind::Auto:
      use_lu = dense && need <= budget;
      break;
  }

  NewtonResult out;
  out.linear_solver = use_lu ? "dense_lu" : "gmres";
  out.B = start_flux(sys, opt.initial);
  const double Enorm = norm_or_one(sys.E);
  Vector F = residual_full(out.B, sys);
  double rel = F.norm() / Enorm;
  out.residual_history.push_back(rel);
  while (rel >= opt.tol && out.iterations < opt.max_iter) {
    const Vector D = emission_derivative(out.B, sys.params);
    Vector delta;
    if (use_lu) {
      Eigen::MatrixXd J = -dense->matrix();
      J.diagonal().array() += 1.0 + D.array();
      delta = J.partialPivLu().solve(-F);
    } else {
      const Vector inv = (1.0 + D.array()).inverse().matrix();
      const Op J = [&](const Vector& x) -> Vector {
        return x - sys.V->apply(x) + D.cwiseProduct(x);
      };
      delta = gmres(J, -F, inv, opt.krylov_tol, opt.krylov_restart, opt.krylov_max,
                    out.linear_iterations);
    }
    LineSearch ls = backtrack(sys, out.B, delta, rel, Enorm, opt.max_halvings, out);
    if (!ls.accepted) break;
    out.B = std::move(ls.B);
    F = std::move(ls.F);
    rel = ls.rel;
    ++out.iterations;
    out.residual_history.push_back(rel);
  }
  out.converged = rel < opt.tol;
  return out;
}

NewtonResult inexact_newton_pcg(const BalanceSystem& sys, const InexactNewtonOptions& opt) {
  NewtonResult out;
  out.linear_solver = "cgnr";
  out.B = start_flux(sys, opt.initial);
  const double Enorm = norm_or_one(sys.E);
  const Vector colsq = sys.V->column_square_norms();
  Vector F = residual_full(out.B, sys);
  double rel = F.norm() / Enorm;
  out.residual_history.push_back(rel);
  while (rel >= opt.tol && out.iterations < opt.max_iter) {
    const Vector D = emission_derivative(out.B, sys.params);
    const auto J = [&](const Vector& x) -> Vector {
      return x - sys.V->apply(x) + D.cwiseProduct(x);
    };
    const auto Jt = [&](const Vector& x) -> Vector {
      return x - sys.V->apply_transpose(x) + D.cwiseProduct(x);
    };
    const Vector precond = (1.0 + D.array()).square().matrix() + colsq;

    Vector x = Vector::Zero(sys.size());
    Vector r = Jt(-F);
    const double r0 = r.norm();
    Vector z = r.cwiseQuotient(precond);
    Vector d = z;
    double rz = r.dot(z);
    for (int k = 0; k < opt.inner_max && r0 > 0; ++k) {
      const Vector q = J(d);
      const double qq = q.squaredNorm();
      if (!(qq > 0)) break;
      const double a = rz / qq;
      x.noalias() += a * d;
      r.noalias() -= a * Jt(q);
      ++out.linear_iterations;
      if (r.norm() <= opt.inner_tol * r0) break;
      z = r.cwiseQuotient(precond);
      const double rz_new = r.dot(z);
      d = z + (rz_new / rz) * d;
      rz = rz_new;
    }
    LineSearch ls = backtrack(sys, out.B, x, rel, Enorm, opt.max_halvings, out);
    if (!ls.accepted) break;
    out.B = std::move(ls.B);
    F = std::move(ls.F);
    rel = ls.rel;
    ++out.iterations;
    out.residual_history.push_back(rel);
  }
  out.converged = rel < opt.tol;
  return out;
}

}  // namespace radsym
