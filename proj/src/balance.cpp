#include "radsym/balance.hpp"

#include <cmath>
#include <sstream>

namespace radsym {

void MaterialParams::validate() const {
  if (!(upsilon > 0)) throw ConfigError("upsilon must be positive");
  if (!(beta > 1)) throw ConfigError("beta must exceed 1");
  if (!(t > 0)) throw ConfigError("t must be positive");
  if (!std::isfinite(alpha)) throw ConfigError("alpha must be finite");
}

double MaterialParams::C() const {
  return std::pow(upsilon, -1.0 / beta) * std::pow(t, -alpha / beta);
}

double albedo(double B, const MaterialParams& p) {
  if (!(B > 0)) throw DomainError("albedo needs a positive flux");
  return 1.0 / (1.0 + p.C() * std::pow(B, 1.0 / p.beta - 1.0));
}

DenseCoupling::DenseCoupling(Matrix V) : V_(std::move(V)) {
  if (V_.rows() != V_.cols()) throw DimensionError("coupling matrix must be square");
}

Vector DenseCoupling::apply(const Vector& x) const {
  if (x.size() != V_.cols()) throw DimensionError("coupling apply: size mismatch");
  return V_ * x;
}

Vector DenseCoupling::apply_transpose(const Vector& x) const {
  if (x.size() != V_.rows()) throw DimensionError("coupling apply_transpose: size mismatch");
  return V_.transpose() * x;
}

Vector DenseCoupling::column_square_norms() const {
  return V_.colwise().squaredNorm().transpose();
}

StreamingCoupling::StreamingCoupling(std::shared_ptr<const ViewKernel> kernel)
    : kernel_(std::move(kernel)) {
  if (!kernel_) throw ConfigError("streaming coupling needs a kernel");
}

Vector StreamingCoupling::apply(const Vector& x) const {
  const Index n = kernel_->size();
  if (x.size() != n) throw DimensionError("coupling apply: size mismatch");
  // Upper triangle only: V_ji = V_ij ζ_i / ζ_j since F is symmetric.
  const Vector& a = kernel_->areas();
  Vector out = Vector::Zero(n);
#pragma omp parallel
  {
    Vector row(n), acc = Vector::Zero(n);
#pragma omp for schedule(dynamic, 16) nowait
    for (Index i = 0; i < n; ++i) {
      const Index m = n - i - 1;
      if (m == 0) continue;
      kernel_->row(i, row.data(), i + 1);
      acc[i] += row.tail(m).dot(x.tail(m));
      acc.tail(m) += (a[i] * x[i]) * row.tail(m).cwiseQuotient(a.tail(m));
    }
#pragma omp critical
    out += acc;
  }
  return out;
}

Vector StreamingCoupling::apply_transpose(const Vector& x) const {
  const Vector& a = kernel_->areas();
  return a.cwiseProduct(apply(x.cwiseQuotient(a)));
}

Vector StreamingCoupling::column_square_norms() const {
  // Σ_i (F_ij ζ_j)² = ζ_j² Σ_i F_ij² = ζ_j² Σ_i (V[j][i]/ζ_i)².
  const Index n = kernel_->size();
  const Vector& a = kernel_->areas();
  Vector out(n);
#pragma omp parallel
  {
    Vector row(n);
#pragma omp for schedule(dynamic, 16)
    for (Index j = 0; j < n; ++j) {
      kernel_->row(j, row.data());
      out[j] = a[j] * a[j] * row.cwiseQuotient(a).squaredNorm();
    }
  }
  return out;
}

BalanceSystem make_balance_system(std::shared_ptr<const CouplingOperator> V, const Vector& S0,
                                  const MaterialParams& params) {
  params.validate();
  if (!V) throw ConfigError("balance system needs a coupling operator");
  if (S0.size() != V->size()) throw DimensionError("source length does not match V");
  BalanceSystem sys;
  sys.E = V->apply(S0);
  sys.V = std::move(V);
  sys.params = params;
  return sys;
}

namespace {

template <class F>
Vector guarded_power(const Vector& B, double floor, Index* clamped, F&& f) {
  Vector out(B.size());
  Index count = 0;
  for (Index i = 0; i < B.size(); ++i) {
    double b = B[i];
    if (floor > 0) {
      if (!(b >= floor)) {
        b = floor;
        ++count;
      }
    } else if (!(b > 0)) {
      std::ostringstream msg;
      msg << "non-positive flux " << B[i] << " at row " << i;
      throw DomainError(msg.str());
    }
    out[i] = f(b);
  }
  if (clamped) *clamped += count;
  return out;
}

}  // namespace

Vector emission_term(const Vector& B, const MaterialParams& p, double floor, Index* clamped) {
  const double C = p.C(), e = 1.0 / p.beta;
  return guarded_power(B, floor, clamped, [&](double b) { return C * std::pow(b, e); });
}

Vector emission_derivative(const Vector& B, const MaterialParams& p, double floor,
                           Index* clamped) {
  const double D = p.C() / p.beta, e = 1.0 / p.beta - 1.0;
  return guarded_power(B, floor, clamped, [&](double b) { return D * std::pow(b, e); });
}

Vector residual_full(const Vector& B, const BalanceSystem& sys) {
  if (B.size() != sys.size()) throw DimensionError("residual_full: size mismatch");
  return B - sys.V->apply(B) + emission_term(B, sys.params) - sys.E;
}

SampledSystem make_sampled_system(IndexList rows, Matrix V_rows, const Vector& S0,
                                  std::shared_ptr<const BasisSet> basis,
                                  const MaterialParams& params) {
  params.validate();
  if (!basis) throw ConfigError("sampled system needs a basis");
  if (V_rows.rows() != static_cast<Index>(rows.size()) || V_rows.cols() != basis->rows() ||
      S0.size() != basis->rows()) {
    throw DimensionError("sampled system: rows, V_rows, S0 and basis disagree");
  }
  SampledSystem sys;
  sys.E_rows = V_rows * S0;
  sys.PhiPsi = basis->rows_dense(rows);
  sys.G = sys.PhiPsi - basis->right_multiply(V_rows);
  sys.rows = std::move(rows);
  sys.V_rows = std::move(V_rows);
  sys.params = params;
  sys.basis = std::move(basis);
  sys.flux_floor = 1e-12 * (sys.E_rows.size() ? sys.E_rows.mean() : 0.0);
  return sys;
}

Vector residual_sparse(const Vector& c, const SampledSystem& sys, Index* clamped) {
  const Vector B = sys.basis->apply(c);
  Vector Bs(sys.measurements());
  for (Index k = 0; k < Bs.size(); ++k) Bs[k] = B[sys.rows[static_cast<std::size_t>(k)]];
  return Bs - sys.V_rows * B + emission_term(Bs, sys.params, sys.flux_floor, clamped) -
         sys.E_rows;
}

Vector residual_sparse(const Vector& c, const BalanceSystem& sys, const BasisSet& basis) {
  return residual_full(basis.apply(c), sys);
}

Matrix jacobian(const Vector& c, const SampledSystem& sys, Index* clamped) {
  const Vector Bs = sys.PhiPsi * c;
  const Vector d = emission_derivative(Bs, sys.params, sys.flux_floor, clamped);
  return sys.G + d.asDiagonal() * sys.PhiPsi;
}

Matrix jacobian(const Vector& c, const BalanceSystem& sys, const BasisSet& basis) {
  const auto* dense = dynamic_cast<const DenseCoupling*>(sys.V.get());
  if (!dense) throw ConfigError("full Jacobian needs a dense coupling matrix");
  const Vector B = basis.apply(c);
  const Vector d = emission_derivative(B, sys.params);
  Matrix J = basis.dense();
  J -= basis.right_multiply(dense->matrix());
  J += d.asDiagonal() * basis.dense();
  return J;
}

LinearizedSystem linearize(const Vector& c_star, const SampledSystem& sys) {
  LinearizedSystem out;
  out.A = jacobian(c_star, sys, &out.clamped);
  out.y = out.A * c_star - residual_sparse(c_star, sys, &out.clamped);
  out.expansion_point = c_star;
  return out;
}

}  // namespace radsym
