#pragma once

#include "radsym/basis.hpp"
#include "radsym/viewfactor.hpp"

#include <memory>

namespace radsym {

struct MaterialParams {
  double upsilon = 4.87;
  double alpha = 8.0 / 13.0;
  double beta = 16.0 / 13.0;
  double t = 1.0;

  void validate() const;
  /// C = υ^{-1/β} t^{-α/β}.
  double C() const;
};

/// λ = 1 / (1 + υ^{-1/β} B^{1/β-1} t^{-α/β}). Throws DomainError for B <= 0.
double albedo(double B, const MaterialParams& p);

/// Applies V and Vᵀ for an N×N view-factor matrix.
class CouplingOperator {
 public:
  virtual ~CouplingOperator() = default;
  virtual Index size() const = 0;
  virtual Vector apply(const Vector& x) const = 0;
  virtual Vector apply_transpose(const Vector& x) const = 0;
  /// Σ_i V[i][j]², used by diagonal preconditioners of normal equations.
  virtual Vector column_square_norms() const = 0;
};

class DenseCoupling final : public CouplingOperator {
 public:
  explicit DenseCoupling(Matrix V);
  Index size() const override { return V_.rows(); }
  Vector apply(const Vector& x) const override;
  Vector apply_transpose(const Vector& x) const override;
  Vector column_square_norms() const override;
  const Matrix& matrix() const { return V_; }

 private:
  Matrix V_;
};

/// Matrix-free V: rows are recomputed from the kernel on every product, so
/// memory stays O(N). Vᵀx uses the kernel symmetry F_ij = F_ji.
class StreamingCoupling final : public CouplingOperator {
 public:
  explicit StreamingCoupling(std::shared_ptr<const ViewKernel> kernel);
  Index size() const override { return kernel_->size(); }
  Vector apply(const Vector& x) const override;
  Vector apply_transpose(const Vector& x) const override;
  Vector column_square_norms() const override;

 private:
  std::shared_ptr<const ViewKernel> kernel_;
};

struct BalanceSystem {
  std::shared_ptr<const CouplingOperator> V;
  Vector E;
  MaterialParams params;

  Index size() const { return E.size(); }
};

BalanceSystem make_balance_system(std::shared_ptr<const CouplingOperator> V, const Vector& S0,
                                  const MaterialParams& params);

/// C·B^{1/β}, elementwise. Entries below `floor` are clamped to it when
/// floor > 0 (and counted in *clamped); with floor == 0 any B <= 0 throws.
Vector emission_term(const Vector& B, const MaterialParams& p, double floor = 0,
                     Index* clamped = nullptr);
/// (C/β)·B^{1/β-1}, same domain handling.
Vector emission_derivative(const Vector& B, const MaterialParams& p, double floor = 0,
                           Index* clamped = nullptr);

/// (I - V)B + C·B^{∘1/β} - E.
Vector residual_full(const Vector& B, const BalanceSystem& sys);

/// Row-sampled form of the system with a basis: everything the compressed
/// solver needs, evaluated only on the sampled rows Φ.
struct SampledSystem {
  IndexList rows;      // sorted global element indices
  Matrix V_rows;       // |rows| × N
  Vector E_rows;       // E restricted to rows
  MaterialParams params;
  std::shared_ptr<const BasisSet> basis;
  Matrix PhiPsi;       // Φ Ψ, |rows| × L
  Matrix G;            // Φ (I - V) Ψ, |rows| × L
  double flux_floor = 0;

  Index measurements() const { return static_cast<Index>(rows.size()); }
};

/// E on the sampled rows is formed as V_rows · S0.
SampledSystem make_sampled_system(IndexList rows, Matrix V_rows, const Vector& S0,
                                  std::shared_ptr<const BasisSet> basis,
                                  const MaterialParams& params);

/// f(c) on the sampled rows.
Vector residual_sparse(const Vector& c, const SampledSystem& sys, Index* clamped = nullptr);
/// f(c) on every row of a full system.
Vector residual_sparse(const Vector& c, const BalanceSystem& sys, const BasisSet& basis);

/// Jacobian on the sampled rows: G + diag((C/β)(ΦΨc)^{1/β-1}) ΦΨ.
Matrix jacobian(const Vector& c, const SampledSystem& sys, Index* clamped = nullptr);
/// Full N×L Jacobian (I - V)Ψ + diag((C/β)(Ψc)^{1/β-1})Ψ.
Matrix jacobian(const Vector& c, const BalanceSystem& sys, const BasisSet& basis);

struct LinearizedSystem {
  Matrix A;
  Vector y;
  Vector expansion_point;
  Index clamped = 0;
};

/// A = Φ f_c*, y = Φ(f_c* c* - f(c*)).
LinearizedSystem linearize(const Vector& c_star, const SampledSystem& sys);

}  // namespace radsym
