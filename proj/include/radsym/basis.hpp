#pragma once

#include "radsym/mesh.hpp"

#include <array>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

namespace radsym {

enum class BasisFamily : int { SphericalHarmonic = 0, AnnularZernike = 1, LegendreFourier = 2 };

const char* family_name(BasisFamily f);

/// (m, k) for spherical harmonics, (l, k) for annular Zernike and
/// Legendre-Fourier terms. Negative k selects the sine branch.
struct TermOrder {
  int l = 0;
  int k = 0;
  bool operator==(const TermOrder&) const = default;
};

class TermIndexMap {
 public:
  TermIndexMap(BasisFamily family, Index count);

  BasisFamily family() const { return family_; }
  Index size() const { return static_cast<Index>(orders_.size()); }
  const TermOrder& operator[](Index n) const { return orders_[static_cast<std::size_t>(n)]; }
  const std::vector<TermOrder>& orders() const { return orders_; }
  /// Largest polynomial degree present (m, l or l+|k| depending on family).
  int max_degree() const;
  /// Linear index of an order tuple, or -1 if absent.
  Index find(const TermOrder& o) const;

  /// Number of terms through degree d for the family.
  static Index count_through_degree(BasisFamily family, int d);

 private:
  BasisFamily family_;
  std::vector<TermOrder> orders_;
};

/// CSV rows "n,family,l,k".
void write_term_map_csv(std::ostream& os, const TermIndexMap& map);

double legendre(int l, double x);
/// Associated Legendre P_m^k(x), 0 <= k <= m, without the Condon-Shortley phase.
double associated_legendre(int m, int k, double x);

double spherical_harmonic(int m, int k, double theta, double phi);
/// R^k_{2j+k}(r; r̃), k >= 0.
double zernike_annular_radial(int j, int k, double r, double inner_ratio);
double zernike_annular(int l, int k, double r, double inner_ratio, double phi);
double legendre_fourier(int l, int k, double z, double phi);

/// Evaluates all annular Zernike radial polynomials R^k_{2j+k} for 2j+k <= n
/// at one radius. Reusable across many radii for a fixed r̃.
class AnnularRadialTable {
 public:
  AnnularRadialTable(int max_degree, double inner_ratio);
  int max_degree() const { return n_; }
  double inner_ratio() const { return rt_; }
  /// out[k][j] = R^k_{2j+k}(r) for 2j+k <= n.
  void evaluate(double r, std::vector<std::vector<double>>& out) const;

 private:
  int n_;
  double rt_;
  // h_[k][j] = H_j^k, q0_[k][j] = Q_j^k(0), over the extended index range the
  // recurrence needs.
  std::vector<std::vector<long double>> h_, q0_;
};

/// Basis matrix for one region of the model, one row per element and one
/// column per term in map order.
Matrix build_basis_matrix(std::span<const SurfaceElement> elements, Region region,
                          const TermIndexMap& map, double inner_ratio = 0.0);

struct BasisBlock {
  Region region = Region::Capsule;
  IndexRange rows;  // element range in the model
  IndexRange cols;  // coefficient range in c
  TermIndexMap map{BasisFamily::SphericalHarmonic, 0};
  Matrix values;    // rows.size() x cols.size()
};

/// Term counts per region, in region order (capsule, top, bottom, wall).
using TermCounts = std::array<Index, kRegionCount>;

/// Block-diagonal basis Ψ. Products never materialize the zero blocks.
class BasisSet {
 public:
  BasisSet() = default;
  explicit BasisSet(std::array<BasisBlock, kRegionCount> blocks, double inner_ratio = 0.0);

  Index rows() const { return rows_; }
  Index cols() const { return cols_; }
  const BasisBlock& block(Region r) const { return blocks_[static_cast<int>(r)]; }
  const std::array<BasisBlock, kRegionCount>& blocks() const { return blocks_; }
  double inner_ratio() const { return inner_ratio_; }
  std::vector<IndexRange> column_ranges() const;

  Vector apply(const Vector& c) const;                // Ψ c
  Vector apply_transpose(const Vector& r) const;      // Ψᵀ r
  /// Ψ c restricted to the given (global) rows.
  Vector apply_rows(const Vector& c, const IndexList& rows) const;
  /// Dense rows of Ψ (|rows| × L).
  Matrix rows_dense(const IndexList& rows) const;
  /// (X Ψ) for X with N columns, computed per block: result |X.rows| × L.
  Matrix right_multiply(const Matrix& X) const;
  Matrix dense() const;

  /// Copy with every column scaled to unit area-weighted RMS over its
  /// region; scale()[n] holds the divisor applied to column n.
  BasisSet normalized(const Vector& areas) const;
  const Vector& scale() const { return scale_; }

 private:
  std::array<BasisBlock, kRegionCount> blocks_{};
  Index rows_ = 0;
  Index cols_ = 0;
  double inner_ratio_ = 0;
  Vector scale_;
};

BasisSet assemble_block_basis(const CavityModel& model, const TermCounts& counts);
BasisSet assemble_block_basis(const CavityModel& model, Matrix Y, Matrix U_top, Matrix U_bot,
                              Matrix W);

struct FitResult {
  Vector coefficients;
  Index rank = 0;
  IndexList deficient_columns;  // empty when full rank
};

/// Area-weighted least-squares projection of region values onto a block.
FitResult fit_coefficients(const Vector& values, const Matrix& block, const Vector& weights);

}  // namespace radsym
