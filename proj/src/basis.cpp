#include "radsym/basis.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <ostream>
#include <sstream>

namespace radsym {

namespace {

constexpr double kPi = std::numbers::pi;

double angular(int k, double phi) { return k >= 0 ? std::cos(k * phi) : std::sin(-k * phi); }

long double legendre_ld(int l, long double x) {
  if (l == 0) return 1.0L;
  long double p0 = 1.0L, p1 = x;
  for (int n = 2; n <= l; ++n) {
    const long double p2 = ((2 * n - 1) * x * p1 - (n - 1) * p0) / n;
    p0 = p1;
    p1 = p2;
  }
  return p1;
}

// table[m][k] = P_m^k(x) for 0 <= k <= m <= mmax.
void associated_legendre_table(int mmax, double x, std::vector<std::vector<double>>& table) {
  table.assign(static_cast<std::size_t>(mmax + 1), {});
  for (int m = 0; m <= mmax; ++m) table[m].assign(static_cast<std::size_t>(m + 1), 0.0);
  const double s = std::sqrt(std::max(0.0, (1.0 - x) * (1.0 + x)));
  double pkk = 1.0;
  for (int k = 0; k <= mmax; ++k) {
    if (k > 0) pkk *= (2 * k - 1) * s;
    table[k][k] = pkk;
    if (k + 1 <= mmax) table[k + 1][k] = x * (2 * k + 1) * pkk;
    for (int m = k + 2; m <= mmax; ++m) {
      table[m][k] = ((2 * m - 1) * x * table[m - 1][k] - (m + k - 1) * table[m - 2][k]) / (m - k);
    }
  }
}

double sh_norm(int m, int k) {
  // sqrt((2m+1)(m-k)! / (4π (m+k)!)) with the factorial ratio accumulated
  // as a product to stay in range.
  double ratio = 1.0;
  for (int i = m - k + 1; i <= m + k; ++i) ratio /= i;
  return std::sqrt((2 * m + 1) * ratio / (4 * kPi));
}

void check_inner_ratio(double rt) {
  if (!(rt >= 0 && rt < 1)) throw ConfigError("inner radius ratio must lie in [0, 1)");
}

}  // namespace

const char* family_name(BasisFamily f) {
  switch (f) {
    case BasisFamily::SphericalHarmonic:
      return "SH";
    case BasisFamily::AnnularZernike:
      return "AZ";
    case BasisFamily::LegendreFourier:
      return "LF";
  }
  return "?";
}

TermIndexMap::TermIndexMap(BasisFamily family, Index count) : family_(family) {
  if (count < 0) throw ConfigError("term count must be non-negative");
  orders_.reserve(static_cast<std::size_t>(count));
  for (int d = 0; static_cast<Index>(orders_.size()) < count; ++d) {
    switch (family) {
      case BasisFamily::SphericalHarmonic:
        for (int k = -d; k <= d; ++k) orders_.push_back({d, k});
        break;
      case BasisFamily::AnnularZernike:
        for (int k = -d; k <= d; k += 2) orders_.push_back({d, k});
        break;
      case BasisFamily::LegendreFourier:
        // Degree d = l + |k|; l ascending, sine before cosine, k = 0 last.
        for (int l = 0; l <= d; ++l) {
          const int k = d - l;
          if (k == 0) {
            orders_.push_back({l, 0});
          } else {
            orders_.push_back({l, -k});
            orders_.push_back({l, k});
          }
        }
        break;
    }
  }
  orders_.resize(static_cast<std::size_t>(count));
}

int TermIndexMap::max_degree() const {
  int d = 0;
  for (const TermOrder& o : orders_) {
    d = std::max(d, family_ == BasisFamily::LegendreFourier ? o.l + std::abs(o.k) : o.l);
  }
  return d;
}

Index TermIndexMap::find(const TermOrder& o) const {
  for (std::size_t n = 0; n < orders_.size(); ++n) {
    if (orders_[n] == o) return static_cast<Index>(n);
  }
  return -1;
}

Index TermIndexMap::count_through_degree(BasisFamily family, int d) {
  if (d < 0) return 0;
  const Index n = d;
  switch (family) {
    case BasisFamily::SphericalHarmonic:
    case BasisFamily::LegendreFourier:
      return (n + 1) * (n + 1);
    case BasisFamily::AnnularZernike:
      return (n + 2) * (n + 1) / 2;
  }
  return 0;
}

void write_term_map_csv(std::ostream& os, const TermIndexMap& map) {
  os << "n,family,l,k\n";
  for (Index n = 0; n < map.size(); ++n) {
    os << n << ',' << family_name(map.family()) << ',' << map[n].l << ',' << map[n].k << '\n';
  }
}

double legendre(int l, double x) {
  if (l < 0) throw ConfigError("Legendre degree must be non-negative");
  return static_cast<double>(legendre_ld(l, x));
}

double associated_legendre(int m, int k, double x) {
  if (m < 0 || k < 0 || k > m) throw ConfigError("associated Legendre needs 0 <= k <= m");
  std::vector<std::vector<double>> t;
  associated_legendre_table(m, x, t);
  return t[m][k];
}

double spherical_harmonic(int m, int k, double theta, double phi) {
  if (m < 0 || std::abs(k) > m) throw ConfigError("spherical harmonic needs |k| <= m");
  const int ak = std::abs(k);
  return sh_norm(m, ak) * associated_legendre(m, ak, std::cos(theta)) * angular(k, phi);
}

AnnularRadialTable::AnnularRadialTable(int max_degree, double inner_ratio)
    : n_(max_degree), rt_(inner_ratio) {
  if (max_degree < 0) throw ConfigError("radial degree must be non-negative");
  check_inner_ratio(inner_ratio);
  const long double e2 = static_cast<long double>(rt_) * rt_;
  const long double span = 1.0L - e2;
  // Level k needs j <= n - k so that level k+1 can reach Q_{j+1}^k(0).
  h_.assign(static_cast<std::size_t>(n_ + 1), {});
  q0_.assign(static_cast<std::size_t>(n_ + 1), {});
  const long double x0 = -2.0L * e2 / span - 1.0L;
  for (int j = 0; j <= n_; ++j) {
    h_[0].push_back(span / (2.0L * (2 * j + 1)));
    q0_[0].push_back(legendre_ld(j, x0));
  }
  for (int k = 1; k <= n_; ++k) {
    const auto& hp = h_[k - 1];
    const auto& qp = q0_[k - 1];
    for (int j = 0; j <= n_ - k; ++j) {
      const long double a = 2.0L * (2 * j + 2 * k - 1) / ((j + k) * span);
      h_[k].push_back(-a * qp[j + 1] / qp[j] * hp[j]);
      long double sum = 0;
      for (int i = 0; i <= j; ++i) sum += qp[i] * qp[i] / hp[i];
      q0_[k].push_back(a * hp[j] / qp[j] * sum);
    }
  }
}

void AnnularRadialTable::evaluate(double r, std::vector<std::vector<double>>& out) const {
  const long double e2 = static_cast<long double>(rt_) * rt_;
  const long double span = 1.0L - e2;
  const long double rr = r;
  const long double tau = rr * rr;
  std::vector<std::vector<long double>> q(static_cast<std::size_t>(n_ + 1));
  const long double x = 2.0L * (tau - e2) / span - 1.0L;
  for (int j = 0; j <= n_; ++j) q[0].push_back(legendre_ld(j, x));
  for (int k = 1; k <= n_; ++k) {
    const auto& hp = h_[k - 1];
    const auto& qp = q0_[k - 1];
    long double sum = 0;
    for (int j = 0; j <= n_ - k; ++j) {
      sum += qp[j] * q[k - 1][j] / hp[j];
      const long double a = 2.0L * (2 * j + 2 * k - 1) / ((j + k) * span);
      q[k].push_back(a * hp[j] / qp[j] * sum);
    }
  }
  out.assign(static_cast<std::size_t>(n_ + 1), {});
  long double rk = 1.0L;
  for (int k = 0; k <= n_; ++k) {
    if (k > 0) rk *= rr;
    for (int j = 0; 2 * j + k <= n_; ++j) {
      long double val;
      if (k == 0) {
        val = q[0][j];
      } else if (j == 0) {
        // Closed form for l = k: r^k / sqrt(sum_{i<=k} r̃^{2i}).
        long double s = 0, p = 1;
        for (int i = 0; i <= k; ++i) {
          s += p;
          p *= e2;
        }
        val = rk / std::sqrt(s);
      } else {
        val = std::sqrt(span / (2.0L * (2 * j + k + 1) * h_[k][j])) * rk * q[k][j];
      }
      out[k].push_back(static_cast<double>(val));
    }
  }
}

double zernike_annular_radial(int j, int k, double r, double inner_ratio) {
  if (j < 0 || k < 0) throw ConfigError("annular radial orders must be non-negative");
  check_inner_ratio(inner_ratio);
  const double tol = 1e-12;
  if (r < inner_ratio - tol || r > 1 + tol) throw ConfigError("radius outside [r̃, 1]");
  AnnularRadialTable table(2 * j + k, inner_ratio);
  std::vector<std::vector<double>> out;
  table.evaluate(r, out);
  return out[k][j];
}

double zernike_annular(int l, int k, double r, double inner_ratio, double phi) {
  const int ak = std::abs(k);
  if (l < 0 || ak > l || (l - ak) % 2 != 0) {
    throw ConfigError("annular Zernike needs l - |k| >= 0 and even");
  }
  return zernike_annular_radial((l - ak) / 2, ak, r, inner_ratio) * angular(k, phi);
}

double legendre_fourier(int l, int k, double z, double phi) {
  if (l < 0) throw ConfigError("Legendre degree must be non-negative");
  return legendre(l, z) * angular(k, phi);
}

Matrix build_basis_matrix(std::span<const SurfaceElement> elements, Region region,
                          const TermIndexMap& map, double inner_ratio) {
  const Index n = static_cast<Index>(elements.size());
  const Index L = map.size();
  Matrix out(n, L);
  if (L == 0 || n == 0) return out;
  const int dmax = map.max_degree();

  switch (map.family()) {
    case BasisFamily::SphericalHarmonic: {
      if (region != Region::Capsule) throw ConfigError("spherical harmonics live on the capsule");
      std::vector<double> norm;
      for (Index t = 0; t < L; ++t) norm.push_back(sh_norm(map[t].l, std::abs(map[t].k)));
#pragma omp parallel
      {
        std::vector<std::vector<double>> p;
#pragma omp for schedule(static)
        for (Index i = 0; i < n; ++i) {
          const SurfaceElement& e = elements[static_cast<std::size_t>(i)];
          associated_legendre_table(dmax, std::cos(e.u), p);
          for (Index t = 0; t < L; ++t) {
            const TermOrder& o = map[t];
            out(i, t) = norm[static_cast<std::size_t>(t)] * p[o.l][std::abs(o.k)] * angular(o.k, e.v);
          }
        }
      }
      break;
    }
    case BasisFamily::AnnularZernike: {
      if (region != Region::EndFaceTop && region != Region::EndFaceBottom) {
        throw ConfigError("annular Zernike polynomials live on the end faces");
      }
      const AnnularRadialTable table(dmax, inner_ratio);
#pragma omp parallel
      {
        std::vector<std::vector<double>> rad;
#pragma omp for schedule(static)
        for (Index i = 0; i < n; ++i) {
          const SurfaceElement& e = elements[static_cast<std::size_t>(i)];
          table.evaluate(e.u, rad);
          for (Index t = 0; t < L; ++t) {
            const TermOrder& o = map[t];
            const int ak = std::abs(o.k);
            out(i, t) = rad[ak][(o.l - ak) / 2] * angular(o.k, e.v);
          }
        }
      }
      break;
    }
    case BasisFamily::LegendreFourier: {
      if (region != Region::Wall) throw ConfigError("Legendre-Fourier terms live on the wall");
#pragma omp parallel
      {
        std::vector<double> p(static_cast<std::size_t>(dmax + 1));
#pragma omp for schedule(static)
        for (Index i = 0; i < n; ++i) {
          const SurfaceElement& e = elements[static_cast<std::size_t>(i)];
          for (int l = 0; l <= dmax; ++l) p[l] = static_cast<double>(legendre_ld(l, e.u));
          for (Index t = 0; t < L; ++t) out(i, t) = p[map[t].l] * angular(map[t].k, e.v);
        }
      }
      break;
    }
  }
  return out;
}

BasisSet::BasisSet(std::array<BasisBlock, kRegionCount> blocks, double inner_ratio)
    : blocks_(std::move(blocks)), inner_ratio_(inner_ratio) {
  Index row = 0, col = 0;
  for (BasisBlock& b : blocks_) {
    if (b.values.rows() != b.rows.size() || b.values.cols() != b.cols.size()) {
      throw DimensionError(std::string("basis block for ") + region_name(b.region) +
                           " does not match its index ranges");
    }
    if (b.rows.begin != row || b.cols.begin != col) {
      throw DimensionError("basis blocks must tile rows and columns in region order");
    }
    row = b.rows.end;
    col = b.cols.end;
  }
  rows_ = row;
  cols_ = col;
  scale_ = Vector::Ones(cols_);
}

std::vector<IndexRange> BasisSet::column_ranges() const {
  std::vector<IndexRange> out;
  for (const BasisBlock& b : blocks_) out.push_back(b.cols);
  return out;
}

Vector BasisSet::apply(const Vector& c) const {
  if (c.size() != cols_) throw DimensionError("coefficient vector length mismatch");
  Vector out(rows_);
  for (const BasisBlock& b : blocks_) {
    out.segment(b.rows.begin, b.rows.size()).noalias() =
        b.values * c.segment(b.cols.begin, b.cols.size());
  }
  return out;
}

Vector BasisSet::apply_transpose(const Vector& r) const {
  if (r.size() != rows_) throw DimensionError("row vector length mismatch");
  Vector out(cols_);
  for (const BasisBlock& b : blocks_) {
    out.segment(b.cols.begin, b.cols.size()).noalias() =
        b.values.transpose() * r.segment(b.rows.begin, b.rows.size());
  }
  return out;
}

namespace {
const BasisBlock& block_of_row(const std::array<BasisBlock, kRegionCount>& blocks, Index row) {
  for (const BasisBlock& b : blocks) {
    if (b.rows.contains(row)) return b;
  }
  throw DimensionError("row index outside the basis");
}
}  // namespace

Vector BasisSet::apply_rows(const Vector& c, const IndexList& rows) const {
  if (c.size() != cols_) throw DimensionError("coefficient vector length mismatch");
  Vector out(static_cast<Index>(rows.size()));
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const BasisBlock& b = block_of_row(blocks_, rows[k]);
    out[static_cast<Index>(k)] =
        b.values.row(rows[k] - b.rows.begin).dot(c.segment(b.cols.begin, b.cols.size()));
  }
  return out;
}

Matrix BasisSet::rows_dense(const IndexList& rows) const {
  Matrix out = Matrix::Zero(static_cast<Index>(rows.size()), cols_);
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const BasisBlock& b = block_of_row(blocks_, rows[k]);
    out.row(static_cast<Index>(k)).segment(b.cols.begin, b.cols.size()) =
        b.values.row(rows[k] - b.rows.begin);
  }
  return out;
}

Matrix BasisSet::right_multiply(const Matrix& X) const {
  if (X.cols() != rows_) throw DimensionError("right_multiply: column count mismatch");
  Matrix out(X.rows(), cols_);
  for (const BasisBlock& b : blocks_) {
    out.middleCols(b.cols.begin, b.cols.size()).noalias() =
        X.middleCols(b.rows.begin, b.rows.size()) * b.values;
  }
  return out;
}

Matrix BasisSet::dense() const {
  Matrix out = Matrix::Zero(rows_, cols_);
  for (const BasisBlock& b : blocks_) {
    out.block(b.rows.begin, b.cols.begin, b.rows.size(), b.cols.size()) = b.values;
  }
  return out;
}

BasisSet BasisSet::normalized(const Vector& areas) const {
  if (areas.size() != rows_) throw DimensionError("area vector length mismatch");
  BasisSet out = *this;
  for (BasisBlock& b : out.blocks_) {
    const Vector w = areas.segment(b.rows.begin, b.rows.size());
    const double wsum = w.sum();
    for (Index t = 0; t < b.values.cols(); ++t) {
      const double ms = (w.array() * b.values.col(t).array().square()).sum() / wsum;
      const double s = ms > 0 ? std::sqrt(ms) : 1.0;
      b.values.col(t) /= s;
      out.scale_[b.cols.begin + t] = scale_[b.cols.begin + t] * s;
    }
  }
  return out;
}

BasisSet assemble_block_basis(const CavityModel& model, Matrix Y, Matrix U_top, Matrix U_bot,
                              Matrix W) {
  const TermCounts counts = {Y.cols(), U_top.cols(), U_bot.cols(), W.cols()};
  std::array<Matrix, kRegionCount> mats = {std::move(Y), std::move(U_top), std::move(U_bot),
                                           std::move(W)};
  const std::array<BasisFamily, kRegionCount> fam = {
      BasisFamily::SphericalHarmonic, BasisFamily::AnnularZernike, BasisFamily::AnnularZernike,
      BasisFamily::LegendreFourier};
  std::array<BasisBlock, kRegionCount> blocks;
  Index col = 0;
  for (int r = 0; r < kRegionCount; ++r) {
    BasisBlock& b = blocks[r];
    b.region = static_cast<Region>(r);
    b.rows = model.region_ranges[r];
    if (mats[r].rows() != b.rows.size()) {
      std::ostringstream msg;
      msg << "basis block for " << region_name(b.region) << " has " << mats[r].rows()
          << " rows, region has " << b.rows.size();
      throw DimensionError(msg.str());
    }
    b.cols = {col, col + counts[r]};
    col += counts[r];
    b.map = TermIndexMap(fam[r], counts[r]);
    b.values = std::move(mats[r]);
  }
  return BasisSet(std::move(blocks), model.geometry.inner_ratio());
}

BasisSet assemble_block_basis(const CavityModel& model, const TermCounts& counts) {
  const double rt = model.geometry.inner_ratio();
  auto region_matrix = [&](Region r, BasisFamily f) {
    return build_basis_matrix(model.region_elements(r), r, TermIndexMap(f, counts[static_cast<int>(r)]),
                              rt);
  };
  return assemble_block_basis(model, region_matrix(Region::Capsule, BasisFamily::SphericalHarmonic),
                              region_matrix(Region::EndFaceTop, BasisFamily::AnnularZernike),
                              region_matrix(Region::EndFaceBottom, BasisFamily::AnnularZernike),
                              region_matrix(Region::Wall, BasisFamily::LegendreFourier));
}

FitResult fit_coefficients(const Vector& values, const Matrix& block, const Vector& weights) {
  if (values.size() != block.rows() || weights.size() != block.rows()) {
    throw DimensionError("fit_coefficients: values, weights and block rows must agree");
  }
  if ((weights.array() < 0).any()) throw ConfigError("fit weights must be non-negative");
  const Vector sw = weights.cwiseSqrt();
  const Eigen::MatrixXd X = sw.asDiagonal() * block;
  const Eigen::VectorXd b = sw.cwiseProduct(values);
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(X);
  FitResult out;
  out.coefficients = cod.solve(b);
  out.rank = cod.rank();
  const auto& perm = cod.colsPermutation().indices();
  for (Index p = out.rank; p < X.cols(); ++p) out.deficient_columns.push_back(perm[p]);
  std::sort(out.deficient_columns.begin(), out.deficient_columns.end());
  return out;
}

}  // namespace radsym
