#include "radsym/viewfactor.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <exception>
#include <fstream>
#include <numbers>
#include <sstream>
#include <unordered_map>

namespace radsym {

namespace {

constexpr double kInvPi = std::numbers::inv_pi;

std::vector<unsigned char> seen_flags(Index n, const IndexList& rows) {
  std::vector<unsigned char> seen(static_cast<std::size_t>(n), 0);
  for (Index r : rows) {
    if (r < 0 || r >= n) {
      std::ostringstream msg;
      msg << "row index " << r << " outside [0, " << n << ")";
      throw DimensionError(msg.str());
    }
    if (seen[static_cast<std::size_t>(r)]) {
      std::ostringstream msg;
      msg << "duplicate row index " << r;
      throw DimensionError(msg.str());
    }
    seen[static_cast<std::size_t>(r)] = 1;
  }
  return seen;
}

void write_u64(std::ostream& os, std::uint64_t v) {
  unsigned char b[8];
  for (int k = 0; k < 8; ++k) b[k] = static_cast<unsigned char>(v >> (8 * k));
  os.write(reinterpret_cast<const char*>(b), 8);
}

std::uint64_t read_u64(std::istream& is) {
  unsigned char b[8];
  is.read(reinterpret_cast<char*>(b), 8);
  if (!is) throw Error("truncated matrix header");
  std::uint64_t v = 0;
  for (int k = 0; k < 8; ++k) v |= std::uint64_t(b[k]) << (8 * k);
  return v;
}

static_assert(sizeof(double) == 8);

void write_doubles(std::ostream& os, const double* data, std::size_t count) {
  if constexpr (std::endian::native == std::endian::little) {
    os.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(count * 8));
  } else {
    for (std::size_t k = 0; k < count; ++k) {
      std::uint64_t bits;
      std::memcpy(&bits, data + k, 8);
      write_u64(os, bits);
    }
  }
}

void read_doubles(std::istream& is, double* data, std::size_t count) {
  if constexpr (std::endian::native == std::endian::little) {
    is.read(reinterpret_cast<char*>(data), static_cast<std::streamsize>(count * 8));
    if (!is) throw Error("truncated matrix payload");
  } else {
    for (std::size_t k = 0; k < count; ++k) {
      const std::uint64_t bits = read_u64(is);
      std::memcpy(data + k, &bits, 8);
    }
  }
}

}  // namespace

ViewFactorOptions cavity_options(const CavityModel& model) {
  ViewFactorOptions opt;
  opt.occluder = SphereOccluder{Vec3::Zero(), model.geometry.capsule_radius};
  return opt;
}

bool occluded(const Vec3& p, const Vec3& q, const Vec3& center, double radius) {
  const Vec3 a = p - center;
  const double r2 = radius * radius;
  if (a.squaredNorm() < r2 || (q - center).squaredNorm() < r2) {
    throw GeometryError("segment endpoint lies inside the occluding sphere");
  }
  const Vec3 d = q - p;
  const double dd = d.squaredNorm();
  if (dd == 0) return false;
  const double s = -a.dot(d);
  if (!(s > 0 && s < dd)) return false;
  // Squared distance from the centre to the closest point, scaled by dd.
  return a.squaredNorm() * dd - s * s < r2 * dd;
}

double point_kernel(const Vec3& pi, const Vec3& ni, const Vec3& pj, const Vec3& nj) {
  const Vec3 d = pj - pi;
  const double r2 = d.squaredNorm();
  if (r2 == 0) throw GeometryError("coincident element centroids");
  const double ci = ni.dot(d);
  const double cj = -nj.dot(d);
  if (!(ci > 0 && cj > 0)) return 0;
  return kInvPi * (ci * cj) / (r2 * r2);
}

double pair_view_factor(const SurfaceElement& a, const SurfaceElement& b,
                        const std::optional<SphereOccluder>& occluder) {
  const double f = point_kernel(a.centroid, a.normal, b.centroid, b.normal);
  if (f == 0) return 0;
  if (occluder && a.region != Region::Capsule && b.region != Region::Capsule &&
      occluded(a.centroid, b.centroid, occluder->center, occluder->radius)) {
    return 0;
  }
  return f;
}

ViewKernel::ViewKernel(std::vector<SurfaceElement> elements, ViewFactorOptions options)
    : elements_(std::move(elements)), options_(options), n_(static_cast<Index>(elements_.size())) {
  px_.resize(n_);
  py_.resize(n_);
  pz_.resize(n_);
  nx_.resize(n_);
  ny_.resize(n_);
  nz_.resize(n_);
  area_.resize(n_);
  diam_.resize(n_);
  capsule_.assign(static_cast<std::size_t>(n_), 0);
  for (Index i = 0; i < n_; ++i) {
    const SurfaceElement& e = elements_[static_cast<std::size_t>(i)];
    px_[i] = e.centroid.x();
    py_[i] = e.centroid.y();
    pz_[i] = e.centroid.z();
    nx_[i] = e.normal.x();
    ny_[i] = e.normal.y();
    nz_[i] = e.normal.z();
    area_[i] = e.area;
    diam_[i] = e.diameter;
    capsule_[static_cast<std::size_t>(i)] = e.region == Region::Capsule;
  }
  build_near_pairs();
}

void ViewKernel::build_near_pairs() {
  near_ptr_.assign(static_cast<std::size_t>(n_) + 1, 0);
  near_idx_.clear();
  near_val_.clear();
  if (!options_.refine_near_pairs || n_ == 0) return;
  const double nf = options_.near_factor;
  const double cell = nf * diam_.maxCoeff();
  if (!(cell > 0)) return;

  auto key = [](long long a, long long b, long long c) {
    return (a * 73856093LL) ^ (b * 19349663LL) ^ (c * 83492791LL);
  };
  auto coord = [&](double v) { return static_cast<long long>(std::floor(v / cell)); };
  std::unordered_map<long long, std::vector<Index>> grid;
  for (Index i = 0; i < n_; ++i) grid[key(coord(px_[i]), coord(py_[i]), coord(pz_[i]))].push_back(i);

  std::vector<std::vector<Index>> nbr(static_cast<std::size_t>(n_));
#pragma omp parallel for schedule(dynamic, 64)
  for (Index i = 0; i < n_; ++i) {
    const long long cx = coord(px_[i]), cy = coord(py_[i]), cz = coord(pz_[i]);
    auto& list = nbr[static_cast<std::size_t>(i)];
    for (long long a = cx - 1; a <= cx + 1; ++a) {
      for (long long b = cy - 1; b <= cy + 1; ++b) {
        for (long long c = cz - 1; c <= cz + 1; ++c) {
          const auto it = grid.find(key(a, b, c));
          if (it == grid.end()) continue;
          for (Index j : it->second) {
            const double dx = px_[j] - px_[i], dy = py_[j] - py_[i], dz = pz_[j] - pz_[i];
            const double r2 = dx * dx + dy * dy + dz * dz;
            const double lim = nf * std::max(diam_[i], diam_[j]);
            if (j != i && r2 > 0 && r2 < lim * lim) list.push_back(j);
          }
        }
      }
    }
    // Hash collisions can repeat a cell.
    std::sort(list.begin(), list.end());
    list.erase(std::unique(list.begin(), list.end()), list.end());
  }
  for (Index i = 0; i < n_; ++i) {
    near_ptr_[static_cast<std::size_t>(i) + 1] =
        near_ptr_[static_cast<std::size_t>(i)] + static_cast<Index>(nbr[static_cast<std::size_t>(i)].size());
  }
  near_idx_.reserve(static_cast<std::size_t>(near_ptr_.back()));
  for (const auto& list : nbr) near_idx_.insert(near_idx_.end(), list.begin(), list.end());
  near_val_.assign(near_idx_.size(), 0.0);

  std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic, 16)
  for (Index i = 0; i < n_; ++i) {
    try {
      const bool ci = capsule_[static_cast<std::size_t>(i)];
      for (Index k = near_ptr_[static_cast<std::size_t>(i)]; k < near_ptr_[static_cast<std::size_t>(i) + 1]; ++k) {
        const Index j = near_idx_[static_cast<std::size_t>(k)];
        if (j < i) continue;
        if ((options_.capsule_convex && ci && capsule_[static_cast<std::size_t>(j)]) || blocked(i, j)) continue;
        const double dx = px_[j] - px_[i], dy = py_[j] - py_[i], dz = pz_[j] - pz_[i];
        const double r2 = dx * dx + dy * dy + dz * dz;
        near_val_[static_cast<std::size_t>(k)] =
            refined_kernel(i, j, split_count(r2, std::max(diam_[i], diam_[j])));
      }
    } catch (...) {
#pragma omp critical
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  for (Index i = 0; i < n_; ++i) {
    for (Index k = near_ptr_[static_cast<std::size_t>(i)]; k < near_ptr_[static_cast<std::size_t>(i) + 1]; ++k) {
      const Index j = near_idx_[static_cast<std::size_t>(k)];
      if (j > i) continue;
      const auto b = near_idx_.begin() + near_ptr_[static_cast<std::size_t>(j)];
      const auto e = near_idx_.begin() + near_ptr_[static_cast<std::size_t>(j) + 1];
      near_val_[static_cast<std::size_t>(k)] =
          near_val_[static_cast<std::size_t>(std::lower_bound(b, e, i) - near_idx_.begin())];
    }
  }
}

ViewKernel::ViewKernel(const CavityModel& model)
    : ViewKernel(model.elements, cavity_options(model)) {}

bool ViewKernel::blocked(Index i, Index j) const {
  if (!options_.occluder) return false;
  if (capsule_[static_cast<std::size_t>(i)] || capsule_[static_cast<std::size_t>(j)]) {
    return false;
  }
  // Evaluate from the lower index so the answer is symmetric bit-for-bit.
  const Index a = std::min(i, j);
  const Index b = std::max(i, j);
  return occluded(elements_[static_cast<std::size_t>(a)].centroid,
                  elements_[static_cast<std::size_t>(b)].centroid, options_.occluder->center,
                  options_.occluder->radius);
}

int ViewKernel::split_count(double r2, double d) const {
  const double r = std::sqrt(r2);
  const int m = static_cast<int>(std::ceil(2 * options_.near_factor * d / r));
  return std::clamp(m, 2, std::max(2, options_.max_split));
}

double ViewKernel::refined_kernel(Index i, Index j, int m) const {
  const auto si = split_cell(elements_[static_cast<std::size_t>(i)], m);
  const auto sj = split_cell(elements_[static_cast<std::size_t>(j)], m);
  double wi = 0, wj = 0;
  for (const auto& s : si) wi += s.area;
  for (const auto& s : sj) wj += s.area;
  double f = 0;
  for (const auto& a : si) {
    for (const auto& b : sj) {
      const Vec3 d = b.position - a.position;
      const double r2 = d.squaredNorm();
      const double ca = a.normal.dot(d);
      const double cb = -b.normal.dot(d);
      if (ca > 0 && cb > 0) f += a.area * b.area * kInvPi * ca * cb / (r2 * r2);
    }
  }
  return f / (wi * wj);
}

double ViewKernel::kernel(Index i, Index j) const {
  if (i < 0 || j < 0 || i >= n_ || j >= n_) throw DimensionError("kernel index out of range");
  if (i == j) return 0;
  if (options_.capsule_convex && capsule_[static_cast<std::size_t>(i)] &&
      capsule_[static_cast<std::size_t>(j)]) {
    return 0;
  }
  // Evaluate in index order so kernel(i,j) and kernel(j,i) agree bit-for-bit.
  if (i > j) std::swap(i, j);
  const double dx = px_[j] - px_[i], dy = py_[j] - py_[i], dz = pz_[j] - pz_[i];
  const double r2 = dx * dx + dy * dy + dz * dz;
  if (r2 == 0) throw GeometryError("coincident element centroids");
  if (blocked(i, j)) return 0;
  const double lim = options_.near_factor * std::max(diam_[i], diam_[j]);
  if (options_.refine_near_pairs && r2 < lim * lim) {
    const auto b = near_idx_.begin() + near_ptr_[static_cast<std::size_t>(i)];
    const auto e = near_idx_.begin() + near_ptr_[static_cast<std::size_t>(i) + 1];
    return near_val_[static_cast<std::size_t>(std::lower_bound(b, e, j) - near_idx_.begin())];
  }
  const double ci = nx_[i] * dx + ny_[i] * dy + nz_[i] * dz;
  const double cj = -(nx_[j] * dx + ny_[j] * dy + nz_[j] * dz);
  if (!(ci > 0 && cj > 0)) return 0;
  return kInvPi * (ci * cj) / (r2 * r2);
}

template <bool Occluded>
Index ViewKernel::far_row(Index i, double* out, Index begin) const {
  const double pix = px_[i], piy = py_[i], piz = pz_[i];
  const double nix = nx_[i], niy = ny_[i], niz = nz_[i];
  const double* px = px_.data();
  const double* py = py_.data();
  const double* pz = pz_.data();
  const double* nx = nx_.data();
  const double* ny = ny_.data();
  const double* nz = nz_.data();
  const double* ar = area_.data();
  const unsigned char* cap = capsule_.data();
  double cx = 0, cy = 0, cz = 0, rr = 0;
  if constexpr (Occluded) {
    cx = options_.occluder->center.x();
    cy = options_.occluder->center.y();
    cz = options_.occluder->center.z();
    rr = options_.occluder->radius * options_.occluder->radius;
  }
  const double aix = pix - cx, aiy = piy - cy, aiz = piz - cz;
  const double ai2 = aix * aix + aiy * aiy + aiz * aiz;
  Index coincident = 0;
#pragma omp simd reduction(+ : coincident)
  for (Index j = begin; j < n_; ++j) {
    const double dx = px[j] - pix, dy = py[j] - piy, dz = pz[j] - piz;
    const double r2 = dx * dx + dy * dy + dz * dz;
    const double ci = nix * dx + niy * dy + niz * dz;
    const double cj = -(nx[j] * dx + ny[j] * dy + nz[j] * dz);
    bool seen = (ci > 0) & (cj > 0);
    if constexpr (Occluded) {
      // Closest-approach test from the lower-index endpoint.
      const bool from_i = i < j;
      const double bx = from_i ? aix : px[j] - cx;
      const double by = from_i ? aiy : py[j] - cy;
      const double bz = from_i ? aiz : pz[j] - cz;
      const double b2 = from_i ? ai2 : bx * bx + by * by + bz * bz;
      const double sx = from_i ? dx : -dx, sy = from_i ? dy : -dy, sz = from_i ? dz : -dz;
      const double t = -(bx * sx + by * sy + bz * sz);
      seen = seen & !((t > 0) & (t < r2) & (b2 * r2 - t * t < rr * r2) & (cap[j] == 0));
    }
    out[j] = seen ? kInvPi * (ci * cj) / (r2 * r2) * ar[j] : 0.0;
    coincident += r2 == 0.0;
  }
  return coincident;
}

void ViewKernel::row(Index i, double* out, Index begin) const {
  if (i < 0 || i >= n_) throw DimensionError("row index out of range");
  if (begin < 0 || begin > n_) throw DimensionError("row start out of range");
  const unsigned char* cap = capsule_.data();
  Index coincident = options_.occluder.has_value() && !cap[i] ? far_row<true>(i, out, begin)
                                                              : far_row<false>(i, out, begin);
  if (i >= begin) {
    out[i] = 0.0;
    --coincident;
  }
  if (coincident > 0) throw GeometryError("coincident element centroids");
  if (options_.capsule_convex && cap[i]) {
    for (Index j = begin; j < n_; ++j) out[j] = cap[j] ? 0.0 : out[j];
  }
  const std::size_t k0 = static_cast<std::size_t>(near_ptr_[static_cast<std::size_t>(i)]);
  const std::size_t k1 = static_cast<std::size_t>(near_ptr_[static_cast<std::size_t>(i) + 1]);
  for (std::size_t k = k0; k < k1; ++k) {
    const Index j = near_idx_[k];
    if (j >= begin) out[j] = near_val_[k] * area_[j];
  }
}

std::size_t dense_bytes(Index rows, Index cols) {
  return static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols) * sizeof(double);
}

std::size_t memory_budget_bytes() {
  std::size_t mb = 4096;
  if (const char* env = std::getenv("RADSYM_MEMORY_BUDGET_MB")) {
    char* end = nullptr;
    const unsigned long long v = std::strtoull(env, &end, 10);
    if (end != env && v > 0) mb = static_cast<std::size_t>(v);
  }
  return mb * 1024 * 1024;
}

Matrix assemble_view_matrix(const ViewKernel& kernel, std::size_t budget) {
  const Index n = kernel.size();
  if (budget == 0) budget = memory_budget_bytes();
  if (dense_bytes(n, n) > budget) {
    std::ostringstream msg;
    msg << "dense view-factor matrix for N=" << n << " needs " << dense_bytes(n, n) / (1 << 20)
        << " MiB, budget is " << budget / (1 << 20) << " MiB";
    throw CapacityError(msg.str(), n);
  }
  Matrix V(n, n);
#pragma omp parallel for schedule(dynamic, 16)
  for (Index i = 0; i < n; ++i) kernel.row(i, V.row(i).data());
  return V;
}

Matrix assemble_view_matrix(const CavityModel& model, std::size_t budget) {
  return assemble_view_matrix(ViewKernel(model), budget);
}

Matrix assemble_view_rows(const ViewKernel& kernel, const IndexList& rows) {
  seen_flags(kernel.size(), rows);
  const Index m = static_cast<Index>(rows.size());
  Matrix V(m, kernel.size());
#pragma omp parallel for schedule(dynamic, 8)
  for (Index k = 0; k < m; ++k) kernel.row(rows[static_cast<std::size_t>(k)], V.row(k).data());
  return V;
}

Matrix assemble_view_rows(const CavityModel& model, const IndexList& rows) {
  return assemble_view_rows(ViewKernel(model), rows);
}

Vector source_term(const Matrix& V, const Vector& source_flux) {
  if (V.cols() != source_flux.size()) {
    std::ostringstream msg;
    msg << "source_term: V has " << V.cols() << " columns, S0 has " << source_flux.size()
        << " entries";
    throw DimensionError(msg.str());
  }
  return V * source_flux;
}

void write_square_matrix(std::ostream& os, const Matrix& m) {
  if (m.rows() != m.cols()) throw DimensionError("square matrix format needs rows == cols");
  write_u64(os, static_cast<std::uint64_t>(m.rows()));
  write_doubles(os, m.data(), static_cast<std::size_t>(m.size()));
  if (!os) throw Error("failed writing matrix");
}

Matrix read_square_matrix(std::istream& is) {
  const std::uint64_t n = read_u64(is);
  if (n > (std::uint64_t(1) << 31)) throw Error("implausible matrix size in header");
  Matrix m(static_cast<Index>(n), static_cast<Index>(n));
  read_doubles(is, m.data(), static_cast<std::size_t>(m.size()));
  return m;
}

void save_square_matrix(const std::string& path, const Matrix& m) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot open " + path + " for writing");
  write_square_matrix(os, m);
}

Matrix load_square_matrix(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("cannot open " + path);
  return read_square_matrix(is);
}

void write_matrix(std::ostream& os, const Matrix& m) {
  write_u64(os, static_cast<std::uint64_t>(m.rows()));
  write_u64(os, static_cast<std::uint64_t>(m.cols()));
  write_doubles(os, m.data(), static_cast<std::size_t>(m.size()));
  if (!os) throw Error("failed writing matrix");
}

Matrix read_matrix(std::istream& is) {
  const std::uint64_t r = read_u64(is);
  const std::uint64_t c = read_u64(is);
  if (r > (std::uint64_t(1) << 31) || c > (std::uint64_t(1) << 31)) {
    throw Error("implausible matrix size in header");
  }
  Matrix m(static_cast<Index>(r), static_cast<Index>(c));
  read_doubles(is, m.data(), static_cast<std::size_t>(m.size()));
  return m;
}

std::uint64_t fnv1a64(std::string_view data) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char ch : data) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace radsym
