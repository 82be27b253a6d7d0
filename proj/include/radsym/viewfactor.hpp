#pragma once

#include "radsym/mesh.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>

namespace radsym {

struct SphereOccluder {
  Vec3 center = Vec3::Zero();
  double radius = 0;
};

struct ViewFactorOptions {
  std::optional<SphereOccluder> occluder;
  // Pairs of capsule elements never see each other (convex surface).
  bool capsule_convex = true;
  // Pairs closer than near_factor * max(diameter) use an m x m sub-patch
  // average, m = clamp(ceil(2 * near_factor * diameter / distance), 2, max_split).
  bool refine_near_pairs = true;
  double near_factor = 2.0;
  int max_split = 8;
};

/// Options for a cavity model: capsule sphere as the only occluder.
ViewFactorOptions cavity_options(const CavityModel& model);

/// True iff the open segment (p, q) passes strictly inside the sphere.
/// Tangency does not block. Throws GeometryError if an endpoint is inside.
bool occluded(const Vec3& p, const Vec3& q, const Vec3& center, double radius);

/// Point kernel between two centroids with orientation culling and no
/// occlusion: (1/π)[n_i·(p_j−p_i)][n_j·(p_i−p_j)]/‖p_i−p_j‖⁴, or 0 if either
/// cosine is non-positive.
double point_kernel(const Vec3& pi, const Vec3& ni, const Vec3& pj, const Vec3& nj);

/// Pair view factor F_ij for two elements, honouring the occluder
/// but without near-pair refinement.
double pair_view_factor(const SurfaceElement& a, const SurfaceElement& b,
                        const std::optional<SphereOccluder>& occluder = std::nullopt);

/// Row evaluator for V[i][j] = F_ij ζ_j. Keeps a structure-of-arrays copy of
/// the elements so rows vectorize. Immutable and thread-safe after
/// construction.
class ViewKernel {
 public:
  ViewKernel(std::vector<SurfaceElement> elements, ViewFactorOptions options);
  explicit ViewKernel(const CavityModel& model);

  Index size() const { return n_; }
  const ViewFactorOptions& options() const { return options_; }
  const std::vector<SurfaceElement>& elements() const { return elements_; }
  const Vector& areas() const { return area_; }

  /// Symmetric kernel F_ij (equal to F_ji bit-for-bit up to summation order
  /// inside near-pair refinement).
  double kernel(Index i, Index j) const;
  double coupling(Index i, Index j) const { return kernel(i, j) * area_[j]; }

  /// Writes entries [begin, N) of row i of V into out[begin, N).
  void row(Index i, double* out, Index begin = 0) const;

 private:
  int split_count(double r2, double d) const;
  double refined_kernel(Index i, Index j, int m) const;
  bool blocked(Index i, Index j) const;
  void build_near_pairs();
  template <bool Occluded>
  Index far_row(Index i, double* out, Index begin) const;

  std::vector<SurfaceElement> elements_;
  ViewFactorOptions options_;
  Index n_ = 0;
  Vector px_, py_, pz_, nx_, ny_, nz_, area_, diam_;
  std::vector<unsigned char> capsule_;
  // Refined near pairs in CSR form, column indices sorted per row.
  std::vector<Index> near_ptr_, near_idx_;
  std::vector<double> near_val_;
};

/// Bytes a dense N×N double matrix occupies.
std::size_t dense_bytes(Index rows, Index cols);

/// Default memory budget for dense matrices: RADSYM_MEMORY_BUDGET_MB if set,
/// otherwise 4096 MiB.
std::size_t memory_budget_bytes();

/// Full dense V. Throws CapacityError when N² doubles exceed the budget.
Matrix assemble_view_matrix(const ViewKernel& kernel, std::size_t budget = 0);
Matrix assemble_view_matrix(const CavityModel& model, std::size_t budget = 0);

/// Selected rows of V, in the given order. Rows must be distinct and in range.
Matrix assemble_view_rows(const ViewKernel& kernel, const IndexList& rows);
Matrix assemble_view_rows(const CavityModel& model, const IndexList& rows);

/// E = V S⁰ for a full or row-sampled V.
Vector source_term(const Matrix& V, const Vector& source_flux);

/// Matrix binary format: little-endian u64 N followed by N² float64, row-major.
void write_square_matrix(std::ostream& os, const Matrix& m);
Matrix read_square_matrix(std::istream& is);
void save_square_matrix(const std::string& path, const Matrix& m);
Matrix load_square_matrix(const std::string& path);

/// Rectangular variant: u64 rows, u64 cols, then rows*cols float64.
void write_matrix(std::ostream& os, const Matrix& m);
Matrix read_matrix(std::istream& is);

std::uint64_t fnv1a64(std::string_view data);

}  // namespace radsym
