#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace radsym {

using Vec3 = Eigen::Vector3d;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Index = std::ptrdiff_t;
using IndexList = std::vector<Index>;

// Error hierarchy. Every failure raised by the library derives from Error so
// the CLI can map categories onto exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid user configuration: non-dividing resolutions, bad dimensions, etc.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Degenerate geometry (coincident centroids, points inside the occluder).
class GeometryError : public Error {
 public:
  using Error::Error;
};

/// A fractional power was requested of a non-positive flux.
class DomainError : public Error {
 public:
  using Error::Error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Allocation would exceed the configured memory budget.
class CapacityError : public Error {
 public:
  CapacityError(const std::string& what, Index attempted)
      : Error(what), attempted_(attempted) {}
  Index attempted() const { return attempted_; }

 private:
  Index attempted_;
};

/// Iterative method failed to converge, stagnated or diverged.
class ConvergenceError : public Error {
 public:
  using Error::Error;
};

enum class Region : int { Capsule = 0, EndFaceTop = 1, EndFaceBottom = 2, Wall = 3 };

inline constexpr int kRegionCount = 4;

inline const char* region_name(Region r) {
  switch (r) {
    case Region::Capsule:
      return "capsule";
    case Region::EndFaceTop:
      return "end_top";
    case Region::EndFaceBottom:
      return "end_bottom";
    case Region::Wall:
      return "wall";
  }
  return "?";
}

/// Half-open index range [begin, end) of one region inside the element list.
struct IndexRange {
  Index begin = 0;
  Index end = 0;
  Index size() const { return end - begin; }
  bool contains(Index i) const { return i >= begin && i < end; }
};

}  // namespace radsym
