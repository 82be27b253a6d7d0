#pragma once

#include "radsym/mesh.hpp"

#include <array>
#include <cstdint>
#include <iosfwd>

namespace radsym {

using RegionCounts = std::array<Index, kRegionCount>;
using RegionSparsity = std::array<double, kRegionCount>;

/// ceil(s·log10(N)), raised to floor_override when that is larger.
Index sample_count(double s, Index N, Index floor_override = 0);

/// Latin hypercube draw of m distinct indices from [0, n): stratum q is
/// [floor(q·n/m), floor((q+1)·n/m)) and receives one uniform draw. Sorted.
IndexList lhs_indices(Index n, Index m, std::uint64_t seed);

struct SamplePlan {
  RegionCounts counts{};                         // per region
  std::array<IndexList, kRegionCount> local;     // region-local indices
  IndexList indices;                             // global, sorted
  std::uint64_t seed = 0;
  Index population = 0;                          // N

  Index total() const { return static_cast<Index>(indices.size()); }
  double rate() const { return population ? double(total()) / double(population) : 0.0; }
};

/// Per-region counts from sample_count(s_r, N_r, override_r), each region
/// drawn with its own stream derived from (seed, region).
SamplePlan build_plan(const CavityModel& model, const RegionSparsity& s,
                      const RegionCounts& overrides, std::uint64_t seed);

/// Plan that selects every element.
SamplePlan full_plan(const CavityModel& model);

/// CSV with columns region,local,global.
void write_plan_csv(std::ostream& os, const SamplePlan& plan, const CavityModel& model);
SamplePlan read_plan_csv(std::istream& is, const CavityModel& model);

}  // namespace radsym
