#include "radsym/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <random>
#include <sstream>
#include <string>

namespace radsym {

Index sample_count(double s, Index N, Index floor_override) {
  if (!(s >= 1)) throw ConfigError("sparsity s must be at least 1");
  if (N <= 1) throw ConfigError("region size must exceed 1");
  // Guard against log10 rounding pushing an exact integer over.
  const double raw = s * std::log10(static_cast<double>(N));
  const Index base = static_cast<Index>(std::ceil(raw - 1e-9));
  return std::max(base, floor_override);
}

IndexList lhs_indices(Index n, Index m, std::uint64_t seed) {
  if (m < 0 || m > n) {
    std::ostringstream msg;
    msg << "cannot draw " << m << " samples from " << n << " elements";
    throw ConfigError(msg.str());
  }
  std::mt19937_64 rng(seed);
  IndexList out;
  out.reserve(static_cast<std::size_t>(m));
  for (Index q = 0; q < m; ++q) {
    const Index lo = q * n / m;
    const Index hi = (q + 1) * n / m;
    std::uniform_int_distribution<Index> pick(lo, hi - 1);
    out.push_back(pick(rng));
  }
  return out;
}

namespace {

std::uint64_t region_seed(std::uint64_t seed, int region) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(region), 0x5eedu};
  std::array<std::uint32_t, 2> out{};
  seq.generate(out.begin(), out.end());
  return (std::uint64_t(out[0]) << 32) | out[1];
}

void finalize(SamplePlan& plan, const CavityModel& model) {
  plan.indices.clear();
  for (int r = 0; r < kRegionCount; ++r) {
    plan.counts[r] = static_cast<Index>(plan.local[r].size());
    for (Index li : plan.local[r]) plan.indices.push_back(model.region_ranges[r].begin + li);
  }
  std::sort(plan.indices.begin(), plan.indices.end());
  plan.population = model.size();
}

}  // namespace

SamplePlan build_plan(const CavityModel& model, const RegionSparsity& s,
                      const RegionCounts& overrides, std::uint64_t seed) {
  SamplePlan plan;
  plan.seed = seed;
  for (int r = 0; r < kRegionCount; ++r) {
    const Index n = model.region_ranges[r].size();
    const Index m = sample_count(s[r], n, overrides[r]);
    if (m > n) {
      std::ostringstream msg;
      msg << region_name(static_cast<Region>(r)) << ": " << m << " samples requested from " << n
          << " elements";
      throw ConfigError(msg.str());
    }
    plan.local[r] = lhs_indices(n, m, region_seed(seed, r));
  }
  finalize(plan, model);
  return plan;
}

SamplePlan full_plan(const CavityModel& model) {
  SamplePlan plan;
  for (int r = 0; r < kRegionCount; ++r) {
    const Index n = model.region_ranges[r].size();
    plan.local[r].resize(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) plan.local[r][static_cast<std::size_t>(i)] = i;
  }
  finalize(plan, model);
  return plan;
}

void write_plan_csv(std::ostream& os, const SamplePlan& plan, const CavityModel& model) {
  os << "region,local,global\n";
  for (int r = 0; r < kRegionCount; ++r) {
    for (Index li : plan.local[r]) {
      os << region_name(static_cast<Region>(r)) << ',' << li << ','
         << model.region_ranges[r].begin + li << '\n';
    }
  }
}

SamplePlan read_plan_csv(std::istream& is, const CavityModel& model) {
  SamplePlan plan;
  std::string line;
  if (!std::getline(is, line)) throw ConfigError("empty sample plan");
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string region, local, global;
    if (!std::getline(ss, region, ',') || !std::getline(ss, local, ',') ||
        !std::getline(ss, global, ',')) {
      throw ConfigError("malformed sample plan row: " + line);
    }
    int r = -1;
    for (int q = 0; q < kRegionCount; ++q) {
      if (region == region_name(static_cast<Region>(q))) r = q;
    }
    if (r < 0) throw ConfigError("unknown region in sample plan: " + region);
    const Index li = std::stoll(local);
    const Index gi = std::stoll(global);
    if (li < 0 || li >= model.region_ranges[r].size() ||
        gi != model.region_ranges[r].begin + li) {
      throw ConfigError("sample plan row inconsistent with model: " + line);
    }
    plan.local[r].push_back(li);
  }
  for (auto& l : plan.local) {
    std::sort(l.begin(), l.end());
    if (std::adjacent_find(l.begin(), l.end()) != l.end()) {
      throw ConfigError("duplicate index in sample plan");
    }
  }
  finalize(plan, model);
  return plan;
}

}  // namespace radsym
