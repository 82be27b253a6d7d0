#include <doctest.h>

#include "radsym/harness.hpp"

#include <algorithm>
#include <sstream>

using namespace radsym;

namespace {

SamplePlan preset_plan(const std::string& name, std::uint64_t seed = 1) {
  const ModelPreset p = model_preset(name);
  const CavityModel m = assemble_cavity(p.geometry, {});
  return build_plan(m, p.sparsity, p.sample_overrides, seed);
}

}  // namespace

TEST_CASE("sample counts use base-10 logarithms") {
  CHECK(sample_count(30, 2592) == 103);
  CHECK(sample_count(30, 2592, 150) == 150);
  CHECK(sample_count(35, 2016) == 116);
  CHECK(sample_count(35, 2016, 150) == 150);
  CHECK(sample_count(100, 3152) == 350);
  CHECK(sample_count(100, 3152, 400) == 400);
  CHECK(sample_count(100, 3152, 10) == 350);
}

TEST_CASE("latin hypercube strata") {
  for (Index m : {1, 7, 50, 150, 1000}) {
    const Index n = 3000;
    const IndexList idx = lhs_indices(n, m, 99);
    REQUIRE(static_cast<Index>(idx.size()) == m);
    REQUIRE(std::is_sorted(idx.begin(), idx.end()));
    for (Index q = 0; q < m; ++q) {
      const Index lo = q * n / m, hi = (q + 1) * n / m;
      const auto in = std::count_if(idx.begin(), idx.end(), [&](Index i) { return i >= lo && i < hi; });
      REQUIRE(in == 1);
    }
  }
  const IndexList all = lhs_indices(17, 17, 5);
  for (Index i = 0; i < 17; ++i) CHECK(all[static_cast<std::size_t>(i)] == i);
  CHECK(lhs_indices(40, 9, 3) == lhs_indices(40, 9, 3));
  CHECK(lhs_indices(4000, 90, 3) != lhs_indices(4000, 90, 4));
  CHECK_THROWS(lhs_indices(5, 6, 1));
}

TEST_CASE("preset plans reproduce the tabulated totals") {
  const SamplePlan s21 = preset_plan("s2-1");
  CHECK(s21.total() == 850);
  CHECK(s21.rate() == doctest::Approx(0.087).epsilon(0.01));
  CHECK(s21.counts == RegionCounts{150, 150, 150, 400});

  const SamplePlan s22 = preset_plan("s2-2");
  CHECK(s22.total() == 900);
  const SamplePlan s31 = preset_plan("s3-1");
  CHECK(s31.total() == 800);
  const SamplePlan s32 = preset_plan("s3-2");
  CHECK(s32.total() == 950);
  CHECK(s32.rate() == doctest::Approx(0.011).epsilon(0.05));

  CHECK(s21.rate() > s31.rate());
  CHECK(s31.rate() > s22.rate());
  CHECK(s22.rate() > s32.rate());
}

TEST_CASE("plans are deterministic and region-consistent") {
  const ModelPreset p = model_preset("s2-1");
  const CavityModel m = assemble_cavity(p.geometry, {});
  const SamplePlan a = build_plan(m, p.sparsity, p.sample_overrides, 11);
  const SamplePlan b = build_plan(m, p.sparsity, p.sample_overrides, 11);
  const SamplePlan c = build_plan(m, p.sparsity, p.sample_overrides, 12);
  CHECK(a.indices == b.indices);
  CHECK(a.indices != c.indices);
  CHECK(std::adjacent_find(a.indices.begin(), a.indices.end()) == a.indices.end());
  for (int r = 0; r < kRegionCount; ++r) {
    const IndexRange rg = m.region_ranges[r];
    for (Index l : a.local[r]) {
      REQUIRE(l < rg.size());
      REQUIRE(std::binary_search(a.indices.begin(), a.indices.end(), rg.begin + l));
    }
  }
  const SamplePlan f = full_plan(m);
  CHECK(f.total() == m.size());
  CHECK(f.rate() == 1.0);
}

TEST_CASE("plan csv round trip") {
  const ModelPreset p = model_preset("s2-1");
  const CavityModel m = assemble_cavity(p.geometry, {});
  const SamplePlan a = build_plan(m, p.sparsity, p.sample_overrides, 4);
  std::stringstream ss;
  write_plan_csv(ss, a, m);
  const SamplePlan b = read_plan_csv(ss, m);
  CHECK(b.indices == a.indices);
  CHECK(b.counts == a.counts);

  std::stringstream bad("region,local,global\ncapsule,0,5\n");
  CHECK_THROWS(read_plan_csv(bad, m));
}
