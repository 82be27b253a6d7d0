#include <doctest.h>

#include "radsym/harness.hpp"
#include "toy.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

using namespace radsym;
using std::numbers::pi;

TEST_CASE("preset element counts") {
  CHECK(model_preset("s2-1").geometry.element_count() == 9776);
  CHECK(model_preset("s2-2").geometry.element_count() == 38952);
  CHECK(model_preset("s3-1").geometry.element_count() == 20736);
  CHECK(model_preset("S3-2").geometry.element_count() == 82944);
  CHECK_THROWS_AS(model_preset("s4-1"), ConfigError);
}

TEST_CASE("s2-1 region split") {
  const CavityModel m = assemble_cavity(model_preset("s2-1").geometry, {});
  CHECK(m.size() == 9776);
  CHECK(m.range(Region::Capsule).size() == 2592);
  CHECK(m.range(Region::EndFaceTop).size() == 2016);
  CHECK(m.range(Region::EndFaceBottom).size() == 2016);
  CHECK(m.range(Region::Wall).size() == 3152);
  CHECK(m.range(Region::Capsule).begin == 0);
  CHECK(m.range(Region::Wall).end == m.size());
  for (const auto& e : m.elements) REQUIRE(e.area > 0);
}

TEST_CASE("capsule mesh by step") {
  const auto caps = build_capsule_mesh_by_step(1.0, pi / 36, pi / 36);
  CHECK(caps.size() == 2592);
  CHECK_THROWS_AS(build_capsule_mesh_by_step(1.0, 0.07, pi / 36), ConfigError);
  CHECK(exact_division(2 * pi, pi / 36, "x") == 72);
  CHECK_THROWS_AS(exact_division(1.0, 0.3, "x"), ConfigError);
  CHECK_THROWS_AS(exact_division(1.0, -0.5, "x"), ConfigError);
}

TEST_CASE("region areas match the analytic surfaces") {
  const double R = 2.0;
  double sphere = 0;
  for (const auto& e : build_capsule_mesh(R, 90, 8)) sphere += e.area;
  // Midpoint rule in θ: error O(Δθ²).
  CHECK(sphere == doctest::Approx(4 * pi * R * R).epsilon(1e-4));

  double disk = 0;
  for (const auto& e : build_end_face_mesh(3.0, 1.0, 7, 12, FaceSide::Top, 5.0)) disk += e.area;
  CHECK(disk == doctest::Approx(pi * (9.0 - 1.0)).epsilon(1e-13));

  double wall = 0;
  for (const auto& e : build_wall_mesh(3.0, 5.0, 9, 13)) wall += e.area;
  CHECK(wall == doctest::Approx(2 * pi * 3.0 * 10.0).epsilon(1e-13));
}

TEST_CASE("normals point into the cavity") {
  const CavityModel m = assemble_cavity(model_preset("s2-1").geometry, {});
  for (const auto& e : m.region_elements(Region::Capsule)) {
    REQUIRE(e.normal.dot(e.centroid) > 0);
    REQUIRE(e.normal.norm() == doctest::Approx(1.0));
  }
  for (const auto& e : m.region_elements(Region::EndFaceTop)) {
    REQUIRE(e.normal.z() == -1.0);
    REQUIRE(e.centroid.z() == doctest::Approx(850.0));
  }
  for (const auto& e : m.region_elements(Region::EndFaceBottom)) REQUIRE(e.normal.z() == 1.0);
  for (const auto& e : m.region_elements(Region::Wall)) {
    const Vec3 radial(e.centroid.x(), e.centroid.y(), 0);
    REQUIRE(e.normal.dot(radial) < 0);
    REQUIRE(e.u >= -1.0);
    REQUIRE(e.u <= 1.0);
  }
}

TEST_CASE("end face rejects a hole at least as large as the disk") {
  CHECK_THROWS_AS(build_end_face_mesh(1.0, 1.0, 3, 8, FaceSide::Top, 1.0), ConfigError);
  CavityGeometry g;
  g.resolution = {4, 8, 3, 8, 10, 12};
  g.leh_radius = 500;
  CHECK_THROWS_AS(g.validate(), ConfigError);
  g.leh_radius = 190;
  g.resolution.n_z = 0;
  CHECK_THROWS_AS(g.validate(), ConfigError);
}

TEST_CASE("source deposits the configured beam power") {
  const ModelPreset p = test::toy_preset();
  const CavityModel m = assemble_cavity(p.geometry, p.source);
  const Vector& S = m.source.flux;
  REQUIRE(S.size() == m.size());
  double power = 0;
  for (Index i = 0; i < m.size(); ++i) power += S[i] * m.elements[static_cast<std::size_t>(i)].area;
  CHECK(power == doctest::Approx(p.source.beam_count * p.source.beam_power).epsilon(1e-12));
  CHECK(S.head(m.range(Region::Wall).begin).cwiseAbs().maxCoeff() == 0.0);

  SourceSpec tiny = p.source;
  tiny.spot_semi_axis_phi = 1e-3;
  tiny.spot_semi_axis_z = 1e-3;
  CHECK_THROWS_AS(assemble_cavity(p.geometry, tiny), ConfigError);
}

TEST_CASE("gaussian source also conserves power") {
  ModelPreset p = test::toy_preset();
  p.source.profile = SpotProfile::Gaussian;
  const CavityModel m = assemble_cavity(p.geometry, p.source);
  CHECK(m.areas().dot(m.source.flux) ==
        doctest::Approx(p.source.beam_count * p.source.beam_power).epsilon(1e-12));
}

TEST_CASE("mesh csv layout") {
  const ModelPreset p = test::toy_preset();
  const CavityModel m = assemble_cavity(p.geometry, p.source);
  std::ostringstream os;
  write_mesh_csv(os, m);
  std::istringstream is(os.str());
  std::string line;
  std::getline(is, line);
  CHECK(line == "index,region,cx,cy,cz,nx,ny,nz,area,u,v");
  int rows = 0;
  while (std::getline(is, line)) ++rows;
  CHECK(rows == 200);
}
