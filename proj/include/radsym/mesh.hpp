#pragma once

#include "radsym/core.hpp"

#include <array>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace radsym {

enum class SurfaceKind : int { Sphere = 0, Disk = 1, Cylinder = 2 };

/// Parameter-space cell of an element. Physical parameters: (θ, φ) on a
/// sphere, (ρ, φ) on a disk, (z, φ) on a cylinder.
struct PatchBounds {
  double a0 = 0, a1 = 0;
  double b0 = 0, b1 = 0;
};

/// Analytic surface carrying an element; used to place sub-centroids.
struct SurfaceShape {
  SurfaceKind kind = SurfaceKind::Sphere;
  double radius = 0;       // sphere / cylinder radius
  double height = 0;       // disk plane z
  double normal_sign = 1;  // +1: sphere outward, disk +z, cylinder outward
};

struct SurfaceElement {
  Vec3 centroid = Vec3::Zero();
  Vec3 normal = Vec3::UnitZ();
  double area = 0;
  Region region = Region::Capsule;
  // Region-intrinsic coordinates: (θ, φ) on the capsule, (r/R, φ) on the end
  // faces, (z/h, φ) on the wall.
  double u = 0;
  double v = 0;
  PatchBounds cell;
  SurfaceShape shape;
  double diameter = 0;  // longest corner-to-corner chord of the cell
};

struct SurfacePoint {
  Vec3 position;
  Vec3 normal;
  double area;
};

SurfacePoint surface_point(const SurfaceShape& shape, double a, double b);
double patch_area(const SurfaceShape& shape, const PatchBounds& cell);

/// Sub-patches of an m x m split of an element's parameter cell.
std::vector<SurfacePoint> split_cell(const SurfaceElement& e, int m);

struct MeshResolution {
  int n_theta = 0;        // capsule polar cells over [0, π]
  int n_phi_capsule = 0;  // capsule azimuthal cells over [0, 2π)
  int n_r = 0;            // end-face radial rings
  int n_phi_end = 0;      // end-face azimuthal cells
  int n_z = 0;            // wall axial rows
  int n_phi_wall = 0;     // wall azimuthal cells
};

/// Lengths are in micrometres.
struct CavityGeometry {
  double cavity_radius = 400.0;
  double cavity_half_height = 850.0;
  double capsule_radius = 120.0;
  double leh_radius = 190.0;
  MeshResolution resolution;

  void validate() const;
  double inner_ratio() const { return leh_radius / cavity_radius; }
  Index capsule_count() const;
  Index end_face_count() const;
  Index wall_count() const;
  Index element_count() const;
};

/// Number of cells of width `step` across `domain`; throws ConfigError
/// unless the step divides the domain to within 1e-9 relative.
int exact_division(double domain, double step, const std::string& what);

enum class SpotProfile { Uniform, Gaussian };

/// Laser spot on the wall, centred at azimuth `phi` (radians) and height `z`
/// (micrometres).
struct BeamSpot {
  double phi = 0;
  double z = 0;
};

/// Primary-source construction parameters plus the resulting per-element
/// flux S⁰ (filled by assemble_cavity).
struct SourceSpec {
  int beam_count = 8;
  double ring_height_fraction = 0.5;  // spot centres at z = ±fraction·h
  double spot_semi_axis_phi = 100.0;  // arc length, µm
  double spot_semi_axis_z = 200.0;    // µm
  double beam_power = 1.0e5;          // flux·µm²
  SpotProfile profile = SpotProfile::Uniform;
  std::vector<BeamSpot> spots;  // explicit pointing; default layout when empty

  Vector flux;  // S⁰, one entry per element

  std::vector<BeamSpot> resolved_spots(const CavityGeometry& g) const;
};

struct CavityModel {
  std::vector<SurfaceElement> elements;
  std::array<IndexRange, kRegionCount> region_ranges{};
  CavityGeometry geometry;
  SourceSpec source;

  Index size() const { return static_cast<Index>(elements.size()); }
  const IndexRange& range(Region r) const { return region_ranges[static_cast<int>(r)]; }
  std::span<const SurfaceElement> region_elements(Region r) const;
  Vector areas() const;
};

std::vector<SurfaceElement> build_capsule_mesh(double radius, int n_theta, int n_phi,
                                               bool inward_normals = false);
/// Δθ and Δφ in radians; must divide π and 2π respectively.
std::vector<SurfaceElement> build_capsule_mesh_by_step(double radius, double d_theta,
                                                       double d_phi);

enum class FaceSide { Top, Bottom };

std::vector<SurfaceElement> build_end_face_mesh(double outer_r, double hole_r, int n_r,
                                                int n_phi, FaceSide side, double half_height);
std::vector<SurfaceElement> build_end_face_mesh_by_step(double outer_r, double hole_r,
                                                        double d_r, double d_phi,
                                                        FaceSide side, double half_height);

std::vector<SurfaceElement> build_wall_mesh(double radius, double half_height, int n_z,
                                            int n_phi);
std::vector<SurfaceElement> build_wall_mesh_by_step(double radius, double half_height,
                                                    double d_z, double d_phi);

/// Primary source flux per element for the given beam layout. Capsule
/// entries are zero.
Vector build_source_flux(const CavityModel& model, const SourceSpec& source);

CavityModel assemble_cavity(const CavityGeometry& geometry, const SourceSpec& source);

/// CSV with columns index,region,cx,cy,cz,nx,ny,nz,area,u,v.
void write_mesh_csv(std::ostream& os, const CavityModel& model);

}  // namespace radsym
