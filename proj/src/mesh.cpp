#include "radsym/mesh.hpp"

#include <cmath>
#include <numbers>
#include <ostream>
#include <sstream>

namespace radsym {

namespace {

constexpr double kPi = std::numbers::pi;

double wrap_angle(double a) {
  a = std::fmod(a + kPi, 2 * kPi);
  if (a < 0) a += 2 * kPi;
  return a - kPi;
}

double cell_diameter(const SurfaceShape& shape, const PatchBounds& c) {
  const Vec3 p00 = surface_point(shape, c.a0, c.b0).position;
  const Vec3 p11 = surface_point(shape, c.a1, c.b1).position;
  const Vec3 p01 = surface_point(shape, c.a0, c.b1).position;
  const Vec3 p10 = surface_point(shape, c.a1, c.b0).position;
  return std::max((p11 - p00).norm(), (p10 - p01).norm());
}

SurfaceElement make_element(const SurfaceShape& shape, const PatchBounds& cell, Region region,
                            double u, double v) {
  SurfaceElement e;
  const SurfacePoint sp =
      surface_point(shape, 0.5 * (cell.a0 + cell.a1), 0.5 * (cell.b0 + cell.b1));
  e.centroid = sp.position;
  e.normal = sp.normal;
  e.area = patch_area(shape, cell);
  e.region = region;
  e.u = u;
  e.v = v;
  e.cell = cell;
  e.shape = shape;
  e.diameter = cell_diameter(shape, cell);
  return e;
}

void require_positive(int n, const char* what) {
  if (n <= 0) {
    std::ostringstream msg;
    msg << what << " must be positive, got " << n;
    throw ConfigError(msg.str());
  }
}

}  // namespace

SurfacePoint surface_point(const SurfaceShape& shape, double a, double b) {
  SurfacePoint sp;
  sp.area = 0;
  switch (shape.kind) {
    case SurfaceKind::Sphere: {
      const Vec3 dir(std::sin(a) * std::cos(b), std::sin(a) * std::sin(b), std::cos(a));
      sp.position = shape.radius * dir;
      sp.normal = shape.normal_sign * dir;
      break;
    }
    case SurfaceKind::Disk:
      sp.position = Vec3(a * std::cos(b), a * std::sin(b), shape.height);
      sp.normal = Vec3(0, 0, shape.normal_sign);
      break;
    case SurfaceKind::Cylinder: {
      const Vec3 radial(std::cos(b), std::sin(b), 0);
      sp.position = Vec3(shape.radius * radial.x(), shape.radius * radial.y(), a);
      sp.normal = shape.normal_sign * radial;
      break;
    }
  }
  return sp;
}

double patch_area(const SurfaceShape& shape, const PatchBounds& c) {
  const double db = c.b1 - c.b0;
  switch (shape.kind) {
    case SurfaceKind::Sphere:
      // Midpoint rule in θ: R² sinθ_c Δθ Δφ.
      return shape.radius * shape.radius * std::sin(0.5 * (c.a0 + c.a1)) * (c.a1 - c.a0) * db;
    case SurfaceKind::Disk:
      return 0.5 * (c.a1 * c.a1 - c.a0 * c.a0) * db;
    case SurfaceKind::Cylinder:
      return shape.radius * (c.a1 - c.a0) * db;
  }
  return 0;
}

std::vector<SurfacePoint> split_cell(const SurfaceElement& e, int m) {
  if (m < 1) throw ConfigError("split count must be positive");
  std::vector<SurfacePoint> out;
  out.reserve(static_cast<std::size_t>(m * m));
  const double da = (e.cell.a1 - e.cell.a0) / m;
  const double db = (e.cell.b1 - e.cell.b0) / m;
  for (int p = 0; p < m; ++p) {
    for (int q = 0; q < m; ++q) {
      const PatchBounds c{e.cell.a0 + p * da, e.cell.a0 + (p + 1) * da, e.cell.b0 + q * db,
                          e.cell.b0 + (q + 1) * db};
      SurfacePoint s = surface_point(e.shape, 0.5 * (c.a0 + c.a1), 0.5 * (c.b0 + c.b1));
      s.area = patch_area(e.shape, c);
      out.push_back(s);
    }
  }
  return out;
}

int exact_division(double domain, double step, const std::string& what) {
  if (!(step > 0) || !(domain > 0)) {
    throw ConfigError(what + ": resolution and domain must be strictly positive");
  }
  const double ratio = domain / step;
  const double n = std::round(ratio);
  if (n < 1 || std::abs(ratio - n) > 1e-9 * std::max(1.0, ratio)) {
    std::ostringstream msg;
    msg << what << ": step " << step << " does not evenly divide " << domain << " (ratio "
        << ratio << ")";
    throw ConfigError(msg.str());
  }
  return static_cast<int>(n);
}

void CavityGeometry::validate() const {
  if (!(capsule_radius > 0 && capsule_radius < cavity_radius)) {
    throw ConfigError("capsule_radius must satisfy 0 < capsule_radius < cavity_radius");
  }
  if (!(leh_radius > 0 && leh_radius < cavity_radius)) {
    throw ConfigError("leh_radius must satisfy 0 < leh_radius < cavity_radius");
  }
  if (!(cavity_half_height > capsule_radius)) {
    throw ConfigError("cavity_half_height must exceed capsule_radius");
  }
  const MeshResolution& r = resolution;
  require_positive(r.n_theta, "n_theta");
  require_positive(r.n_phi_capsule, "n_phi_capsule");
  require_positive(r.n_r, "n_r");
  require_positive(r.n_phi_end, "n_phi_end");
  require_positive(r.n_z, "n_z");
  require_positive(r.n_phi_wall, "n_phi_wall");
}

Index CavityGeometry::capsule_count() const {
  return Index(resolution.n_theta) * resolution.n_phi_capsule;
}
Index CavityGeometry::end_face_count() const {
  return Index(resolution.n_r) * resolution.n_phi_end;
}
Index CavityGeometry::wall_count() const { return Index(resolution.n_z) * resolution.n_phi_wall; }
Index CavityGeometry::element_count() const {
  return capsule_count() + 2 * end_face_count() + wall_count();
}

std::span<const SurfaceElement> CavityModel::region_elements(Region r) const {
  const IndexRange& rr = range(r);
  return std::span<const SurfaceElement>(elements).subspan(static_cast<std::size_t>(rr.begin),
                                                           static_cast<std::size_t>(rr.size()));
}

Vector CavityModel::areas() const {
  Vector a(size());
  for (Index i = 0; i < size(); ++i) a[i] = elements[static_cast<std::size_t>(i)].area;
  return a;
}

std::vector<SurfaceElement> build_capsule_mesh(double radius, int n_theta, int n_phi,
                                               bool inward_normals) {
  if (!(radius > 0)) throw ConfigError("capsule radius must be positive");
  require_positive(n_theta, "n_theta");
  require_positive(n_phi, "n_phi");
  const SurfaceShape shape{SurfaceKind::Sphere, radius, 0.0, inward_normals ? -1.0 : 1.0};
  const double dt = kPi / n_theta;
  const double dp = 2 * kPi / n_phi;
  std::vector<SurfaceElement> out;
  out.reserve(static_cast<std::size_t>(n_theta) * n_phi);
  for (int i = 0; i < n_theta; ++i) {
    for (int j = 0; j < n_phi; ++j) {
      const PatchBounds cell{i * dt, (i + 1) * dt, j * dp, (j + 1) * dp};
      out.push_back(make_element(shape, cell, Region::Capsule, (i + 0.5) * dt, (j + 0.5) * dp));
    }
  }
  return out;
}

std::vector<SurfaceElement> build_capsule_mesh_by_step(double radius, double d_theta,
                                                       double d_phi) {
  return build_capsule_mesh(radius, exact_division(kPi, d_theta, "capsule d_theta"),
                            exact_division(2 * kPi, d_phi, "capsule d_phi"));
}

std::vector<SurfaceElement> build_end_face_mesh(double outer_r, double hole_r, int n_r,
                                                int n_phi, FaceSide side, double half_height) {
  if (!(hole_r >= 0 && hole_r < outer_r)) {
    throw ConfigError("end face requires 0 <= hole_r < outer_r");
  }
  require_positive(n_r, "n_r");
  require_positive(n_phi, "n_phi_end");
  const bool top = side == FaceSide::Top;
  // Normals face the cavity interior: down on the top face, up on the bottom.
  const SurfaceShape shape{SurfaceKind::Disk, 0.0, top ? half_height : -half_height,
                           top ? -1.0 : 1.0};
  const Region region = top ? Region::EndFaceTop : Region::EndFaceBottom;
  const double dr = (outer_r - hole_r) / n_r;
  const double dp = 2 * kPi / n_phi;
  std::vector<SurfaceElement> out;
  out.reserve(static_cast<std::size_t>(n_r) * n_phi);
  for (int i = 0; i < n_r; ++i) {
    const double r0 = hole_r + i * dr;
    const double r1 = (i + 1 == n_r) ? outer_r : hole_r + (i + 1) * dr;
    for (int j = 0; j < n_phi; ++j) {
      const PatchBounds cell{r0, r1, j * dp, (j + 1) * dp};
      out.push_back(
          make_element(shape, cell, region, 0.5 * (r0 + r1) / outer_r, (j + 0.5) * dp));
    }
  }
  return out;
}

std::vector<SurfaceElement> build_end_face_mesh_by_step(double outer_r, double hole_r,
                                                        double d_r, double d_phi,
                                                        FaceSide side, double half_height) {
  if (!(hole_r >= 0 && hole_r < outer_r)) {
    throw ConfigError("end face requires 0 <= hole_r < outer_r");
  }
  return build_end_face_mesh(outer_r, hole_r, exact_division(outer_r - hole_r, d_r, "end d_r"),
                             exact_division(2 * kPi, d_phi, "end d_phi"), side, half_height);
}

std::vector<SurfaceElement> build_wall_mesh(double radius, double half_height, int n_z,
                                            int n_phi) {
  if (!(radius > 0 && half_height > 0)) throw ConfigError("wall dimensions must be positive");
  require_positive(n_z, "n_z");
  require_positive(n_phi, "n_phi_wall");
  const SurfaceShape shape{SurfaceKind::Cylinder, radius, 0.0, -1.0};
  const double dz = 2 * half_height / n_z;
  const double dp = 2 * kPi / n_phi;
  std::vector<SurfaceElement> out;
  out.reserve(static_cast<std::size_t>(n_z) * n_phi);
  for (int i = 0; i < n_z; ++i) {
    const double z0 = -half_height + i * dz;
    const double z1 = (i + 1 == n_z) ? half_height : -half_height + (i + 1) * dz;
    for (int j = 0; j < n_phi; ++j) {
      const PatchBounds cell{z0, z1, j * dp, (j + 1) * dp};
      out.push_back(make_element(shape, cell, Region::Wall, 0.5 * (z0 + z1) / half_height,
                                 (j + 0.5) * dp));
    }
  }
  return out;
}

std::vector<SurfaceElement> build_wall_mesh_by_step(double radius, double half_height,
                                                    double d_z, double d_phi) {
  return build_wall_mesh(radius, half_height, exact_division(2 * half_height, d_z, "wall d_z"),
                         exact_division(2 * kPi, d_phi, "wall d_phi"));
}

std::vector<BeamSpot> SourceSpec::resolved_spots(const CavityGeometry& g) const {
  if (!spots.empty()) return spots;
  if (beam_count <= 0 || beam_count % 2 != 0) {
    throw ConfigError("beam_count must be a positive even number (half per entrance hole)");
  }
  // Half the beams per entrance hole; the lower ring is rotated by half a
  // beam spacing.
  const int per_side = beam_count / 2;
  const double spacing = 2 * kPi / per_side;
  const double z = ring_height_fraction * g.cavity_half_height;
  std::vector<BeamSpot> out;
  out.reserve(static_cast<std::size_t>(beam_count));
  for (int b = 0; b < per_side; ++b) out.push_back({b * spacing, z});
  for (int b = 0; b < per_side; ++b) out.push_back({(b + 0.5) * spacing, -z});
  return out;
}

Vector build_source_flux(const CavityModel& model, const SourceSpec& source) {
  if (!(source.spot_semi_axis_phi > 0 && source.spot_semi_axis_z > 0)) {
    throw ConfigError("spot semi-axes must be positive");
  }
  if (!(source.beam_power >= 0)) throw ConfigError("beam_power must be non-negative");
  const CavityGeometry& g = model.geometry;
  Vector flux = Vector::Zero(model.size());
  const IndexRange wall = model.range(Region::Wall);
  for (const BeamSpot& spot : source.resolved_spots(g)) {
    Vector weight = Vector::Zero(wall.size());
    double weighted_area = 0;
    for (Index k = 0; k < wall.size(); ++k) {
      const SurfaceElement& e = model.elements[static_cast<std::size_t>(wall.begin + k)];
      const double phi = std::atan2(e.centroid.y(), e.centroid.x());
      const double s = g.cavity_radius * wrap_angle(phi - spot.phi) / source.spot_semi_axis_phi;
      const double t = (e.centroid.z() - spot.z) / source.spot_semi_axis_z;
      const double q = s * s + t * t;
      double w = 0;
      if (source.profile == SpotProfile::Uniform) {
        w = q <= 1.0 ? 1.0 : 0.0;
      } else {
        w = std::exp(-2.0 * q);  // semi-axes are 1/e² radii
      }
      weight[k] = w;
      weighted_area += w * e.area;
    }
    if (!(weighted_area > 0)) {
      throw ConfigError("laser spot covers no wall element; enlarge the spot or refine the wall");
    }
    flux.segment(wall.begin, wall.size()) += (source.beam_power / weighted_area) * weight;
  }
  return flux;
}

CavityModel assemble_cavity(const CavityGeometry& geometry, const SourceSpec& source) {
  geometry.validate();
  const MeshResolution& r = geometry.resolution;
  CavityModel model;
  model.geometry = geometry;
  model.source = source;

  auto append = [&](std::vector<SurfaceElement> part, Region region) {
    IndexRange& range = model.region_ranges[static_cast<int>(region)];
    range.begin = model.size();
    model.elements.insert(model.elements.end(), part.begin(), part.end());
    range.end = model.size();
  };
  model.elements.reserve(static_cast<std::size_t>(geometry.element_count()));
  append(build_capsule_mesh(geometry.capsule_radius, r.n_theta, r.n_phi_capsule),
         Region::Capsule);
  append(build_end_face_mesh(geometry.cavity_radius, geometry.leh_radius, r.n_r, r.n_phi_end,
                             FaceSide::Top, geometry.cavity_half_height),
         Region::EndFaceTop);
  append(build_end_face_mesh(geometry.cavity_radius, geometry.leh_radius, r.n_r, r.n_phi_end,
                             FaceSide::Bottom, geometry.cavity_half_height),
         Region::EndFaceBottom);
  append(build_wall_mesh(geometry.cavity_radius, geometry.cavity_half_height, r.n_z,
                         r.n_phi_wall),
         Region::Wall);

  model.source.flux = build_source_flux(model, source);
  return model;
}

void write_mesh_csv(std::ostream& os, const CavityModel& model) {
  os << "index,region,cx,cy,cz,nx,ny,nz,area,u,v\n";
  os.precision(17);
  for (Index i = 0; i < model.size(); ++i) {
    const SurfaceElement& e = model.elements[static_cast<std::size_t>(i)];
    os << i << ',' << region_name(e.region) << ',' << e.centroid.x() << ',' << e.centroid.y()
       << ',' << e.centroid.z() << ',' << e.normal.x() << ',' << e.normal.y() << ','
       << e.normal.z() << ',' << e.area << ',' << e.u << ',' << e.v << '\n';
  }
}

}  // namespace radsym
