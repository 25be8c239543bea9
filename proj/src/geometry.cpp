#include "topowave/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

namespace topowave::geometry {

namespace {

constexpr double kThird = 1.0 / 3.0;

double wrap_angle(double a) {
  while (a < 0) a += 2 * kPi;
  while (a >= 2 * kPi) a -= 2 * kPi;
  return a;
}

}  // namespace

std::string region_name(Region r) {
  switch (r) {
    case Region::pristine: return "pristine";
    case Region::expanded: return "expanded";
    case Region::shrunk: return "shrunk";
  }
  return "?";
}

Region region_from_name(const std::string& name) {
  if (name == "pristine") return Region::pristine;
  if (name == "expanded") return Region::expanded;
  if (name == "shrunk") return Region::shrunk;
  throw ConfigError("unknown region: " + name);
}

std::string orientation_name(TriangleOrientation o) {
  switch (o) {
    case TriangleOrientation::inward: return "inward";
    case TriangleOrientation::outward: return "outward";
    case TriangleOrientation::tangential: return "tangential";
  }
  return "?";
}

TriangleOrientation orientation_from_name(const std::string& name) {
  if (name == "inward") return TriangleOrientation::inward;
  if (name == "outward") return TriangleOrientation::outward;
  if (name == "tangential") return TriangleOrientation::tangential;
  throw ConfigError("unknown triangle orientation: " + name);
}

double LatticeSpec::radius_nm(Region r) const {
  switch (r) {
    case Region::pristine: return r_pristine_nm > 0 ? r_pristine_nm : a0_nm * kThird;
    case Region::expanded: return r_expanded_nm > 0 ? r_expanded_nm : 1.05 * a0_nm * kThird;
    case Region::shrunk: return r_shrunk_nm > 0 ? r_shrunk_nm : 0.94 * a0_nm * kThird;
  }
  return 0.0;
}

void LatticeSpec::validate() const {
  if (a0_nm <= 0) throw GeometryError("a0 must be positive");
  if (s_nm <= 0) throw GeometryError("triangle edge s must be positive");
  if (n_hole < 1.0) throw GeometryError("n_hole must be >= 1");
  if (n_eff <= n_hole) throw GeometryError("n_eff must exceed n_hole");
  for (Region r : {Region::pristine, Region::expanded, Region::shrunk}) {
    const double rr = radius_nm(r);
    if (rr <= 0 || rr >= 0.5 * a0_nm) {
      throw GeometryError("R for region " + region_name(r) + " outside (0, a0/2): " +
                          std::to_string(rr));
    }
  }
}

bool Triangle::contains(Vec2 p) const {
  const double d0 = (v[1] - v[0]).cross(p - v[0]);
  const double d1 = (v[2] - v[1]).cross(p - v[1]);
  const double d2 = (v[0] - v[2]).cross(p - v[2]);
  const bool has_neg = (d0 < 0) || (d1 < 0) || (d2 < 0);
  const bool has_pos = (d0 > 0) || (d1 > 0) || (d2 > 0);
  return !(has_neg && has_pos);
}

Triangle triangle_shape(const TrianglePlacement& placement, double s_nm) {
  const double rv = s_nm / kSqrt3;  // centroid-to-vertex distance
  Triangle t;
  for (int k = 0; k < 3; ++k) {
    const double a = placement.apex_angle_rad + k * 2.0 * kPi / 3.0;
    t.v[k] = placement.centroid_nm + rv * unit_at_angle(a);
  }
  return t;
}

// separating-axis test for two convex triangles
bool triangles_overlap(const Triangle& a, const Triangle& b) {
  const Triangle* tris[2] = {&a, &b};
  for (const Triangle* t : tris) {
    for (int e = 0; e < 3; ++e) {
      const Vec2 edge = t->v[(e + 1) % 3] - t->v[e];
      const Vec2 axis{-edge.y, edge.x};
      double amin = 1e300, amax = -1e300, bmin = 1e300, bmax = -1e300;
      for (int k = 0; k < 3; ++k) {
        amin = std::min(amin, axis.dot(a.v[k]));
        amax = std::max(amax, axis.dot(a.v[k]));
        bmin = std::min(bmin, axis.dot(b.v[k]));
        bmax = std::max(bmax, axis.dot(b.v[k]));
      }
      if (amax <= bmin || bmax <= amin) return false;  // separated (touching is not overlap)
    }
  }
  return true;
}

std::vector<TrianglePlacement> build_unit_cell(const LatticeSpec& spec, Region region) {
  spec.validate();
  const double R = spec.radius_nm(region);

  std::vector<TrianglePlacement> out;
  out.reserve(6);
  for (int j = 0; j < 6; ++j) {
    const double pos_angle = j * kPi / 3.0;
    double apex = pos_angle;
    switch (spec.orientation) {
      case TriangleOrientation::inward: apex = pos_angle + kPi; break;
      case TriangleOrientation::outward: apex = pos_angle; break;
      case TriangleOrientation::tangential: apex = pos_angle + 0.5 * kPi; break;
    }
    out.push_back({R * unit_at_angle(pos_angle), wrap_angle(apex)});
  }

  for (size_t i = 0; i < out.size(); ++i) {
    const Triangle ti = triangle_shape(out[i], spec.s_nm);
    for (size_t j = i + 1; j < out.size(); ++j) {
      if (triangles_overlap(ti, triangle_shape(out[j], spec.s_nm))) {
        throw GeometryError("unit cell triangles overlap for region " + region_name(region) +
                            " (s=" + std::to_string(spec.s_nm) + " nm, R=" + std::to_string(R) +
                            " nm, orientation=" + orientation_name(spec.orientation) + ")");
      }
    }
  }
  return out;
}

Vec2 lattice_a1(const LatticeSpec& spec) { return {spec.a0_nm, 0.0}; }
Vec2 lattice_a2(const LatticeSpec& spec) { return {0.5 * spec.a0_nm, 0.5 * kSqrt3 * spec.a0_nm}; }

Region DeviceLayout::region_of(int i, int j) const {
  Region r = bulk_region;
  switch (kind) {
    case LayoutKind::uniform:
    case LayoutKind::bulk:
      r = bulk_region;
      break;
    case LayoutKind::straight:
      r = (j < 0) ? Region::expanded : Region::shrunk;
      break;
    case LayoutKind::bend60:
      r = (j >= 0 && i <= 0) ? Region::shrunk : Region::expanded;
      break;
  }
  if (swap_regions) {
    if (r == Region::expanded) r = Region::shrunk;
    else if (r == Region::shrunk) r = Region::expanded;
  }
  return r;
}

DeviceLayout bulk_layout(Region region, int nx, int ny) {
  DeviceLayout d;
  d.kind = LayoutKind::bulk;
  d.bulk_region = region;
  d.i_lo = -nx / 2;
  d.i_hi = d.i_lo + nx - 1;
  d.j_lo = -ny / 2;
  d.j_hi = d.j_lo + ny - 1;
  return d;
}

DeviceLayout uniform_layout() {
  DeviceLayout d;
  d.kind = LayoutKind::uniform;
  d.i_lo = -2;
  d.i_hi = 2;
  d.j_lo = -2;
  d.j_hi = 2;
  return d;
}

DeviceLayout build_interface_layout(LayoutKind kind, int arm_length, int width) {
  if (kind != LayoutKind::straight && kind != LayoutKind::bend60) {
    throw GeometryError("layout kind has no interface");
  }
  if (arm_length < 8 || width < 8) {
    throw GeometryError("interface layout needs arm_length >= 8 and width >= 8, got " +
                        std::to_string(arm_length) + ", " + std::to_string(width));
  }
  DeviceLayout d;
  d.kind = kind;
  d.arm_length = arm_length;
  d.width = width;
  if (kind == LayoutKind::straight) {
    d.i_lo = -arm_length / 2;
    d.i_hi = d.i_lo + arm_length - 1;
    d.j_lo = -width;
    d.j_hi = width - 1;
  } else {
    // arm A along a1 for i in [-arm_length, 0]; arm B along a2 for j in [0, arm_length]
    d.i_lo = -arm_length - width;
    d.i_hi = width;
    d.j_lo = -width;
    d.j_hi = arm_length + width;
  }
  return d;
}

std::vector<CellPair> interface_pairs(const DeviceLayout& layout) {
  // six-neighborhood of the triangular lattice; record each pair once
  static constexpr int kNbr[3][2] = {{1, 0}, {0, 1}, {1, -1}};
  std::vector<CellPair> pairs;
  for (int j = layout.j_lo; j <= layout.j_hi; ++j) {
    for (int i = layout.i_lo; i <= layout.i_hi; ++i) {
      const Region r0 = layout.region_of(i, j);
      for (const auto& d : kNbr) {
        const int i2 = i + d[0], j2 = j + d[1];
        if (i2 < layout.i_lo || i2 > layout.i_hi || j2 < layout.j_lo || j2 > layout.j_hi) continue;
        if (layout.region_of(i2, j2) != r0) pairs.push_back({i, j, i2, j2});
      }
    }
  }
  return pairs;
}

EpsilonSampler::EpsilonSampler(const DeviceLayout& layout, const LatticeSpec& spec)
    : layout_(layout), spec_(spec), inv_a0_(1.0 / spec.a0_nm) {
  spec.validate();
  for (Region r : {Region::pristine, Region::expanded, Region::shrunk}) {
    const auto placements = build_unit_cell(spec, r);
    auto& tris = cell_triangles_[static_cast<int>(r)];
    tris.reserve(placements.size());
    for (const auto& p : placements) tris.push_back(triangle_shape(p, spec.s_nm));
  }
}

bool EpsilonSampler::in_hole(Vec2 p_nm) const {
  if (layout_.kind == LayoutKind::uniform) return false;
  // fractional lattice coordinates: p = u*a1 + v*a2
  const double v = p_nm.y * 2.0 / (kSqrt3 * spec_.a0_nm);
  const double u = p_nm.x * inv_a0_ - 0.5 * v;
  const int iu = static_cast<int>(std::floor(u));
  const int iv = static_cast<int>(std::floor(v));
  // triangles reach at most R + s/sqrt3 < a0 from their cell center
  for (int dj = -1; dj <= 2; ++dj) {
    for (int di = -1; di <= 2; ++di) {
      const int ci = iu + di, cj = iv + dj;
      const Vec2 center = static_cast<double>(ci) * lattice_a1(spec_) +
                          static_cast<double>(cj) * lattice_a2(spec_);
      const Vec2 local = p_nm - center;
      if (local.norm() > spec_.a0_nm) continue;
      const auto& tris = cell_triangles_[static_cast<int>(layout_.region_of(ci, cj))];
      for (const auto& t : tris) {
        if (t.contains(local)) return true;
      }
    }
  }
  return false;
}

double EpsilonSampler::at(Vec2 p_nm) const {
  return in_hole(p_nm) ? spec_.eps_hole() : spec_.eps_background();
}

double EpsilonSampler::averaged(Vec2 center_nm, double box_nm, int supersamples) const {
  const int n = std::max(1, supersamples);
  // cheap uniformity probe at corners and center
  const double h = 0.5 * box_nm;
  const bool c0 = in_hole({center_nm.x - h, center_nm.y - h});
  const bool c1 = in_hole({center_nm.x + h, center_nm.y - h});
  const bool c2 = in_hole({center_nm.x - h, center_nm.y + h});
  const bool c3 = in_hole({center_nm.x + h, center_nm.y + h});
  const bool cc = in_hole(center_nm);
  if (c0 == c1 && c1 == c2 && c2 == c3 && c3 == cc) {
    return cc ? spec_.eps_hole() : spec_.eps_background();
  }
  int inside = 0;
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      const Vec2 p{center_nm.x + ((i + 0.5) / n - 0.5) * box_nm,
                   center_nm.y + ((j + 0.5) / n - 0.5) * box_nm};
      if (in_hole(p)) ++inside;
    }
  }
  const double f = static_cast<double>(inside) / (n * n);
  return f * spec_.eps_hole() + (1.0 - f) * spec_.eps_background();
}

double PermittivityMap::fill_fraction() const {
  if (eps.empty()) return 0.0;
  double emin = 1e300, emax = -1e300;
  for (double e : eps) {
    emin = std::min(emin, e);
    emax = std::max(emax, e);
  }
  if (emax - emin < 1e-12) return 0.0;
  double acc = 0.0;
  for (double e : eps) acc += (emax - e) / (emax - emin);
  return acc / static_cast<double>(eps.size());
}

PermittivityMap rasterize(const DeviceLayout& layout, const LatticeSpec& spec, int resolution) {
  if (resolution < 16) throw GeometryError("rasterize needs resolution >= 16 px/a0");
  const EpsilonSampler sampler(layout, spec);

  // bounding box of layout cells plus one cell margin
  const Vec2 a1 = lattice_a1(spec), a2 = lattice_a2(spec);
  double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
  for (int j : {layout.j_lo, layout.j_hi}) {
    for (int i : {layout.i_lo, layout.i_hi}) {
      const Vec2 c = static_cast<double>(i) * a1 + static_cast<double>(j) * a2;
      xmin = std::min(xmin, c.x);
      xmax = std::max(xmax, c.x);
      ymin = std::min(ymin, c.y);
      ymax = std::max(ymax, c.y);
    }
  }
  xmin -= spec.a0_nm;
  xmax += spec.a0_nm;
  ymin -= spec.a0_nm;
  ymax += spec.a0_nm;

  PermittivityMap map;
  map.dx_nm = spec.a0_nm / resolution;
  map.nx = static_cast<int>(std::ceil((xmax - xmin) / map.dx_nm));
  map.ny = static_cast<int>(std::ceil((ymax - ymin) / map.dx_nm));
  map.origin_nm = {xmin + 0.5 * map.dx_nm, ymin + 0.5 * map.dx_nm};
  map.eps.resize(static_cast<size_t>(map.nx) * map.ny);

  for (int j = 0; j < map.ny; ++j) {
    for (int i = 0; i < map.nx; ++i) {
      const Vec2 p{map.origin_nm.x + i * map.dx_nm, map.origin_nm.y + j * map.dx_nm};
      map.eps[static_cast<size_t>(j) * map.nx + i] = sampler.averaged(p, map.dx_nm);
    }
  }
  return map;
}

FourierBasis make_basis(Vec2 b1, Vec2 b2, double gmax) {
  FourierBasis basis;
  basis.b1 = b1;
  basis.b2 = b2;
  basis.gmax = gmax;
  const int mmax = static_cast<int>(std::ceil(gmax / b1.norm())) + 2;
  const int nmax = static_cast<int>(std::ceil(gmax / b2.norm())) + 2;
  for (int m = -mmax; m <= mmax; ++m) {
    for (int n = -nmax; n <= nmax; ++n) {
      const Vec2 g = static_cast<double>(m) * b1 + static_cast<double>(n) * b2;
      if (g.dot(g) <= gmax * gmax + 1e-12) {
        basis.mn.push_back({m, n});
        basis.g.push_back(g);
      }
    }
  }
  return basis;
}

FourierTable::FourierTable(int dm_max, int dn_max)
    : dm_max_(dm_max),
      dn_max_(dn_max),
      data_(static_cast<size_t>(2 * dm_max + 1) * (2 * dn_max + 1)) {}

std::complex<double>& FourierTable::at(int dm, int dn) {
  return data_[static_cast<size_t>(dm + dm_max_) * (2 * dn_max_ + 1) + (dn + dn_max_)];
}

std::complex<double> FourierTable::at(int dm, int dn) const {
  return data_[static_cast<size_t>(dm + dm_max_) * (2 * dn_max_ + 1) + (dn + dn_max_)];
}

std::complex<double> polygon_ft(std::span<const Vec2> verts, Vec2 g) {
  const Vec2 q{2 * kPi * g.x, 2 * kPi * g.y};
  const double q2 = q.dot(q);
  const size_t n = verts.size();
  if (q2 < 1e-20) {
    double area2 = 0.0;
    for (size_t i = 0; i < n; ++i) {
      area2 += verts[i].cross(verts[(i + 1) % n]);
    }
    return {0.5 * std::abs(area2), 0.0};
  }
  std::complex<double> total{0.0, 0.0};
  for (size_t i = 0; i < n; ++i) {
    const Vec2 va = verts[i];
    const Vec2 e = verts[(i + 1) % n] - va;
    const double cr = q.cross(e);
    const double x = q.dot(e);
    std::complex<double> phi;
    if (std::abs(x) < 1e-8) {
      phi = std::complex<double>(1.0 - x * x / 6.0, -0.5 * x);
    } else {
      phi = (std::exp(std::complex<double>(0.0, -x)) - 1.0) / std::complex<double>(0.0, -x);
    }
    total += cr * std::exp(std::complex<double>(0.0, -q.dot(va))) * phi;
  }
  return std::complex<double>(0.0, 1.0) * total / q2;
}

void fill_fourier_tables(const FourierBasis& basis, std::span<const Triangle> triangles_a0,
                         double cell_area_a0, double eps_bg, double eps_hole,
                         FourierTable& eps_out, FourierTable& eta_out) {
  int dm_max = 0, dn_max = 0;
  for (const auto& mn : basis.mn) {
    dm_max = std::max(dm_max, std::abs(mn[0]));
    dn_max = std::max(dn_max, std::abs(mn[1]));
  }
  dm_max *= 2;
  dn_max *= 2;
  eps_out = FourierTable(dm_max, dn_max);
  eta_out = FourierTable(dm_max, dn_max);

  const double eta_bg = 1.0 / eps_bg;
  const double eta_hole = 1.0 / eps_hole;

  for (int dm = -dm_max; dm <= dm_max; ++dm) {
    for (int dn = -dn_max; dn <= dn_max; ++dn) {
      const Vec2 g = static_cast<double>(dm) * basis.b1 + static_cast<double>(dn) * basis.b2;
      std::complex<double> hole_sum{0.0, 0.0};
      for (const auto& t : triangles_a0) {
        hole_sum += polygon_ft(std::span<const Vec2>(t.v.data(), 3), g);
      }
      hole_sum /= cell_area_a0;
      std::complex<double> e = (eps_hole - eps_bg) * hole_sum;
      std::complex<double> h = (eta_hole - eta_bg) * hole_sum;
      if (dm == 0 && dn == 0) {
        e += eps_bg;
        h += eta_bg;
      }
      eps_out.at(dm, dn) = e;
      eta_out.at(dm, dn) = h;
    }
  }
}

FourierEps fourier_epsilon(const LatticeSpec& spec, Region region, double gmax) {
  spec.validate();
  // reciprocal vectors of the triangular lattice, 2*pi/a0 units
  const Vec2 b1{1.0, -1.0 / kSqrt3};
  const Vec2 b2{0.0, 2.0 / kSqrt3};
  FourierEps out;
  out.basis = make_basis(b1, b2, gmax);
  out.a0_nm = spec.a0_nm;
  if (out.basis.size() < 100) {
    throw GeometryError("Fourier basis too small (" + std::to_string(out.basis.size()) +
                        " vectors); increase Gmax");
  }

  const auto placements = build_unit_cell(spec, region);
  std::vector<Triangle> tris;
  tris.reserve(placements.size());
  const double inv_a0 = 1.0 / spec.a0_nm;
  for (const auto& p : placements) {
    Triangle t = triangle_shape(p, spec.s_nm);
    for (auto& v : t.v) v = v * inv_a0;
    tris.push_back(t);
  }

  fill_fourier_tables(out.basis, tris, 0.5 * kSqrt3, spec.eps_background(), spec.eps_hole(),
                      out.eps_hat, out.eta_hat);
  return out;
}

namespace {
constexpr char kGridMagic[] = "TOPOWAVE-GRID";
constexpr int kGridVersion = 1;
}  // namespace

void write_grid_file(const std::string& path, const PermittivityMap& map) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << kGridMagic << " v" << kGridVersion << "\n";
  out << "nx " << map.nx << " ny " << map.ny << "\n";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", map.dx_nm);
  out << "dx_nm " << buf << "\n";
  std::snprintf(buf, sizeof buf, "%.17g %.17g", map.origin_nm.x, map.origin_nm.y);
  out << "origin_nm " << buf << "\n";
  out << "data float64 row-major\n";
  out.write(reinterpret_cast<const char*>(map.eps.data()),
            static_cast<std::streamsize>(map.eps.size() * sizeof(double)));
  if (!out) throw IoError("write failed: " + path);
}

PermittivityMap read_grid_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open: " + path);
  std::string line;
  std::getline(in, line);
  if (line.rfind(kGridMagic, 0) != 0) throw IoError("not a grid file: " + path);
  PermittivityMap map;
  std::string key;
  in >> key >> map.nx >> key >> map.ny;
  in >> key >> map.dx_nm;
  in >> key >> map.origin_nm.x >> map.origin_nm.y;
  std::getline(in, line);  // rest of origin line
  std::getline(in, line);  // data header
  map.eps.resize(static_cast<size_t>(map.nx) * map.ny);
  in.read(reinterpret_cast<char*>(map.eps.data()),
          static_cast<std::streamsize>(map.eps.size() * sizeof(double)));
  if (!in) throw IoError("truncated grid file: " + path);
  return map;
}

void write_grid_csv(const std::string& path, const PermittivityMap& map) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << "# nx=" << map.nx << " ny=" << map.ny << " dx_nm=" << map.dx_nm << "\n";
  out << "x_nm,y_nm,eps\n";
  char buf[128];
  for (int j = 0; j < map.ny; ++j) {
    for (int i = 0; i < map.nx; ++i) {
      std::snprintf(buf, sizeof buf, "%.9g,%.9g,%.9g\n", map.origin_nm.x + i * map.dx_nm,
                    map.origin_nm.y + j * map.dx_nm, map.at(i, j));
      out << buf;
    }
  }
}

}  // namespace topowave::geometry
