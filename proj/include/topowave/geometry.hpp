#pragma once

#include <array>
#include <complex>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "topowave/common.hpp"

namespace topowave::geometry {

enum class Region { pristine, expanded, shrunk };

std::string region_name(Region r);
Region region_from_name(const std::string& name);

// Apex direction of each triangle relative to its position angle around the
// cell center. "inward" is the default: it is the only convention of the three
// that keeps the holes disjoint at the paper's s/a0 ratio while reducing to a
// proper honeycomb lattice at R = a0/3.
enum class TriangleOrientation { inward, outward, tangential };

std::string orientation_name(TriangleOrientation o);
TriangleOrientation orientation_from_name(const std::string& name);

struct LatticeSpec {
  double a0_nm = 445.0;   // lattice constant
  double s_nm = 140.0;    // triangle edge
  double h_nm = 160.0;    // slab thickness; metadata only in the 2D model
  double n_eff = 3.0962;  // effective index of the unpatterned slab (calibrated default)
  double n_hole = 1.0;

  // center-to-centroid distances; zero means "use the default factor"
  double r_pristine_nm = 0.0;  // default a0/3
  double r_expanded_nm = 0.0;  // default 1.05*a0/3
  double r_shrunk_nm = 0.0;    // default 0.94*a0/3

  TriangleOrientation orientation = TriangleOrientation::inward;

  double radius_nm(Region r) const;
  double eps_background() const { return n_eff * n_eff; }
  double eps_hole() const { return n_hole * n_hole; }

  // throws GeometryError when invariants are violated
  void validate() const;
};

struct TrianglePlacement {
  Vec2 centroid_nm;
  double apex_angle_rad;  // direction of one vertex as seen from the centroid
};

struct Triangle {
  std::array<Vec2, 3> v;

  bool contains(Vec2 p) const;
};

Triangle triangle_shape(const TrianglePlacement& placement, double s_nm);

// Six triangles of one unit cell, centered on the origin, positions at angles
// 0, 60, ..., 300 degrees. Throws GeometryError when any two triangles of the
// cell overlap for the given (s, R, orientation).
std::vector<TrianglePlacement> build_unit_cell(const LatticeSpec& spec, Region region);

bool triangles_overlap(const Triangle& a, const Triangle& b);

// lattice vectors in nm: a1 = a0*(1,0), a2 = a0*(1/2, sqrt3/2)
Vec2 lattice_a1(const LatticeSpec& spec);
Vec2 lattice_a2(const LatticeSpec& spec);

enum class LayoutKind { uniform, bulk, straight, bend60 };  // uniform = no holes

// Assignment of every lattice cell (i,j) -> region. The rule is defined on the
// whole lattice; extents only bound rasterization and interface enumeration.
struct DeviceLayout {
  LayoutKind kind = LayoutKind::bulk;
  Region bulk_region = Region::pristine;
  bool swap_regions = false;  // mirrors the layout by relabeling
  int i_lo = 0, i_hi = 0;     // cells i in [i_lo, i_hi]
  int j_lo = 0, j_hi = 0;
  int arm_length = 0;
  int width = 0;

  Region region_of(int i, int j) const;
};

DeviceLayout bulk_layout(Region region, int nx, int ny);
DeviceLayout uniform_layout();  // bare slab, no holes

// straight: interface along a1 between rows j=-1 (expanded) and j=0 (shrunk).
// bend60: arm along a1 for i <= 0, turning by one lattice direction (a2);
// the shrunk region is the wedge {j >= 0, i <= 0}.
DeviceLayout build_interface_layout(LayoutKind kind, int arm_length, int width);

struct CellPair {
  int i1, j1, i2, j2;
};

// nearest-neighbor cell pairs with differing region type within the extents
std::vector<CellPair> interface_pairs(const DeviceLayout& layout);

// Point queries against the hole set of a layout. Coordinates in nm; cell
// (i,j) is centered at i*a1 + j*a2.
class EpsilonSampler {
 public:
  EpsilonSampler(const DeviceLayout& layout, const LatticeSpec& spec);

  double at(Vec2 p_nm) const;  // eps_hole inside a hole, else eps_background
  bool in_hole(Vec2 p_nm) const;

  // area-weighted average over a square box (subpixel averaging)
  double averaged(Vec2 center_nm, double box_nm, int supersamples = 16) const;

  const LatticeSpec& spec() const { return spec_; }

 private:
  DeviceLayout layout_;
  LatticeSpec spec_;
  std::array<std::vector<Triangle>, 3> cell_triangles_;  // per region
  double inv_a0_;
};

struct PermittivityMap {
  int nx = 0, ny = 0;
  double dx_nm = 0.0;
  Vec2 origin_nm;                 // position of pixel (0,0) center
  std::vector<double> eps;        // row-major, eps[j*nx + i]

  double at(int i, int j) const { return eps[static_cast<size_t>(j) * nx + i]; }
  double fill_fraction() const;   // fraction of hole material, by eps interpolation
};

// raster over the layout extents at `resolution` pixels per a0 (>= 16)
PermittivityMap rasterize(const DeviceLayout& layout, const LatticeSpec& spec, int resolution);

// Reciprocal-space description. Basis vectors are stored in units of 2*pi/a0;
// coefficient tables cover every difference G - G' of the basis.
struct FourierBasis {
  Vec2 b1, b2;                          // reciprocal primitive vectors, 2*pi/a0 units
  std::vector<std::array<int, 2>> mn;   // basis indices
  std::vector<Vec2> g;                  // m*b1 + n*b2
  double gmax = 0.0;

  int size() const { return static_cast<int>(mn.size()); }
};

FourierBasis make_basis(Vec2 b1, Vec2 b2, double gmax);

class FourierTable {
 public:
  FourierTable() = default;
  FourierTable(int dm_max, int dn_max);

  std::complex<double>& at(int dm, int dn);
  std::complex<double> at(int dm, int dn) const;

 private:
  int dm_max_ = 0, dn_max_ = 0;
  std::vector<std::complex<double>> data_;
};

struct FourierEps {
  FourierBasis basis;
  FourierTable eps_hat;  // Fourier coefficients of eps
  FourierTable eta_hat;  // Fourier coefficients of 1/eps (direct rule)
  double a0_nm = 0.0;

  std::complex<double> eps(int dm, int dn) const { return eps_hat.at(dm, dn); }
  std::complex<double> eta(int dm, int dn) const { return eta_hat.at(dm, dn); }
};

// Exact closed-form Fourier transform of the triangle indicator function,
// integral of exp(-i*2*pi*g.r) over the polygon. g in 2*pi/a0 units, vertices
// in a0 units.
std::complex<double> polygon_ft(std::span<const Vec2> verts_a0, Vec2 g);

// Coefficient tables for an arbitrary periodic cell: triangles in a0 units,
// cell area in a0^2. Covers differences of the given basis.
void fill_fourier_tables(const FourierBasis& basis, std::span<const Triangle> triangles_a0,
                         double cell_area_a0, double eps_bg, double eps_hole,
                         FourierTable& eps_out, FourierTable& eta_out);

// Bulk unit cell coefficients for the triangular lattice (basis >= 100 vectors).
FourierEps fourier_epsilon(const LatticeSpec& spec, Region region, double gmax);

// binary grid container exchange format (shared with field snapshots)
void write_grid_file(const std::string& path, const PermittivityMap& map);
PermittivityMap read_grid_file(const std::string& path);
void write_grid_csv(const std::string& path, const PermittivityMap& map);

}  // namespace topowave::geometry
