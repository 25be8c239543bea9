#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "topowave/bandsolver.hpp"
#include "topowave/geometry.hpp"

namespace topowave::edge {

using bands::GapInfo;
using geometry::FourierBasis;
using geometry::FourierTable;
using geometry::LatticeSpec;

// Ribbon periodic in both directions: rows 0..n_shrunk-1 are shrunk cells,
// rows n_shrunk..N-1 expanded, stacked along a2. Two inequivalent interfaces
// per period:
//   A: between rows n_shrunk-1 and n_shrunk (shrunk below, expanded above)
//   B: at the periodic wrap (expanded below, shrunk above) — matches the
//      straight DeviceLayout, which has the expanded region at j < 0.
struct Supercell {
  LatticeSpec spec;
  int n_shrunk = 0;
  int n_expanded = 0;
  FourierBasis basis;
  FourierTable eta_hat;
  FourierTable eps_hat;
  double gmax = 0.0;

  int rows() const { return n_shrunk + n_expanded; }
  double row_height_a0() const { return 0.5 * kSqrt3; }
  double width_a0() const { return rows() * row_height_a0(); }  // perpendicular extent
  // transverse interface positions (perpendicular coordinate, a0 units)
  double interface_a_y() const { return (n_shrunk - 0.5) * row_height_a0(); }
  double interface_b_y() const { return (rows() - 0.5) * row_height_a0(); }
};

Supercell build_supercell(const LatticeSpec& spec, int n_shrunk, int n_expanded,
                          double gmax = 8.0);

Eigen::MatrixXcd assemble_supercell_operator(const Supercell& cell, double kx);

enum class ModeTag { interface_a, interface_b, bulk };
char tag_letter(ModeTag t);

struct EdgeModeRow {
  double kx = 0.0;       // 2*pi/a0 units, along the interface
  int band = 0;          // index within the ceiling-limited spectrum at this kx
  double nu = 0.0;
  double loc_center_a0 = 0.0;  // transverse position of the intensity peak
  double loc_len_a0 = 0.0;     // exponential decay length of intensity
  ModeTag tag = ModeTag::bulk;
  double vg = 0.0;             // group velocity d(nu)/d(kx), units of c
  double spin = 0.0;           // S at the expanded-side interface-adjacent cell center
  double spin_shrunk_side = 0.0;
  bool in_gap = false;         // inside the common bulk gap
};

struct EdgeBandSet {
  std::vector<double> kx_samples;
  std::vector<EdgeModeRow> rows;
  GapInfo common_gap;        // intersection of the two bulk gaps at the same Gmax
  FreqWindow edge_window;    // frequencies covered by interface branches inside the gap
  int basis_size = 0;
  double a0_nm = 0.0;
  double width_a0 = 0.0;
};

struct EdgeSolveOptions {
  int kx_samples = 64;       // over the full zone [-1/2, 1/2]; solved on half + mirrored
  double nu_ceiling = 0.56;  // keep states below this frequency
};

EdgeBandSet solve_projected_bands(const Supercell& cell, const EdgeSolveOptions& opts = {});

// transverse intensity profile |Hz|^2 integrated along the interface direction
std::vector<double> transverse_profile(const Supercell& cell, const Eigen::VectorXcd& mode,
                                       double kx, int samples_per_row = 8);

struct Localization {
  double center_a0 = 0.0;
  double length_a0 = 0.0;  // width_a0 when no exponential decay is found
};

Localization localization_length(const Supercell& cell, std::span<const double> profile);

// Circular-polarization content of the in-plane E field (from Hz) at a point,
// averaged over a 5x5 stencil. +1 is pure sigma+, -1 pure sigma-.
double spin_texture(const Supercell& cell, const Eigen::VectorXcd& mode, double kx,
                    Vec2 point_a0);

// group velocity from first-order perturbation of the operator in kx
double group_velocity(const Supercell& cell, const Eigen::VectorXcd& mode, double kx, double nu);

// interpolated branch crossings of a horizontal frequency line, per interface
struct Crossing {
  double kx = 0.0;
  double vg = 0.0;
  double spin = 0.0;
  double loc_len_a0 = 0.0;
};
std::vector<Crossing> modes_at_frequency(const EdgeBandSet& set, double nu, ModeTag tag);

// Interface-adjacent cell centers for interface B (the straight-layout
// interface), in layout coordinates: expanded side is cell (0,-1), shrunk side
// cell (0,0).
Vec2 interface_b_cell_center_a0(const Supercell& cell, bool expanded_side);

void write_edge_csv(const std::string& path, const EdgeBandSet& set);
void write_edge_summary_json(const std::string& path, const EdgeBandSet& set);

}  // namespace topowave::edge
