#include "topowave/edgesolver.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>
#include <fstream>
#include <map>

#include "topowave/linalg.hpp"

namespace topowave::edge {

namespace {

using std::complex;

Vec2 cell_offset_a0(int row) { return {0.5 * row, 0.5 * kSqrt3 * row}; }

double periodic_distance(double a, double b, double period) {
  double d = std::abs(a - b);
  while (d > period) d -= period;
  return std::min(d, period - d);
}

}  // namespace

char tag_letter(ModeTag t) {
  switch (t) {
    case ModeTag::interface_a: return 'A';
    case ModeTag::interface_b: return 'B';
    case ModeTag::bulk: return 'b';
  }
  return '?';
}

Supercell build_supercell(const LatticeSpec& spec, int n_shrunk, int n_expanded, double gmax) {
  if (n_shrunk < 6 || n_expanded < 6) {
    // all-of-one-kind cells (one count zero) are allowed for the folding oracle
    if (!((n_shrunk == 0 && n_expanded >= 6) || (n_expanded == 0 && n_shrunk >= 6))) {
      throw GeometryError("supercell needs at least 6 cells per side");
    }
  }
  spec.validate();

  Supercell cell;
  cell.spec = spec;
  cell.n_shrunk = n_shrunk;
  cell.n_expanded = n_expanded;
  cell.gmax = gmax;

  const int nrows = cell.rows();
  const Vec2 b1{1.0, -1.0 / kSqrt3};
  const Vec2 b2n{0.0, 2.0 / (kSqrt3 * nrows)};
  cell.basis = geometry::make_basis(b1, b2n, gmax);

  std::vector<geometry::Triangle> tris;
  tris.reserve(6 * static_cast<size_t>(nrows));
  const double inv_a0 = 1.0 / spec.a0_nm;
  for (int row = 0; row < nrows; ++row) {
    const auto region =
        row < n_shrunk ? geometry::Region::shrunk : geometry::Region::expanded;
    const auto placements = geometry::build_unit_cell(spec, region);
    const Vec2 off = cell_offset_a0(row);
    for (const auto& p : placements) {
      geometry::Triangle t = geometry::triangle_shape(p, spec.s_nm);
      for (auto& v : t.v) v = v * inv_a0 + off;
      tris.push_back(t);
    }
  }
  geometry::fill_fourier_tables(cell.basis, tris, nrows * 0.5 * kSqrt3, spec.eps_background(),
                                spec.eps_hole(), cell.eps_hat, cell.eta_hat);
  return cell;
}

namespace {

// eta coefficients as a dense Hermitian matrix over the basis
Eigen::MatrixXcd eta_matrix(const Supercell& cell) {
  const int n = cell.basis.size();
  Eigen::MatrixXcd h(n, n);
  for (int b = 0; b < n; ++b) {
    for (int a = 0; a < n; ++a) {
      h(a, b) = cell.eta_hat.at(cell.basis.mn[a][0] - cell.basis.mn[b][0],
                                cell.basis.mn[a][1] - cell.basis.mn[b][1]);
    }
  }
  return h;
}

}  // namespace

Eigen::MatrixXcd assemble_supercell_operator(const Supercell& cell, double kx) {
  const int n = cell.basis.size();
  Eigen::MatrixXcd m = eta_matrix(cell);
  std::vector<Vec2> kg(n);
  for (int i = 0; i < n; ++i) kg[i] = {cell.basis.g[i].x + kx, cell.basis.g[i].y};
  for (int b = 0; b < n; ++b) {
    for (int a = 0; a < n; ++a) {
      m(a, b) *= kg[a].dot(kg[b]);
    }
  }
  m = 0.5 * (m + m.adjoint()).eval();
  return m;
}

std::vector<double> transverse_profile(const Supercell& cell, const Eigen::VectorXcd& mode,
                                       double kx, int samples_per_row) {
  (void)kx;  // ky = 0; the x-dependent phase drops out of the x-integral
  const int n = cell.basis.size();
  const int ny = samples_per_row * cell.rows();
  const double width = cell.width_a0();
  const double dy = width / ny;

  // group basis vectors by their b1 index: Gx is the same within a group, so
  // the x-integral kills cross terms between groups
  std::map<int, std::vector<int>> groups;
  for (int i = 0; i < n; ++i) groups[cell.basis.mn[i][0]].push_back(i);

  std::vector<double> profile(ny, 0.0);
  std::vector<complex<double>> amp(ny);
  for (const auto& [m, idx] : groups) {
    std::fill(amp.begin(), amp.end(), complex<double>(0.0, 0.0));
    for (int i : idx) {
      const double gy = 2.0 * kPi * cell.basis.g[i].y;
      const complex<double> h = mode[i];
      for (int j = 0; j < ny; ++j) {
        const double y = (j + 0.5) * dy;
        amp[j] += h * std::exp(complex<double>(0.0, gy * y));
      }
    }
    for (int j = 0; j < ny; ++j) profile[j] += std::norm(amp[j]);
  }
  double total = 0.0;
  for (double p : profile) total += p * dy;
  if (total > 0) {
    for (double& p : profile) p /= total;
  }
  return profile;
}

Localization localization_length(const Supercell& cell, std::span<const double> profile) {
  const int ny = static_cast<int>(profile.size());
  const double width = cell.width_a0();
  const double dy = width / ny;
  const double row = cell.row_height_a0();

  Localization loc;
  int peak = 0;
  for (int j = 1; j < ny; ++j) {
    if (profile[j] > profile[peak]) peak = j;
  }
  // refine the center with a circular first moment around the peak
  {
    double wsum = 0.0, msum = 0.0;
    const int half = static_cast<int>(std::round(2.0 * row / dy));
    for (int o = -half; o <= half; ++o) {
      const int j = ((peak + o) % ny + ny) % ny;
      wsum += profile[j];
      msum += profile[j] * o;
    }
    loc.center_a0 = std::fmod((peak + 0.5 + (wsum > 0 ? msum / wsum : 0.0)) * dy + width, width);
  }

  const double ya = cell.interface_a_y();
  const double yb = cell.interface_b_y();
  const double y_int =
      periodic_distance(loc.center_a0, ya, width) < periodic_distance(loc.center_a0, yb, width)
          ? ya
          : yb;

  // bin intensity by distance to the interface, fit log(P) vs distance
  const double bin_w = 0.25 * row;
  const double d_max = 0.5 * width - row;
  const int nbins = std::max(4, static_cast<int>(d_max / bin_w));
  std::vector<double> bin_sum(nbins, 0.0);
  std::vector<int> bin_cnt(nbins, 0);
  for (int j = 0; j < ny; ++j) {
    const double d = periodic_distance((j + 0.5) * dy, y_int, width);
    const int b = static_cast<int>(d / bin_w);
    if (b >= nbins) continue;
    bin_sum[b] += profile[j];
    bin_cnt[b] += 1;
  }
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int npts = 0;
  for (int b = 0; b < nbins; ++b) {
    if (bin_cnt[b] == 0) continue;
    const double pbar = bin_sum[b] / bin_cnt[b];
    if (pbar < 1e-14) continue;
    const double x = (b + 0.5) * bin_w;
    const double y = std::log(pbar);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    ++npts;
  }
  loc.length_a0 = width;  // non-localized default
  if (npts >= 3) {
    const double denom = npts * sxx - sx * sx;
    if (std::abs(denom) > 1e-12) {
      const double slope = (npts * sxy - sx * sy) / denom;
      if (slope < -1e-9) {
        loc.length_a0 = std::min(width, -1.0 / slope);
      }
    }
  }
  return loc;
}

double spin_texture(const Supercell& cell, const Eigen::VectorXcd& mode, double kx,
                    Vec2 point_a0) {
  const int n = cell.basis.size();
  const double step = 1.0 / 32.0;  // 5x5 stencil spacing, a0 units
  double plus = 0.0, minus = 0.0;
  for (int sy = -2; sy <= 2; ++sy) {
    for (int sx = -2; sx <= 2; ++sx) {
      const Vec2 p{point_a0.x + sx * step, point_a0.y + sy * step};
      complex<double> dx{0.0, 0.0}, dy{0.0, 0.0};
      for (int i = 0; i < n; ++i) {
        const Vec2 kg{cell.basis.g[i].x + kx, cell.basis.g[i].y};
        const double phase = 2.0 * kPi * (kg.x * p.x + kg.y * p.y);
        const complex<double> e =
            mode[i] * std::exp(complex<double>(0.0, phase)) * complex<double>(0.0, 2.0 * kPi);
        dx += e * kg.x;
        dy += e * kg.y;
      }
      // TE relation: E ~ (d_y Hz, -d_x Hz) / eps; eps is constant at cell centers
      // and the common scale cancels in S
      const complex<double> ex = dy;
      const complex<double> ey = -dx;
      plus += std::norm(ex + complex<double>(0.0, 1.0) * ey);
      minus += std::norm(ex - complex<double>(0.0, 1.0) * ey);
    }
  }
  const double denom = plus + minus;
  if (denom < 1e-280) throw NumericError("spin texture undefined: field below numeric floor");
  return (plus - minus) / denom;
}

double group_velocity(const Supercell& cell, const Eigen::VectorXcd& mode, double kx, double nu) {
  if (nu <= 0) return 0.0;
  const int n = cell.basis.size();
  // d(lambda)/dkx = <v| dM/dkx |v>, dM[a,b] = eta(a-b) * (x_a + x_b)
  Eigen::VectorXcd hv = Eigen::VectorXcd::Zero(n);
  for (int b = 0; b < n; ++b) {
    const complex<double> vb = mode[b];
    if (std::norm(vb) < 1e-30) continue;
    for (int a = 0; a < n; ++a) {
      hv[a] += cell.eta_hat.at(cell.basis.mn[a][0] - cell.basis.mn[b][0],
                               cell.basis.mn[a][1] - cell.basis.mn[b][1]) *
               vb;
    }
  }
  complex<double> term{0.0, 0.0};
  for (int a = 0; a < n; ++a) {
    const double xa = cell.basis.g[a].x + kx;
    term += std::conj(mode[a]) * xa * hv[a];
  }
  const double dlambda = 2.0 * term.real();
  return dlambda / (2.0 * nu);
}

EdgeBandSet solve_projected_bands(const Supercell& cell, const EdgeSolveOptions& opts) {
  if (opts.kx_samples < 8 || opts.kx_samples % 2 != 0) {
    throw NumericError("kx_samples must be even and >= 8");
  }

  EdgeBandSet set;
  set.basis_size = cell.basis.size();
  set.a0_nm = cell.spec.a0_nm;
  set.width_a0 = cell.width_a0();

  // common bulk gap at the same reciprocal cutoff
  {
    bands::GapOptions gopt;
    gopt.gmax = cell.gmax;
    gopt.path_samples = 16;
    gopt.bz_grid = 16;
    const auto gs = bands::bulk_gap(cell.spec, geometry::Region::shrunk, gopt);
    const auto ge = bands::bulk_gap(cell.spec, geometry::Region::expanded, gopt);
    set.common_gap.lower_nu = std::max(gs.lower_nu, ge.lower_nu);
    set.common_gap.upper_nu = std::max(std::min(gs.upper_nu, ge.upper_nu), set.common_gap.lower_nu);
    set.common_gap.lower_thz = nu_to_thz(set.common_gap.lower_nu, set.a0_nm);
    set.common_gap.upper_thz = nu_to_thz(set.common_gap.upper_nu, set.a0_nm);
  }

  const double width = cell.width_a0();
  const double ya = cell.interface_a_y();
  const double yb = cell.interface_b_y();
  const int nhalf = opts.kx_samples / 2;
  const double dk = 1.0 / opts.kx_samples;

  const Vec2 a_exp = cell_offset_a0(cell.n_shrunk);       // expanded cell above interface A
  const Vec2 a_shr = cell_offset_a0(cell.n_shrunk - 1);   // shrunk cell below interface A
  const Vec2 b_exp = cell_offset_a0(cell.rows() - 1);     // expanded cell below interface B
  const Vec2 b_shr = cell_offset_a0(cell.rows());         // shrunk cell above interface B

  std::vector<std::vector<EdgeModeRow>> half_rows(nhalf + 1);

  for (int ik = 0; ik <= nhalf; ++ik) {
    const double kx = (ik == 0) ? 1e-9 : ik * dk;
    const Eigen::MatrixXcd m = assemble_supercell_operator(cell, kx);
    linalg::EighResult sol;
    try {
      sol = linalg::eigh_below(m, opts.nu_ceiling * opts.nu_ceiling);
    } catch (const NumericError& e) {
      throw NumericError(std::string(e.what()) + " at kx=" + std::to_string(kx));
    }
    const int nmodes = static_cast<int>(sol.values.size());
    for (int b = 0; b < nmodes; ++b) {
      EdgeModeRow row;
      row.kx = ik * dk;
      row.band = b;
      row.nu = std::sqrt(std::max(0.0, sol.values[b]));
      const auto prof = transverse_profile(cell, sol.vectors.col(b), kx);
      const auto loc = localization_length(cell, prof);
      row.loc_center_a0 = loc.center_a0;
      row.loc_len_a0 = loc.length_a0;
      const bool near_a = periodic_distance(loc.center_a0, ya, width) <
                          periodic_distance(loc.center_a0, yb, width);
      row.tag = (loc.length_a0 > 0.25 * width) ? ModeTag::bulk
                                               : (near_a ? ModeTag::interface_a : ModeTag::interface_b);
      row.in_gap = set.common_gap.width() > 0 && set.common_gap.window().contains(row.nu);
      if (row.tag != ModeTag::bulk) {
        const Vec2 p_exp = near_a ? a_exp : b_exp;
        const Vec2 p_shr = near_a ? a_shr : b_shr;
        row.spin = spin_texture(cell, sol.vectors.col(b), kx, p_exp);
        row.spin_shrunk_side = spin_texture(cell, sol.vectors.col(b), kx, p_shr);
      }
      row.vg = group_velocity(cell, sol.vectors.col(b), kx, row.nu);
      half_rows[ik].push_back(row);
    }
  }

  // assemble full zone: mirror kx -> -kx (nu even; vg and S odd under time reversal)
  for (int ik = nhalf; ik >= 1; --ik) {
    set.kx_samples.push_back(-ik * dk);
    for (EdgeModeRow row : half_rows[ik]) {
      row.kx = -row.kx;
      row.vg = -row.vg;
      row.spin = -row.spin;
      row.spin_shrunk_side = -row.spin_shrunk_side;
      set.rows.push_back(row);
    }
  }
  for (int ik = 0; ik <= nhalf; ++ik) {
    set.kx_samples.push_back(ik * dk);
    for (const EdgeModeRow& row : half_rows[ik]) set.rows.push_back(row);
  }

  // edge-band window: frequencies covered by interface branches inside the gap
  double lo = 1e300, hi = -1e300;
  for (const auto& r : set.rows) {
    if (r.tag != ModeTag::bulk && r.in_gap) {
      lo = std::min(lo, r.nu);
      hi = std::max(hi, r.nu);
    }
  }
  if (hi > lo) {
    set.edge_window = {std::max(lo, set.common_gap.lower_nu),
                       std::min(hi, set.common_gap.upper_nu)};
  }
  return set;
}

std::vector<Crossing> modes_at_frequency(const EdgeBandSet& set, double nu, ModeTag tag) {
  // rows of this tag, grouped by kx in sample order
  std::map<double, std::vector<const EdgeModeRow*>> by_kx;
  for (const auto& r : set.rows) {
    if (r.tag == tag && r.in_gap) by_kx[r.kx].push_back(&r);
  }
  std::vector<Crossing> out;
  if (by_kx.size() < 2) return out;
  auto it = by_kx.begin();
  auto prev = it++;
  for (; it != by_kx.end(); ++prev, ++it) {
    for (const auto* r1 : prev->second) {
      // nearest-in-frequency continuation on the next kx sample
      const EdgeModeRow* best = nullptr;
      double best_d = 0.02;  // branch continuity threshold
      for (const auto* r2 : it->second) {
        const double d = std::abs(r2->nu - r1->nu);
        if (d < best_d) {
          best_d = d;
          best = r2;
        }
      }
      if (!best) continue;
      const bool crosses = (r1->nu <= nu && nu < best->nu) || (best->nu <= nu && nu < r1->nu);
      if (!crosses) continue;
      const double t = (nu - r1->nu) / (best->nu - r1->nu);
      Crossing c;
      c.kx = r1->kx + t * (best->kx - r1->kx);
      const EdgeModeRow* nearer = (t < 0.5) ? r1 : best;
      c.vg = nearer->vg;
      c.spin = nearer->spin;
      c.loc_len_a0 = nearer->loc_len_a0;
      out.push_back(c);
    }
  }
  return out;
}

Vec2 interface_b_cell_center_a0(const Supercell& cell, bool expanded_side) {
  (void)cell;
  // layout coordinates: straight interface with expanded region at j < 0
  if (expanded_side) return {-0.5, -0.5 * kSqrt3};
  return {0.0, 0.0};
}

void write_edge_csv(const std::string& path, const EdgeBandSet& set) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << "# basis_size=" << set.basis_size << " width_a0=" << set.width_a0
      << " common_gap_nu=[" << set.common_gap.lower_nu << "," << set.common_gap.upper_nu
      << "]\n";
  out << "kx,band,nu,freq_THz,tag,loc_len_a0,vg,S\n";
  char buf[192];
  for (const auto& r : set.rows) {
    std::snprintf(buf, sizeof buf, "%.9g,%d,%.9g,%.9g,%c,%.6g,%.6g,%.6g\n", r.kx, r.band, r.nu,
                  nu_to_thz(r.nu, set.a0_nm), tag_letter(r.tag), r.loc_len_a0, r.vg, r.spin);
    out << buf;
  }
}

void write_edge_summary_json(const std::string& path, const EdgeBandSet& set) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path);
  char buf[512];
  std::snprintf(buf, sizeof buf,
                "{\n"
                "  \"common_gap_nu\": [%.9g, %.9g],\n"
                "  \"common_gap_THz\": [%.9g, %.9g],\n"
                "  \"edge_window_nu\": [%.9g, %.9g],\n"
                "  \"edge_window_THz\": [%.9g, %.9g],\n"
                "  \"width_a0\": %.9g,\n"
                "  \"basis_size\": %d\n"
                "}\n",
                set.common_gap.lower_nu, set.common_gap.upper_nu, set.common_gap.lower_thz,
                set.common_gap.upper_thz, set.edge_window.lo, set.edge_window.hi,
                nu_to_thz(set.edge_window.lo, set.a0_nm), nu_to_thz(set.edge_window.hi, set.a0_nm),
                set.width_a0, set.basis_size);
  out << buf;
}

}  // namespace topowave::edge
