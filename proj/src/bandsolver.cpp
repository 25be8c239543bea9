#include "topowave/bandsolver.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>
#include <fstream>
#include <map>

#include "topowave/linalg.hpp"

namespace topowave::bands {

namespace {

// degenerate when closer than this (dimensionless); see classify_parity
constexpr double kDegeneracyTol = 1e-4;

std::vector<double> nu_from_eigenvalues(const Eigen::VectorXd& w, int nbands) {
  std::vector<double> nu;
  nu.reserve(nbands);
  for (int i = 0; i < nbands && i < w.size(); ++i) {
    nu.push_back(std::sqrt(std::max(0.0, w[i])));
  }
  return nu;
}

}  // namespace

BlochVector gamma_point() { return {0.0, 0.0}; }
BlochVector k_point() { return {2.0 / 3.0, 0.0}; }
BlochVector m_point() { return {0.5, 0.5 / kSqrt3}; }  // (b1 + b2)/2

KPath default_kpath(int samples_per_segment) {
  KPath p;
  p.vertices = {{"G", gamma_point()}, {"K", k_point()}, {"M", m_point()}, {"G", gamma_point()}};
  p.samples_per_segment = samples_per_segment;
  return p;
}

Eigen::MatrixXcd assemble_te_operator(const FourierEps& eps, BlochVector k) {
  const auto& basis = eps.basis;
  const int n = basis.size();
  Eigen::MatrixXcd m(n, n);
  std::vector<Vec2> kg(n);
  for (int i = 0; i < n; ++i) kg[i] = {basis.g[i].x + k.kx, basis.g[i].y + k.ky};
  for (int b = 0; b < n; ++b) {
    for (int a = 0; a < n; ++a) {
      const int dm = basis.mn[a][0] - basis.mn[b][0];
      const int dn = basis.mn[a][1] - basis.mn[b][1];
      m(a, b) = eps.eta(dm, dn) * kg[a].dot(kg[b]);
    }
  }
  // the construction is Hermitian up to rounding; symmetrize the residue
  m = 0.5 * (m + m.adjoint()).eval();
  return m;
}

ModeSolution solve_at(const FourierEps& eps, BlochVector k, int nbands, bool want_vectors) {
  const Eigen::MatrixXcd m = assemble_te_operator(eps, k);
  ModeSolution out;
  try {
    if (want_vectors) {
      auto r = linalg::eigh_smallest(m, std::min<int>(nbands, m.rows()));
      out.nu = nu_from_eigenvalues(r.values, nbands);
      out.vectors = std::move(r.vectors);
    } else {
      out.nu = nu_from_eigenvalues(linalg::eigvalsh(m), nbands);
    }
  } catch (const NumericError& e) {
    char buf[128];
    std::snprintf(buf, sizeof buf, " at k=(%.6f, %.6f)", k.kx, k.ky);
    throw NumericError(std::string(e.what()) + buf);
  }
  return out;
}

BandSet solve_bands(const LatticeSpec& spec, Region region, const KPath& path,
                    const SolveOptions& opts) {
  if (path.vertices.size() < 2) throw NumericError("k-path needs at least two vertices");
  if (path.samples_per_segment < 2) throw NumericError("k-path needs >= 2 samples per segment");
  const FourierEps eps = geometry::fourier_epsilon(spec, region, opts.gmax);
  if (opts.nbands > eps.basis.size() / 2) {
    throw NumericError("nbands exceeds half the basis size");
  }

  BandSet set;
  set.basis_size = eps.basis.size();
  set.a0_nm = spec.a0_nm;

  for (size_t s = 0; s + 1 < path.vertices.size(); ++s) {
    const auto& v0 = path.vertices[s];
    const auto& v1 = path.vertices[s + 1];
    const std::string seg = v0.label + "-" + v1.label;
    const bool last_segment = (s + 2 == path.vertices.size());
    const int count = path.samples_per_segment + (last_segment ? 1 : 0);
    for (int i = 0; i < count; ++i) {
      const double t = static_cast<double>(i) / path.samples_per_segment;
      const BlochVector k{v0.k.kx + t * (v1.k.kx - v0.k.kx), v0.k.ky + t * (v1.k.ky - v0.k.ky)};
      BandSample sample;
      sample.segment = seg;
      sample.index = i;
      sample.k = k;
      sample.nu = solve_at(eps, k, opts.nbands, false).nu;
      set.samples.push_back(std::move(sample));
    }
  }
  return set;
}

GapInfo find_gap(const BandSet& bands, int below, int above) {
  if (below < 1 || above <= below) throw NumericError("find_gap: bad band indices");
  GapInfo gap;
  double lo = -1e300, hi = 1e300;
  for (const auto& s : bands.samples) {
    if (static_cast<int>(s.nu.size()) < above) throw NumericError("find_gap: not enough bands");
    lo = std::max(lo, s.nu[below - 1]);
    hi = std::min(hi, s.nu[above - 1]);
  }
  gap.lower_nu = lo;
  gap.upper_nu = std::max(hi, lo);  // clamp at zero width when bands overlap
  gap.lower_thz = nu_to_thz(gap.lower_nu, bands.a0_nm);
  gap.upper_thz = nu_to_thz(gap.upper_nu, bands.a0_nm);
  return gap;
}

GapInfo bulk_gap(const LatticeSpec& spec, Region region, const GapOptions& opts) {
  const FourierEps eps = geometry::fourier_epsilon(spec, region, opts.gmax);
  double lo = -1e300, hi = 1e300;
  auto probe = [&](BlochVector k) {
    const auto nu = solve_at(eps, k, 4, false).nu;
    lo = std::max(lo, nu[2]);
    hi = std::min(hi, nu[3]);
  };
  const KPath path = default_kpath(opts.path_samples);
  for (size_t s = 0; s + 1 < path.vertices.size(); ++s) {
    for (int i = 0; i <= path.samples_per_segment; ++i) {
      const double t = static_cast<double>(i) / path.samples_per_segment;
      const auto& v0 = path.vertices[s];
      const auto& v1 = path.vertices[s + 1];
      probe({v0.k.kx + t * (v1.k.kx - v0.k.kx), v0.k.ky + t * (v1.k.ky - v0.k.ky)});
    }
  }
  const Vec2 b1{1.0, -1.0 / kSqrt3};
  const Vec2 b2{0.0, 2.0 / kSqrt3};
  for (int u = 0; u < opts.bz_grid; ++u) {
    for (int v = 0; v < opts.bz_grid; ++v) {
      const double fu = static_cast<double>(u) / opts.bz_grid;
      const double fv = static_cast<double>(v) / opts.bz_grid;
      probe({fu * b1.x + fv * b2.x, fu * b1.y + fv * b2.y});
    }
  }
  GapInfo gap;
  gap.lower_nu = lo;
  gap.upper_nu = std::max(hi, lo);
  gap.lower_thz = nu_to_thz(gap.lower_nu, spec.a0_nm);
  gap.upper_thz = nu_to_thz(gap.upper_nu, spec.a0_nm);
  return gap;
}

ParityReport classify_parity(const LatticeSpec& spec, Region region, double gmax) {
  const FourierEps eps = geometry::fourier_epsilon(spec, region, gmax);
  const auto sol = solve_at(eps, gamma_point(), 6, true);
  if (sol.nu.size() < 6) throw NumericError("classify_parity: needs 6 Gamma bands");

  // bands 2..5 (1-indexed) are the gap-adjacent doublets
  if (sol.nu[3] - sol.nu[2] < kDegeneracyTol) {
    throw ParityInconclusive("gap-adjacent bands are degenerate at Gamma (gapless lattice)");
  }

  // angular momentum content of Hz on a ring of radius a0/4 about the center
  constexpr int kRingSamples = 180;
  constexpr double kRingRadius = 0.25;  // a0 units
  const int n = eps.basis.size();

  ParityReport report;
  for (int band = 1; band <= 4; ++band) {
    std::vector<std::complex<double>> field(kRingSamples);
    for (int t = 0; t < kRingSamples; ++t) {
      const double theta = 2.0 * kPi * t / kRingSamples;
      const Vec2 p{kRingRadius * std::cos(theta), kRingRadius * std::sin(theta)};
      std::complex<double> h{0.0, 0.0};
      for (int i = 0; i < n; ++i) {
        const double phase = 2.0 * kPi * eps.basis.g[i].dot(p);
        h += sol.vectors(i, band) * std::exp(std::complex<double>(0.0, phase));
      }
      field[t] = h;
    }
    double weights[4] = {0, 0, 0, 0};  // |l| = 0..3
    double total = 0.0;
    for (int l = -3; l <= 3; ++l) {
      std::complex<double> c{0.0, 0.0};
      for (int t = 0; t < kRingSamples; ++t) {
        const double theta = 2.0 * kPi * t / kRingSamples;
        c += field[t] * std::exp(std::complex<double>(0.0, -l * theta));
      }
      const double w = std::norm(c / static_cast<double>(kRingSamples));
      weights[std::abs(l)] += w;
      total += w;
    }
    if (total <= 0) throw ParityInconclusive("no field on the classification ring");
    int dom = 0;
    for (int l = 1; l < 4; ++l) {
      if (weights[l] > weights[dom]) dom = l;
    }
    const double share = weights[dom] / total;
    if (share < 0.6) {
      throw ParityInconclusive("ambiguous angular momentum content (dominant share " +
                               std::to_string(share) + ")");
    }
    report.modes.push_back({sol.nu[band], dom, share});
  }

  const bool below_d = report.modes[0].dominant_abs_l == 2 && report.modes[1].dominant_abs_l == 2;
  const bool below_p = report.modes[0].dominant_abs_l == 1 && report.modes[1].dominant_abs_l == 1;
  const bool above_d = report.modes[2].dominant_abs_l == 2 && report.modes[3].dominant_abs_l == 2;
  const bool above_p = report.modes[2].dominant_abs_l == 1 && report.modes[3].dominant_abs_l == 1;
  if (below_d && above_p) {
    report.cls = ParityClass::nontrivial;
  } else if (below_p && above_d) {
    report.cls = ParityClass::trivial;
  } else {
    throw ParityInconclusive("doublets are not clean p/d pairs");
  }
  return report;
}

double dirac_frequency(const LatticeSpec& spec, double gmax) {
  const FourierEps eps = geometry::fourier_epsilon(spec, Region::pristine, gmax);
  const auto sol = solve_at(eps, gamma_point(), 5, false);
  return 0.25 * (sol.nu[1] + sol.nu[2] + sol.nu[3] + sol.nu[4]);
}

double calibrate_neff(const LatticeSpec& spec, double target_thz, const CalibrationOptions& opts) {
  if (target_thz <= 250.0 || target_thz >= 400.0) {
    throw NumericError("calibration target outside (250, 400) THz");
  }
  const double target_nu = thz_to_nu(target_thz, spec.a0_nm);
  auto f = [&](double n) {
    LatticeSpec s = spec;
    s.n_eff = n;
    return dirac_frequency(s, opts.gmax) - target_nu;
  };
  double lo = opts.n_lo, hi = opts.n_hi;
  double flo = f(lo), fhi = f(hi);
  if (flo == 0) return lo;
  if (fhi == 0) return hi;
  if ((flo > 0) == (fhi > 0)) {
    throw NumericError("calibration bracket does not contain the target frequency");
  }
  for (int it = 0; it < 60; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double fm = f(mid);
    if (std::abs(fm) < opts.rel_tol * target_nu || hi - lo < 1e-7) return mid;
    if ((fm > 0) == (flo > 0)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

void write_bands_csv(const std::string& path, const BandSet& bands) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << "# basis_size=" << bands.basis_size << " a0_nm=" << bands.a0_nm
      << " c_over_a0_THz=" << kSpeedOfLightNmThz / bands.a0_nm << "\n";
  out << "segment,k_index,kx,ky,band,nu,freq_THz\n";
  char buf[192];
  for (const auto& s : bands.samples) {
    for (size_t b = 0; b < s.nu.size(); ++b) {
      std::snprintf(buf, sizeof buf, "%s,%d,%.9g,%.9g,%zu,%.9g,%.9g\n", s.segment.c_str(),
                    s.index, s.k.kx, s.k.ky, b + 1, s.nu[b], bands.freq_thz(s.nu[b]));
      out << buf;
    }
  }
}

void write_gap_json(const std::string& path, const GapInfo& shrunk, const GapInfo& expanded,
                    double a0_nm) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path);
  const double lo = std::max(shrunk.lower_nu, expanded.lower_nu);
  const double hi = std::min(shrunk.upper_nu, expanded.upper_nu);
  char buf[256];
  auto gap_block = [&](const char* name, const GapInfo& g) {
    std::snprintf(buf, sizeof buf,
                  "  \"%s\": {\"lower_nu\": %.9g, \"upper_nu\": %.9g, \"lower_THz\": %.9g, "
                  "\"upper_THz\": %.9g, \"width_nu\": %.9g},\n",
                  name, g.lower_nu, g.upper_nu, g.lower_thz, g.upper_thz, g.width());
    out << buf;
  };
  out << "{\n";
  gap_block("shrunk", shrunk);
  gap_block("expanded", expanded);
  std::snprintf(buf, sizeof buf,
                "  \"common\": {\"lower_nu\": %.9g, \"upper_nu\": %.9g, \"lower_THz\": %.9g, "
                "\"upper_THz\": %.9g, \"width_nu\": %.9g},\n",
                lo, hi, nu_to_thz(lo, a0_nm), nu_to_thz(hi, a0_nm), std::max(0.0, hi - lo));
  out << buf;
  std::snprintf(buf, sizeof buf, "  \"c_over_a0_THz\": %.9g\n}\n", kSpeedOfLightNmThz / a0_nm);
  out << buf;
}

}  // namespace topowave::bands
