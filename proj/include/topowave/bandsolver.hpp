#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "topowave/geometry.hpp"

namespace topowave::bands {

using geometry::FourierEps;
using geometry::LatticeSpec;
using geometry::Region;

// Bloch vector in units of 2*pi/a0
struct BlochVector {
  double kx = 0.0;
  double ky = 0.0;
};

struct KPath {
  struct Vertex {
    std::string label;
    BlochVector k;
  };
  std::vector<Vertex> vertices;
  int samples_per_segment = 32;
};

// Gamma - K - M - Gamma for the triangular lattice
KPath default_kpath(int samples_per_segment = 32);

BlochVector gamma_point();
BlochVector k_point();
BlochVector m_point();

struct BandSample {
  std::string segment;
  int index = 0;
  BlochVector k;
  std::vector<double> nu;  // ascending, dimensionless a0/lambda
};

struct BandSet {
  std::vector<BandSample> samples;
  int basis_size = 0;
  double a0_nm = 0.0;

  double freq_thz(double nu) const { return nu_to_thz(nu, a0_nm); }
};

// TE master operator in the plane-wave basis:
//   M[a,b] = eta(Ga - Gb) * (k + Ga).(k + Gb)
// with k, G in 2*pi/a0 units; eigenvalues are nu^2.
Eigen::MatrixXcd assemble_te_operator(const FourierEps& eps, BlochVector k);

struct ModeSolution {
  std::vector<double> nu;
  Eigen::MatrixXcd vectors;  // plane-wave amplitudes of Hz, column per mode
};

ModeSolution solve_at(const FourierEps& eps, BlochVector k, int nbands, bool want_vectors);

struct SolveOptions {
  double gmax = 8.0;
  int nbands = 8;
};

BandSet solve_bands(const LatticeSpec& spec, Region region, const KPath& path,
                    const SolveOptions& opts = {});

struct GapInfo {
  double lower_nu = 0.0;  // max over k of the band below
  double upper_nu = 0.0;  // min over k of the band above
  double lower_thz = 0.0;
  double upper_thz = 0.0;

  double width() const { return upper_nu > lower_nu ? upper_nu - lower_nu : 0.0; }
  double midgap() const { return 0.5 * (upper_nu + lower_nu); }
  FreqWindow window() const { return {lower_nu, upper_nu}; }
};

// gap between bands `below` and `above` (1-indexed) over the samples of `bands`
GapInfo find_gap(const BandSet& bands, int below, int above);

struct GapOptions {
  double gmax = 8.0;
  int path_samples = 32;
  int bz_grid = 24;  // extrema additionally bounded on a grid over the full BZ
};

// gap between bands 3 and 4 (the deformation-opened gap) bounded over
// path + BZ grid sampling
GapInfo bulk_gap(const LatticeSpec& spec, Region region, const GapOptions& opts = {});

enum class ParityClass { trivial, nontrivial };

struct ParityMode {
  double nu = 0.0;
  int dominant_abs_l = 0;   // 1 = p-like, 2 = d-like
  double dominant_weight = 0.0;
};

struct ParityReport {
  ParityClass cls = ParityClass::trivial;
  std::vector<ParityMode> modes;  // the four gap-adjacent Gamma modes, ascending
};

// thrown when the angular-momentum content is ambiguous (e.g. pristine lattice)
class ParityInconclusive : public NumericError {
 public:
  using NumericError::NumericError;
};

// Labels the two doublets around the gap at Gamma by angular momentum of Hz on
// a ring of radius a0/4; nontrivial iff the d-like pair lies below the p-like
// pair.
ParityReport classify_parity(const LatticeSpec& spec, Region region, double gmax = 8.0);

// mean frequency of the four Dirac-descended bands (2..5) at Gamma
double dirac_frequency(const LatticeSpec& spec, double gmax = 8.0);

struct CalibrationOptions {
  double gmax = 8.0;
  double n_lo = 2.4;
  double n_hi = 3.5;
  double rel_tol = 1e-4;  // on the target frequency
};

// n_eff such that the pristine Dirac frequency matches target_thz (bisection;
// the Dirac frequency is monotone decreasing in n_eff). Throws NumericError
// when the bracket does not contain a root.
double calibrate_neff(const LatticeSpec& spec, double target_thz,
                      const CalibrationOptions& opts = {});

void write_bands_csv(const std::string& path, const BandSet& bands);
void write_gap_json(const std::string& path, const GapInfo& shrunk, const GapInfo& expanded,
                    double a0_nm);

}  // namespace topowave::bands
