#pragma once

#include <complex>
#include <memory>
#include <string>
#include <vector>

#include "topowave/geometry.hpp"

namespace topowave::fdtd {

using geometry::DeviceLayout;
using geometry::LatticeSpec;

struct SimConfig {
  int resolution = 24;           // px per a0, >= 16
  double courant = 0.7;          // fraction of the 2D stability limit dx/(c*sqrt(2))
  double duration_periods = 400; // total run time in optical periods of the source carrier
  int pml_px = 16;               // absorbing layer thickness, >= 8
  double pml_sigma_factor = 1.0;
  int pml_order = 3;
  double pml_alpha = 0.05;       // CFS pole, improves low-frequency absorption
  int threads = 1;
  bool periodic_y = false;       // periodic instead of absorbing in y (plane-wave tests)
  bool allow_source_in_hole = false;
  std::vector<double> snapshot_times;  // in a0/c units
};

enum class Polarization { sigma_plus, sigma_minus, linear };
std::string polarization_name(Polarization p);

// sigma+- are two in-plane dipoles with +-90 deg relative phase; the sign
// convention is fixed so that sigma+ routes power toward +x on an interface
// with the expanded region on the -y side.
struct DipoleSource {
  Vec2 position_a0;
  Polarization pol = Polarization::linear;
  double linear_angle_rad = 0.0;
  double carrier_nu = 0.47;
  double bandwidth_nu = 0.015;  // gaussian sigma in dimensionless frequency
  bool continuous = false;      // continuous with ramp instead of pulse
  double ramp_periods = 10.0;
  double amplitude = 1.0;
};

struct FluxMonitorSpec {
  char axis = 'x';  // 'x': vertical line, power counted toward +x; 'y': horizontal
  double position_a0 = 0.0;
  double span_lo_a0 = 0.0;
  double span_hi_a0 = 0.0;
  std::string label;
};

struct MonitorResult {
  std::string label;
  std::vector<double> power;     // P(nu), signed toward +axis
  double time_integrated = 0.0;  // net energy through the line
};

struct FieldSnapshot {
  double time = 0.0;
  geometry::PermittivityMap grid;  // same container/format; values are Hz
};

struct SimResult {
  std::vector<double> freqs;  // dimensionless nu
  std::vector<MonitorResult> monitors;
  double injected_energy = 0.0;
  Vec2 source_offset_a0;      // snap offset actually applied
  double dt = 0.0;
  int nx = 0, ny = 0;
  int steps = 0;
  std::vector<FieldSnapshot> snapshots;
  std::vector<std::string> warnings;

  const MonitorResult& monitor(const std::string& label) const;
};

struct DomainBox {
  double x0 = 0.0, x1 = 0.0, y0 = 0.0, y1 = 0.0;  // interior (non-PML) extent, a0 units
};

// Yee-grid TE engine (Hz out of plane, Ex/Ey in plane) with CPML absorbing
// layers. Deterministic for a fixed config; field updates are strip-parallel
// and independent of the thread count.
class Simulation {
 public:
  Simulation(const DeviceLayout& layout, const LatticeSpec& spec, const DomainBox& interior,
             const SimConfig& cfg);
  ~Simulation();
  Simulation(const Simulation&) = delete;
  Simulation& operator=(const Simulation&) = delete;

  void add_source(const DipoleSource& src);
  void add_monitor(const FluxMonitorSpec& mon, const std::vector<double>& freqs);
  int add_probe(Vec2 pos_a0, char component);  // 'x', 'y', 'z'; returns probe id

  void run();
  SimResult result() const;
  const std::vector<double>& probe_series(int id) const;
  double time_step() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// convenience wrapper
SimResult run(const DeviceLayout& layout, const LatticeSpec& spec, const DipoleSource& source,
              const std::vector<FluxMonitorSpec>& monitors, const DomainBox& interior,
              const SimConfig& cfg, const std::vector<double>& freqs);

// total radiated power spectrum of the same source in the homogeneous slab,
// via a closed monitor box (normalization reference)
std::vector<double> reference_power(const LatticeSpec& spec, const DipoleSource& source,
                                    const SimConfig& cfg, const std::vector<double>& freqs);

struct DirectionalityResult {
  std::vector<double> freqs;
  std::vector<double> d;       // D(nu) = (P_R - P_L)/(P_R + P_L)
  double band_average = 0.0;   // power-weighted over the band window
  SimResult sim;
};

// straight-waveguide run with a dipole near the interface; D over the edge band
DirectionalityResult chirality_directionality(const LatticeSpec& spec, Polarization pol,
                                              Vec2 site_a0, const FreqWindow& band,
                                              const SimConfig& cfg);

struct TransmissionSpectrum {
  std::vector<double> freqs;
  std::vector<double> t;   // normalized to reference injected power
  double band_integral(const FreqWindow& w) const;
};

// straight-waveguide transmission from a dipole at `site` to the +x end monitor
TransmissionSpectrum straight_transmission(const LatticeSpec& spec, Polarization pol, Vec2 site_a0,
                                           const FreqWindow& band, const SimConfig& cfg,
                                           int arm_cells = 24);

struct BendResult {
  std::vector<double> freqs;
  std::vector<double> ratio;        // T_bend / T_straight
  double band_average = 0.0;        // power-weighted over the band
  double backscatter = 0.0;         // extra power returned behind the source, bend minus straight
  std::vector<double> t_bend;
  std::vector<double> t_straight;
};

BendResult bend_transmission(const LatticeSpec& spec, int arm_cells, Polarization pol,
                             const FreqWindow& band, const SimConfig& cfg);

struct PositionScanResult {
  std::vector<double> offsets_nm;
  std::vector<double> transmission;  // band-integrated, normalized to the on-interface value
};

PositionScanResult position_scan(const LatticeSpec& spec, const std::vector<double>& offsets_nm,
                                 const FreqWindow& band, const SimConfig& cfg);

void write_spectra_csv(const std::string& path, const SimResult& result, double a0_nm);

}  // namespace topowave::fdtd
