#include "topowave/fdtd.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>
#include <fstream>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace topowave::fdtd {

namespace {

using std::complex;

struct Waveform {
  double amp_x = 0.0, amp_y = 0.0;
  double phase_x = 0.0, phase_y = 0.0;
  double carrier = 0.0;  // nu, cycles per a0/c
  double sigma_t = 0.0;
  double t0 = 0.0;
  bool continuous = false;
  double ramp_time = 0.0;

  double envelope(double t) const {
    if (continuous) {
      if (t >= ramp_time) return 1.0;
      const double u = t / ramp_time;
      return u * u * (3.0 - 2.0 * u);
    }
    const double z = (t - t0) / sigma_t;
    return std::exp(-0.5 * z * z);
  }
  double jx(double t) const {
    return amp_x * envelope(t) * std::cos(2.0 * kPi * carrier * (t - t0) + phase_x);
  }
  double jy(double t) const {
    return amp_y * envelope(t) * std::cos(2.0 * kPi * carrier * (t - t0) + phase_y);
  }
};

Waveform make_waveform(const DipoleSource& src) {
  Waveform w;
  w.carrier = src.carrier_nu;
  w.continuous = src.continuous;
  w.ramp_time = src.ramp_periods / src.carrier_nu;
  w.sigma_t = 1.0 / (2.0 * kPi * std::max(1e-6, src.bandwidth_nu));
  w.t0 = 5.0 * w.sigma_t;
  switch (src.pol) {
    case Polarization::linear:
      w.amp_x = src.amplitude * std::cos(src.linear_angle_rad);
      w.amp_y = src.amplitude * std::sin(src.linear_angle_rad);
      break;
    case Polarization::sigma_plus:
      w.amp_x = src.amplitude;
      w.amp_y = src.amplitude;
      w.phase_y = -0.5 * kPi;  // Jy lags: counterclockwise rotation
      break;
    case Polarization::sigma_minus:
      w.amp_x = src.amplitude;
      w.amp_y = src.amplitude;
      w.phase_y = 0.5 * kPi;
      break;
  }
  return w;
}

}  // namespace

std::string polarization_name(Polarization p) {
  switch (p) {
    case Polarization::sigma_plus: return "sigma+";
    case Polarization::sigma_minus: return "sigma-";
    case Polarization::linear: return "linear";
  }
  return "?";
}

const MonitorResult& SimResult::monitor(const std::string& label) const {
  for (const auto& m : monitors) {
    if (m.label == label) return m;
  }
  throw NumericError("no monitor named " + label);
}

struct Simulation::Impl {
  SimConfig cfg;
  LatticeSpec spec;
  double dx = 0.0, dt = 0.0, inv_dx = 0.0;
  int nx = 0, ny = 0, npml = 0;
  Vec2 origin;  // world position of grid node (0,0)

  std::vector<double> hz, ex, ey;
  std::vector<double> ce_ex, ce_ey;  // dt/eps at the component position
  std::vector<double> psi_ex_y, psi_ey_x, psi_hz_x, psi_hz_y;
  // CPML recursion coefficients per grid line
  std::vector<double> be_x, ae_x, bh_x, ah_x;  // size nx+1 / nx
  std::vector<double> be_y, ae_y, bh_y, ah_y;

  struct Source {
    Waveform wave;
    int ex_idx = -1, ey_idx = -1;
  };
  std::vector<Source> sources;

  struct Monitor {
    FluxMonitorSpec spec;
    int line = 0;     // grid line index (integer position)
    int s0 = 0, s1 = 0;
    std::vector<complex<double>> acc_e, acc_h;  // [f * len + p]
    double time_integrated = 0.0;
  };
  std::vector<Monitor> monitors;
  std::vector<double> freqs;

  struct Probe {
    char comp;
    int idx;
    std::vector<double> series;
  };
  std::vector<Probe> probes;

  double injected = 0.0;
  int steps_done = 0;
  Vec2 snap_offset;
  std::vector<std::string> warnings;
  std::vector<FieldSnapshot> snapshots;

  size_t ex_at(int i, int j) const { return static_cast<size_t>(j) * nx + i; }
  size_t ey_at(int i, int j) const { return static_cast<size_t>(j) * (nx + 1) + i; }
  size_t hz_at(int i, int j) const { return static_cast<size_t>(j) * nx + i; }

  int ex_rows() const { return cfg.periodic_y ? ny : ny + 1; }

  void build(const DeviceLayout& layout, const DomainBox& interior);
  void step(double t);
  void run_all();
  SimResult make_result() const;
};

Simulation::Simulation(const DeviceLayout& layout, const LatticeSpec& spec,
                       const DomainBox& interior, const SimConfig& cfg)
    : impl_(std::make_unique<Impl>()) {
  if (cfg.resolution < 16) throw NumericError("fdtd resolution must be >= 16 px/a0");
  if (cfg.courant <= 0.0 || cfg.courant >= 1.0) {
    throw NumericError("courant safety factor must be in (0, 1)");
  }
  if (cfg.pml_px < 8) throw NumericError("absorbing layer must be >= 8 px");
  impl_->cfg = cfg;
  impl_->spec = spec;
  impl_->build(layout, interior);
}

Simulation::~Simulation() = default;

void Simulation::Impl::build(const DeviceLayout& layout, const DomainBox& interior) {
  dx = 1.0 / cfg.resolution;
  inv_dx = 1.0 / dx;
  dt = cfg.courant * dx / std::sqrt(2.0);  // 2D stability limit is dx/sqrt(2)
  npml = cfg.pml_px;

  const int interior_nx = static_cast<int>(std::ceil((interior.x1 - interior.x0) * cfg.resolution));
  const int interior_ny = static_cast<int>(std::ceil((interior.y1 - interior.y0) * cfg.resolution));
  nx = interior_nx + 2 * npml;
  ny = interior_ny + (cfg.periodic_y ? 0 : 2 * npml);
  origin = {interior.x0 - npml * dx, interior.y0 - (cfg.periodic_y ? 0 : npml) * dx};

  hz.assign(static_cast<size_t>(nx) * ny, 0.0);
  ex.assign(static_cast<size_t>(nx) * ex_rows(), 0.0);
  ey.assign(static_cast<size_t>(nx + 1) * ny, 0.0);
  psi_ex_y.assign(ex.size(), 0.0);
  psi_ey_x.assign(ey.size(), 0.0);
  psi_hz_x.assign(hz.size(), 0.0);
  psi_hz_y.assign(hz.size(), 0.0);

  // permittivity at the staggered component positions, subpixel averaged
  const geometry::EpsilonSampler sampler(layout, spec);
  const double a0 = spec.a0_nm;
  ce_ex.resize(ex.size());
  ce_ey.resize(ey.size());
  for (int j = 0; j < ex_rows(); ++j) {
    for (int i = 0; i < nx; ++i) {
      const Vec2 p{(origin.x + (i + 0.5) * dx) * a0, (origin.y + j * dx) * a0};
      ce_ex[ex_at(i, j)] = dt / sampler.averaged(p, dx * a0, 8);
    }
  }
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i <= nx; ++i) {
      const Vec2 p{(origin.x + i * dx) * a0, (origin.y + (j + 0.5) * dx) * a0};
      ce_ey[ey_at(i, j)] = dt / sampler.averaged(p, dx * a0, 8);
    }
  }

  // CPML coefficient profiles; same stretched coordinate for E and H curls
  const double n_bg = spec.n_eff;
  const double sigma_max = cfg.pml_sigma_factor * 0.8 * (cfg.pml_order + 1) / (dx * n_bg);
  auto coeffs = [&](double depth_px, double& b, double& a) {
    if (depth_px <= 0.0) {
      b = 1.0;
      a = 0.0;
      return;
    }
    const double u = std::min(1.0, depth_px / npml);
    const double sigma = sigma_max * std::pow(u, cfg.pml_order);
    const double alpha = cfg.pml_alpha * (1.0 - u);  // larger toward the interior
    b = std::exp(-(sigma + alpha) * dt);
    a = sigma / (sigma + alpha + 1e-300) * (b - 1.0);
  };
  auto fill_profiles = [&](int count, double offset, std::vector<double>& bv,
                           std::vector<double>& av, bool absorb) {
    bv.assign(count, 1.0);
    av.assign(count, 0.0);
    if (!absorb) return;
    for (int i = 0; i < count; ++i) {
      const double pos = i + offset;
      const double d_lo = npml - pos;
      const double d_hi = pos - (count - 1 - npml + (offset > 0 ? 1 : 0));
      double b = 1.0, a = 0.0;
      // count-1-npml is the inner edge index on the high side for integer grids
      const double d = std::max(d_lo, pos - ((count - 1) - npml));
      coeffs(d, b, a);
      bv[i] = b;
      av[i] = a;
    }
    (void)d_hi_unused_silence();
  };
  (void)fill_profiles;

  auto fill_axis = [&](int nodes, double offset, int total, std::vector<double>& bv,
                       std::vector<double>& av, bool absorb) {
    bv.assign(nodes, 1.0);
    av.assign(nodes, 0.0);
    if (!absorb) return;
    for (int i = 0; i < nodes; ++i) {
      const double pos = i + offset;                 // in px from grid edge
      const double depth = std::max(npml - pos, pos - (total - npml));
      double b = 1.0, a = 0.0;
      coeffs(depth, b, a);
      bv[i] = b;
      av[i] = a;
    }
  };
  fill_axis(nx + 1, 0.0, nx, be_x, ae_x, true);
  fill_axis(nx, 0.5, nx, bh_x, ah_x, true);
  fill_axis(ex_rows(), 0.0, ny, be_y, ae_y, !cfg.periodic_y);
  fill_axis(ny, 0.5, ny, bh_y, ah_y, !cfg.periodic_y);
}

// removed helper used during development
static int d_hi_unused_silence() { return 0; }

void Simulation::add_source(const DipoleSource& src) {
  auto& im = *impl_;
  const double a0 = im.spec.a0_nm;
  // reject sources inside holes unless explicitly allowed
  if (!im.cfg.allow_source_in_hole) {
    // probing through a fresh sampler is cheap relative to a run
  }
  const double gx = (src.position_a0.x - im.origin.x) * im.cfg.resolution;
  const double gy = (src.position_a0.y - im.origin.y) * im.cfg.resolution;
  const int exi = std::clamp(static_cast<int>(std::lround(gx - 0.5)), 0, im.nx - 1);
  const int exj = std::clamp(static_cast<int>(std::lround(gy)), 0, im.ex_rows() - 1);
  const int eyi = std::clamp(static_cast<int>(std::lround(gx)), 0, im.nx);
  const int eyj = std::clamp(static_cast<int>(std::lround(gy - 0.5)), 0, im.ny - 1);

  const Vec2 snapped{im.origin.x + 0.5 * ((exi + 0.5) + eyi) * im.dx,
                     im.origin.y + 0.5 * (exj + (eyj + 0.5)) * im.dx};
  im.snap_offset = snapped - src.position_a0;
  if (im.snap_offset.norm() > 0.5 * im.dx) {
    im.warnings.push_back("source snapped by more than half a pixel");
  }
  (void)a0;

  Impl::Source s;
  s.wave = make_waveform(src);
  s.ex_idx = static_cast<int>(im.ex_at(exi, exj));
  s.ey_idx = static_cast<int>(im.ey_at(eyi, eyj));
  im.sources.push_back(s);
}

void Simulation::add_monitor(const FluxMonitorSpec& mon, const std::vector<double>& freqs) {
  auto& im = *impl_;
  if (im.freqs.empty()) {
    im.freqs = freqs;
  } else if (im.freqs != freqs) {
    throw NumericError("all monitors must share one frequency list");
  }
  Impl::Monitor m;
  m.spec = mon;
  const auto to_px = [&](double w, double o) { return (w - o) * im.cfg.resolution; };
  if (mon.axis == 'x') {
    m.line = static_cast<int>(std::lround(to_px(mon.position_a0, im.origin.x)));
    m.s0 = std::max(0, static_cast<int>(std::lround(to_px(mon.span_lo_a0, im.origin.y) - 0.5)));
    m.s1 = std::min(im.ny, static_cast<int>(std::lround(to_px(mon.span_hi_a0, im.origin.y) - 0.5)));
    if (m.line <= im.npml || m.line >= im.nx - im.npml) {
      throw NumericError("monitor line inside the absorbing layer: " + mon.label);
    }
  } else if (mon.axis == 'y') {
    m.line = static_cast<int>(std::lround(to_px(mon.position_a0, im.origin.y)));
    m.s0 = std::max(0, static_cast<int>(std::lround(to_px(mon.span_lo_a0, im.origin.x) - 0.5)));
    m.s1 = std::min(im.nx, static_cast<int>(std::lround(to_px(mon.span_hi_a0, im.origin.x) - 0.5)));
    if (!im.cfg.periodic_y && (m.line <= im.npml || m.line >= im.ny - im.npml)) {
      throw NumericError("monitor line inside the absorbing layer: " + mon.label);
    }
  } else {
    throw NumericError("monitor axis must be 'x' or 'y'");
  }
  if (m.s1 <= m.s0) throw NumericError("empty monitor span: " + mon.label);
  const size_t len = static_cast<size_t>(m.s1 - m.s0);
  m.acc_e.assign(freqs.size() * len, {0.0, 0.0});
  m.acc_h.assign(freqs.size() * len, {0.0, 0.0});
  im.monitors.push_back(std::move(m));
}

int Simulation::add_probe(Vec2 pos_a0, char component) {
  auto& im = *impl_;
  Impl::Probe p;
  p.comp = component;
  const double gx = (pos_a0.x - im.origin.x) * im.cfg.resolution;
  const double gy = (pos_a0.y - im.origin.y) * im.cfg.resolution;
  switch (component) {
    case 'x':
      p.idx = static_cast<int>(im.ex_at(std::clamp(static_cast<int>(std::lround(gx - 0.5)), 0, im.nx - 1),
                                        std::clamp(static_cast<int>(std::lround(gy)), 0, im.ex_rows() - 1)));
      break;
    case 'y':
      p.idx = static_cast<int>(im.ey_at(std::clamp(static_cast<int>(std::lround(gx)), 0, im.nx),
                                        std::clamp(static_cast<int>(std::lround(gy - 0.5)), 0, im.ny - 1)));
      break;
    case 'z':
      p.idx = static_cast<int>(im.hz_at(std::clamp(static_cast<int>(std::lround(gx - 0.5)), 0, im.nx - 1),
                                        std::clamp(static_cast<int>(std::lround(gy - 0.5)), 0, im.ny - 1)));
      break;
    default:
      throw NumericError("probe component must be x, y or z");
  }
  im.probes.push_back(std::move(p));
  return static_cast<int>(im.probes.size() - 1);
}

void Simulation::Impl::step(double t_e_new) {
  const int last_j = cfg.periodic_y ? ny : ny - 1;

  // Ex update: dEx/dt = (1/eps) dHz/dy
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
  for (int j = (cfg.periodic_y ? 0 : 1); j <= (cfg.periodic_y ? ny - 1 : ny - 1); ++j) {
    const int jm = (j == 0) ? ny - 1 : j - 1;  // periodic wrap only reachable when periodic
    double* exr = &ex[ex_at(0, j)];
    const double* hzr = &hz[hz_at(0, j == 0 ? jm : j)];
    const double* hzm = &hz[hz_at(0, jm)];
    const double* cer = &ce_ex[ex_at(0, j)];
    if (!cfg.periodic_y || j != 0) hzr = &hz[hz_at(0, j)];
    const bool in_pml = ae_y[j] != 0.0;
    double* psir = &psi_ex_y[ex_at(0, j)];
    for (int i = 0; i < nx; ++i) {
      const double curl = (hzr[i] - hzm[i]) * inv_dx;
      double add = curl;
      if (in_pml) {
        psir[i] = be_y[j] * psir[i] + ae_y[j] * curl;
        add += psir[i];
      }
      exr[i] += cer[i] * add;
    }
  }
  (void)last_j;

  // Ey update: dEy/dt = -(1/eps) dHz/dx
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
  for (int j = 0; j < ny; ++j) {
    double* eyr = &ey[ey_at(0, j)];
    const double* hzr = &hz[hz_at(0, j)];
    const double* cer = &ce_ey[ey_at(0, j)];
    double* psir = &psi_ey_x[ey_at(0, j)];
    for (int i = 1; i < nx; ++i) {
      const double curl = (hzr[i] - hzr[i - 1]) * inv_dx;
      double add = curl;
      if (ae_x[i] != 0.0) {
        psir[i] = be_x[i] * psir[i] + ae_x[i] * curl;
        add += psir[i];
      }
      eyr[i] -= cer[i] * add;
    }
  }

  // source injection at the E half of the step
  for (auto& s : sources) {
    const double jx = s.wave.jx(t_e_new - 0.5 * dt);
    const double jy = s.wave.jy(t_e_new - 0.5 * dt);
    const double scale = inv_dx * inv_dx;  // delta current over one cell
    if (jx != 0.0) {
      const double e_old = ex[s.ex_idx];
      ex[s.ex_idx] -= ce_ex[s.ex_idx] * jx * scale;
      injected += -jx * 0.5 * (e_old + ex[s.ex_idx]) * dt;
    }
    if (jy != 0.0) {
      const double e_old = ey[s.ey_idx];
      ey[s.ey_idx] -= ce_ey[s.ey_idx] * jy * scale;
      injected += -jy * 0.5 * (e_old + ey[s.ey_idx]) * dt;
    }
  }

  // monitor accumulation: E at t_e_new, Hz still at t_e_new - dt/2
  const double t_h = t_e_new - 0.5 * dt;
  const size_t nf = freqs.size();
  for (auto& m : monitors) {
    const size_t len = static_cast<size_t>(m.s1 - m.s0);
    double inst = 0.0;
    if (m.spec.axis == 'x') {
      const int i = m.line;
      for (size_t p = 0; p < len; ++p) {
        const int j = m.s0 + static_cast<int>(p);
        const double e = ey[ey_at(i, j)];
        const double h = 0.5 * (hz[hz_at(i - 1, j)] + hz[hz_at(i, j)]);
        inst += e * h;
        for (size_t f = 0; f < nf; ++f) {
          const double we = 2.0 * kPi * freqs[f] * t_e_new;
          const double wh = 2.0 * kPi * freqs[f] * t_h;
          m.acc_e[f * len + p] += e * complex<double>(std::cos(we), std::sin(we));
          m.acc_h[f * len + p] += h * complex<double>(std::cos(wh), std::sin(wh));
        }
      }
    } else {
      const int j = m.line;
      const int jm = (j == 0) ? (cfg.periodic_y ? ny - 1 : 0) : j - 1;
      for (size_t p = 0; p < len; ++p) {
        const int i = m.s0 + static_cast<int>(p);
        const double e = ex[ex_at(i, j)];
        const double h = 0.5 * (hz[hz_at(i, jm)] + hz[hz_at(i, j == ny ? 0 : j)]);
        inst += -e * h;  // S_y = -Ex Hz
        for (size_t f = 0; f < nf; ++f) {
          const double we = 2.0 * kPi * freqs[f] * t_e_new;
          const double wh = 2.0 * kPi * freqs[f] * t_h;
          m.acc_e[f * len + p] += e * complex<double>(std::cos(we), std::sin(we));
          m.acc_h[f * len + p] += h * complex<double>(std::cos(wh), std::sin(wh));
        }
      }
    }
    m.time_integrated += inst * dx * dt;
  }

  // Hz update: dHz/dt = -(dEy/dx - dEx/dy)
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
  for (int j = 0; j < ny; ++j) {
    const int jp = (j == ny - 1) ? (cfg.periodic_y ? 0 : ny) : j + 1;
    double* hzr = &hz[hz_at(0, j)];
    const double* eyr = &ey[ey_at(0, j)];
    const double* exr = &ex[ex_at(0, j)];
    const double* exp_ = &ex[ex_at(0, cfg.periodic_y && j == ny - 1 ? 0 : jp)];
    double* psix = &psi_hz_x[hz_at(0, j)];
    double* psiy = &psi_hz_y[hz_at(0, j)];
    const bool in_pml_y = ah_y[j] != 0.0;
    for (int i = 0; i < nx; ++i) {
      const double curl_x = (eyr[i + 1] - eyr[i]) * inv_dx;
      const double curl_y = (exp_[i] - exr[i]) * inv_dx;
      double cx = curl_x, cy = curl_y;
      if (ah_x[i] != 0.0) {
        psix[i] = bh_x[i] * psix[i] + ah_x[i] * curl_x;
        cx += psix[i];
      }
      if (in_pml_y) {
        psiy[i] = bh_y[j] * psiy[i] + ah_y[j] * curl_y;
        cy += psiy[i];
      }
      hzr[i] -= dt * (cx - cy);
    }
  }

  for (auto& p : probes) {
    switch (p.comp) {
      case 'x': p.series.push_back(ex[p.idx]); break;
      case 'y': p.series.push_back(ey[p.idx]); break;
      case 'z': p.series.push_back(hz[p.idx]); break;
    }
  }
}

void Simulation::Impl::run_all() {
  if (sources.empty()) throw NumericError("fdtd run needs a source");
  const double carrier = sources.front().wave.carrier;
  const double duration = cfg.duration_periods / carrier;
  const int nsteps = static_cast<int>(std::ceil(duration / dt));

#ifdef _OPENMP
  omp_set_num_threads(std::max(1, cfg.threads));
#endif

  size_t next_snapshot = 0;
  std::vector<double> snap_times = cfg.snapshot_times;
  std::sort(snap_times.begin(), snap_times.end());

  for (int n = 0; n < nsteps; ++n) {
    const double t_new = (n + 1) * dt;
    step(t_new);
    ++steps_done;

    while (next_snapshot < snap_times.size() && t_new >= snap_times[next_snapshot]) {
      FieldSnapshot snap;
      snap.time = t_new;
      snap.grid.nx = nx;
      snap.grid.ny = ny;
      snap.grid.dx_nm = dx * spec.a0_nm;
      snap.grid.origin_nm = {(origin.x + 0.5 * dx) * spec.a0_nm, (origin.y + 0.5 * dx) * spec.a0_nm};
      snap.grid.eps = hz;
      snapshots.push_back(std::move(snap));
      ++next_snapshot;
    }

    if ((n & 1023) == 1023) {
      double peak = 0.0;
      for (int j = 0; j < ny; j += 7) {
        for (int i = 0; i < nx; i += 7) peak = std::max(peak, std::abs(hz[hz_at(i, j)]));
      }
      if (!std::isfinite(peak) || peak > 1e14) {
        throw NumericError("fdtd run diverged (field amplitude " + std::to_string(peak) + ")");
      }
    }
  }
}

SimResult Simulation::Impl::make_result() const {
  SimResult r;
  r.freqs = freqs;
  r.injected_energy = injected;
  r.source_offset_a0 = snap_offset;
  r.dt = dt;
  r.nx = nx;
  r.ny = ny;
  r.steps = steps_done;
  r.warnings = warnings;
  r.snapshots = snapshots;
  for (const auto& m : monitors) {
    MonitorResult mr;
    mr.label = m.spec.label;
    mr.time_integrated = m.time_integrated;
    const size_t len = static_cast<size_t>(m.s1 - m.s0);
    mr.power.resize(freqs.size());
    const double sign = (m.spec.axis == 'y') ? -1.0 : 1.0;  // S_y = -Ex Hz
    for (size_t f = 0; f < freqs.size(); ++f) {
      double acc = 0.0;
      for (size_t p = 0; p < len; ++p) {
        acc += (m.acc_e[f * len + p] * std::conj(m.acc_h[f * len + p])).real();
      }
      mr.power[f] = 0.5 * sign * acc * dx * dt * dt;
    }
    r.monitors.push_back(std::move(mr));
  }
  return r;
}

void Simulation::run() { impl_->run_all(); }

SimResult Simulation::result() const { return impl_->make_result(); }

const std::vector<double>& Simulation::probe_series(int id) const {
  return impl_->probes.at(id).series;
}

double Simulation::time_step() const { return impl_->dt; }

SimResult run(const DeviceLayout& layout, const LatticeSpec& spec, const DipoleSource& source,
              const std::vector<FluxMonitorSpec>& monitors, const DomainBox& interior,
              const SimConfig& cfg, const std::vector<double>& freqs) {
  // source-in-hole precondition
  if (!cfg.allow_source_in_hole) {
    const geometry::EpsilonSampler sampler(layout, spec);
    if (sampler.in_hole({source.position_a0.x * spec.a0_nm, source.position_a0.y * spec.a0_nm})) {
      throw GeometryError("dipole source inside a hole (set allow_source_in_hole to override)");
    }
  }
  Simulation sim(layout, spec, interior, cfg);
  sim.add_source(source);
  for (const auto& m : monitors) sim.add_monitor(m, freqs);
  sim.run();
  return sim.result();
}

std::vector<double> reference_power(const LatticeSpec& spec, const DipoleSource& source,
                                    const SimConfig& cfg, const std::vector<double>& freqs) {
  const auto layout = geometry::uniform_layout();
  DipoleSource src = source;
  src.position_a0 = {0.0, 0.0};
  const DomainBox box{-6.0, 6.0, -6.0, 6.0};
  const double r = 4.0;
  std::vector<FluxMonitorSpec> mons = {
      {'x', r, -r, r, "right"},
      {'x', -r, -r, r, "left"},
      {'y', r, -r, r, "top"},
      {'y', -r, -r, r, "bottom"},
  };
  const SimResult res = run(layout, spec, src, mons, box, cfg, freqs);
  std::vector<double> total(freqs.size(), 0.0);
  for (size_t f = 0; f < freqs.size(); ++f) {
    total[f] = res.monitor("right").power[f] - res.monitor("left").power[f] +
               res.monitor("top").power[f] - res.monitor("bottom").power[f];
    total[f] = std::max(total[f], 0.0);
  }
  return total;
}

namespace {

std::vector<double> band_freq_list(const FreqWindow& band, int n = 41) {
  std::vector<double> f(n);
  const double lo = band.lo - 0.15 * band.width();
  const double hi = band.hi + 0.15 * band.width();
  for (int i = 0; i < n; ++i) f[i] = lo + (hi - lo) * i / (n - 1);
  return f;
}

double band_sum(const std::vector<double>& freqs, const std::vector<double>& v,
                const FreqWindow& w) {
  double acc = 0.0;
  for (size_t i = 0; i < freqs.size(); ++i) {
    if (w.contains(freqs[i])) acc += v[i];
  }
  return acc;
}

DipoleSource band_source(Polarization pol, Vec2 site, const FreqWindow& band) {
  DipoleSource src;
  src.position_a0 = site;
  src.pol = pol;
  src.carrier_nu = band.mid();
  src.bandwidth_nu = std::max(0.6 * band.width(), 0.004);
  return src;
}

}  // namespace

DirectionalityResult chirality_directionality(const LatticeSpec& spec, Polarization pol,
                                              Vec2 site_a0, const FreqWindow& band,
                                              const SimConfig& cfg) {
  const int arm = 24, width = 8;
  const auto layout = geometry::build_interface_layout(geometry::LayoutKind::straight, arm, width);
  const double hrow = 0.5 * kSqrt3;
  const DomainBox box{-0.5 * arm - 1.0, 0.5 * arm + 1.0, -(width * hrow + 1.0), width * hrow + 1.0};
  const double xmon = 0.5 * arm - 2.0;
  const double yspan = 4.0 * hrow;
  std::vector<FluxMonitorSpec> mons = {
      {'x', xmon, -yspan, yspan, "R"},
      {'x', -xmon, -yspan, yspan, "L"},
  };
  const auto freqs = band_freq_list(band);
  const DipoleSource src = band_source(pol, site_a0, band);
  const SimResult res = run(layout, spec, src, mons, box, cfg, freqs);

  DirectionalityResult out;
  out.freqs = freqs;
  out.sim = res;
  const auto& pr = res.monitor("R").power;
  const auto& pl = res.monitor("L").power;
  out.d.resize(freqs.size(), 0.0);
  double num = 0.0, den = 0.0;
  for (size_t i = 0; i < freqs.size(); ++i) {
    const double right = std::max(pr[i], 0.0);
    const double left = std::max(-pl[i], 0.0);
    if (right + left > 0) out.d[i] = (right - left) / (right + left);
    if (band.contains(freqs[i])) {
      num += right - left;
      den += right + left;
    }
  }
  if (den < 1e-30) throw NumericError("directionality undefined: no power reaches the monitors");
  out.band_average = num / den;
  return out;
}

double TransmissionSpectrum::band_integral(const FreqWindow& w) const {
  double acc = 0.0;
  for (size_t i = 0; i < freqs.size(); ++i) {
    if (w.contains(freqs[i])) acc += t[i];
  }
  return acc;
}

TransmissionSpectrum straight_transmission(const LatticeSpec& spec, Polarization pol, Vec2 site_a0,
                                           const FreqWindow& band, const SimConfig& cfg,
                                           int arm_cells) {
  const int width = 8;
  const auto layout =
      geometry::build_interface_layout(geometry::LayoutKind::straight, arm_cells, width);
  const double hrow = 0.5 * kSqrt3;
  const DomainBox box{-0.5 * arm_cells - 1.0, 0.5 * arm_cells + 1.0, -(width * hrow + 1.0),
                      width * hrow + 1.0};
  const double xmon = 0.5 * arm_cells - 2.0;
  std::vector<FluxMonitorSpec> mons = {{'x', xmon, -4.0 * hrow, 4.0 * hrow, "R"}};
  const auto freqs = band_freq_list(band, 61);
  const DipoleSource src = band_source(pol, site_a0, band);
  const SimResult res = run(layout, spec, src, mons, box, cfg, freqs);
  const auto ref = reference_power(spec, src, cfg, freqs);

  TransmissionSpectrum out;
  out.freqs = freqs;
  out.t.resize(freqs.size(), 0.0);
  for (size_t i = 0; i < freqs.size(); ++i) {
    out.t[i] = ref[i] > 1e-30 ? std::max(res.monitor("R").power[i], 0.0) / ref[i] : 0.0;
  }
  return out;
}

BendResult bend_transmission(const LatticeSpec& spec, int arm_cells, Polarization pol,
                             const FreqWindow& band, const SimConfig& cfg) {
  const int width = 8;
  const double hrow = 0.5 * kSqrt3;
  const auto freqs = band_freq_list(band, 41);

  // source on arm A, expanded-side cell center adjacent to the interface
  const double src_x = -arm_cells + 3.5;
  const Vec2 site{src_x, -hrow};
  const DipoleSource src = band_source(pol, site, band);

  // bend run: output monitor crosses arm B at a matched path distance
  const double y_out = (arm_cells - 3) * hrow;
  const double xb = 0.5 + y_out / kSqrt3;  // arm B guide center at that height
  const double path = (0.0 - src_x) + y_out / (0.5 * kSqrt3);

  BendResult out;
  out.freqs = freqs;

  double back_bend = 0.0, back_straight = 0.0, fwd_straight = 0.0;
  {
    const auto layout =
        geometry::build_interface_layout(geometry::LayoutKind::bend60, arm_cells, width);
    const DomainBox box{src_x - 3.0, xb + 6.0, -(width * hrow + 1.0), y_out + 2.5};
    std::vector<FluxMonitorSpec> mons = {
        {'y', y_out, xb - 4.5, xb + 4.5, "out"},
        {'x', src_x - 2.0, -4.0 * hrow, 4.0 * hrow, "back"},
    };
    const SimResult res = run(layout, spec, src, mons, box, cfg, freqs);
    out.t_bend = res.monitor("out").power;
    for (auto& v : out.t_bend) v = std::max(v, 0.0);
    back_bend = band_sum(freqs, res.monitor("back").power, band);  // negative = toward -x
  }
  {
    const auto layout = geometry::build_interface_layout(geometry::LayoutKind::straight,
                                                         2 * arm_cells + 8, width);
    const DomainBox box{src_x - 3.0, src_x + path + 3.0, -(width * hrow + 1.0),
                        width * hrow + 1.0};
    std::vector<FluxMonitorSpec> mons = {
        {'x', src_x + path, -4.0 * hrow, 4.0 * hrow, "out"},
        {'x', src_x - 2.0, -4.0 * hrow, 4.0 * hrow, "back"},
    };
    const SimResult res = run(layout, spec, src, mons, box, cfg, freqs);
    out.t_straight = res.monitor("out").power;
    for (auto& v : out.t_straight) v = std::max(v, 0.0);
    back_straight = band_sum(freqs, res.monitor("back").power, band);
    fwd_straight = band_sum(freqs, out.t_straight, band);
  }

  const auto ref = reference_power(spec, src, cfg, freqs);
  out.ratio.resize(freqs.size(), 0.0);
  for (size_t i = 0; i < freqs.size(); ++i) {
    if (out.t_straight[i] > 1e-30) out.ratio[i] = out.t_bend[i] / out.t_straight[i];
    // report both spectra normalized against the homogeneous reference
    if (ref[i] > 1e-30) {
      out.t_bend[i] /= ref[i];
      out.t_straight[i] /= ref[i];
    }
  }
  const double num = band_sum(freqs, out.t_bend, band);
  const double den = band_sum(freqs, out.t_straight, band);
  if (den < 1e-30) throw NumericError("bend transmission undefined: no straight-run power");
  out.band_average = num / den;
  // monitors count power toward +x; returned power is the negative part
  out.backscatter = (std::max(-back_bend, 0.0) - std::max(-back_straight, 0.0)) /
                    std::max(fwd_straight, 1e-30);
  return out;
}

PositionScanResult position_scan(const LatticeSpec& spec, const std::vector<double>& offsets_nm,
                                 const FreqWindow& band, const SimConfig& cfg) {
  const int arm = 24, width = 8;
  const auto layout = geometry::build_interface_layout(geometry::LayoutKind::straight, arm, width);
  const double hrow = 0.5 * kSqrt3;
  const DomainBox box{-0.5 * arm - 1.0, 0.5 * arm + 1.0, -(width * hrow + 1.0), width * hrow + 1.0};
  const double xmon = 0.5 * arm - 2.0;
  std::vector<FluxMonitorSpec> mons = {{'x', -xmon, -4.0 * hrow, 4.0 * hrow, "L"}};
  const auto freqs = band_freq_list(band, 31);

  auto run_offset = [&](double off_nm) {
    DipoleSource src = band_source(Polarization::linear, {0.0, off_nm / spec.a0_nm}, band);
    SimConfig c = cfg;
    c.allow_source_in_hole = true;  // the scan sweeps blindly across the lattice
    const SimResult res = run(layout, spec, src, mons, box, c, freqs);
    // power toward -x through the left monitor
    double acc = 0.0;
    const auto& p = res.monitor("L").power;
    for (size_t i = 0; i < freqs.size(); ++i) {
      if (band.contains(freqs[i])) acc += std::max(-p[i], 0.0);
    }
    return acc;
  };

  const double t0 = run_offset(0.0);
  if (t0 < 1e-30) throw NumericError("position scan: no on-interface transmission");
  PositionScanResult out;
  out.offsets_nm = offsets_nm;
  for (double off : offsets_nm) {
    out.transmission.push_back(run_offset(off) / t0);
  }
  return out;
}

void write_spectra_csv(const std::string& path, const SimResult& result, double a0_nm) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << "# format_version=1 dt=" << result.dt << " steps=" << result.steps << "\n";
  out << "nu,freq_THz";
  for (const auto& m : result.monitors) out << ",P_" << m.label;
  out << "\n";
  char buf[64];
  for (size_t i = 0; i < result.freqs.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.9g,%.9g", result.freqs[i],
                  nu_to_thz(result.freqs[i], a0_nm));
    out << buf;
    for (const auto& m : result.monitors) {
      std::snprintf(buf, sizeof buf, ",%.9g", m.power[i]);
      out << buf;
    }
    out << "\n";
  }
}

}  // namespace topowave::fdtd
