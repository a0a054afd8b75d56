#pragma once

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <complex>
#include <cstddef>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "combctl/error.hpp"
#include "combctl/franck_condon.hpp"
#include "combctl/perturbative.hpp"
#include "combctl/potentials.hpp"
#include "combctl/propagator.hpp"
#include "combctl/pulses.hpp"
#include "combctl/units.hpp"

namespace combctl {

// ---------------------------------------------------------------------------
// Schedules

enum class ScheduleMode {
  /// sin^2(A_d[n]/2) = 1/n, sin^2(A_p[n]/2) = 1/(N - n + 1).
  eq1,
  /// Constant pump area; dump area matched online to the measured populations.
  fixed_pump,
  fixed_both,
};

struct PulsePairSchedule {
  int pairs = 0;
  ScheduleMode mode = ScheduleMode::eq1;
  std::vector<double> pump_area;  // radians, index n - 1
  std::vector<double> dump_area;  // empty entries (NaN) are matched online
  double inter_pair_phase = 0.0;
  double repetition_time = 0.0;
  double intra_pair_delay = 0.0;

  bool matched_dump() const { return mode == ScheduleMode::fixed_pump; }
};

inline PulsePairSchedule area_schedule(int pairs, ScheduleMode mode, double pump_area = 0.0, double dump_area = 0.0) {
  if (pairs < 1) throw InvalidArgument("area_schedule: need at least one pulse pair");
  auto check = [](double a, const char* what) {
    if (!(a > 0.0) || a > units::kPi + 1e-12) {
      throw InvalidArgument(std::string("area_schedule: ") + what + " area must lie in (0, pi]");
    }
  };
  PulsePairSchedule s;
  s.pairs = pairs;
  s.mode = mode;
  s.pump_area.resize(static_cast<std::size_t>(pairs));
  s.dump_area.resize(static_cast<std::size_t>(pairs));
  for (int n = 1; n <= pairs; ++n) {
    const auto k = static_cast<std::size_t>(n - 1);
    switch (mode) {
      case ScheduleMode::eq1:
        s.pump_area[k] = fraction_to_area(1.0 / static_cast<double>(pairs - n + 1));
        s.dump_area[k] = fraction_to_area(1.0 / static_cast<double>(n));
        break;
      case ScheduleMode::fixed_pump:
        check(pump_area, "pump");
        s.pump_area[k] = pump_area;
        s.dump_area[k] = std::numeric_limits<double>::quiet_NaN();
        break;
      case ScheduleMode::fixed_both:
        check(pump_area, "pump");
        check(dump_area, "dump");
        s.pump_area[k] = pump_area;
        s.dump_area[k] = dump_area;
        break;
    }
  }
  return s;
}

/// Dump fraction that moves the expected excited population and the
/// population already in the target into the target in equal measure per pair.
inline double matched_dump_fraction(double expected_excited, double target_before) {
  const double total = expected_excited + target_before;
  return total > 0.0 ? std::clamp(expected_excited / total, 0.0, 1.0) : 1.0;
}

/// Phase the input-target coherence accrues over one repetition period, in [0, 2 pi).
inline double raman_phase(double e_input, double e_target, double repetition_time) {
  if (!(repetition_time > 0.0)) throw InvalidArgument("raman_phase: repetition time must be positive");
  double phi = std::fmod((e_input - e_target) * repetition_time, units::kTwoPi);
  if (phi < 0.0) phi += units::kTwoPi;
  if (phi >= units::kTwoPi) phi -= units::kTwoPi;
  return phi;
}

// ---------------------------------------------------------------------------
// Three-level model

struct LambdaAmplitudes {
  Complex input{1.0, 0.0};
  Complex excited{};
  Complex target{};
};

struct LambdaMapOptions {
  double intra_pair_decay = 0.0;  // Gamma * (pump-dump delay)
  double inter_pair_decay = 0.0;  // Gamma * (gap between pairs)
};

/// Pulse pairs as exact rotations exp(-i A/2 sigma_x) on |i>-|e> and |e>-|t>;
/// the dump of pair n carries the phase -(n - 1) dphi.
inline LambdaAmplitudes ideal_lambda_map(const PulsePairSchedule& schedule, double dphi,
                                         const LambdaMapOptions& opt = {}, LambdaAmplitudes c = {}) {
  const double intra = std::exp(-0.5 * opt.intra_pair_decay);
  const double inter = std::exp(-0.5 * opt.inter_pair_decay);
  const Complex i1(0.0, 1.0);
  for (int n = 1; n <= schedule.pairs; ++n) {
    const auto k = static_cast<std::size_t>(n - 1);
    const double ap = schedule.pump_area[k];
    const double cp = std::cos(0.5 * ap);
    const double sp = std::sin(0.5 * ap);
    const Complex in = cp * c.input - i1 * sp * c.excited;
    const Complex ex = -i1 * sp * c.input + cp * c.excited;
    c.input = in;
    c.excited = ex * intra;

    double ad = schedule.dump_area[k];
    if (schedule.matched_dump()) {
      ad = fraction_to_area(matched_dump_fraction(sp * sp * std::norm(in), std::norm(c.target)));
    }
    const double cd = std::cos(0.5 * ad);
    const double sd = std::sin(0.5 * ad);
    const Complex phase = std::polar(1.0, -static_cast<double>(n - 1) * dphi);
    const Complex ex2 = cd * c.excited - i1 * sd * std::conj(phase) * c.target;
    const Complex tg = -i1 * sd * phase * c.excited + cd * c.target;
    c.excited = ex2 * inter;
    c.target = tg;
  }
  return c;
}

// ---------------------------------------------------------------------------
// Wave-packet system

/// Physical inputs of one Lambda scheme.
struct SystemSpec {
  MorsePotential input_surface;
  MorsePotential excited_surface;
  MorsePotential target_surface;
  int input_v = 0;
  int target_v = 0;
  int excited_center_v = 0;
  std::vector<int> neighbour_v;  // extra input-surface levels to track

  double bandwidth = 0.0;  // intensity FWHM of A(w), angular frequency
  std::vector<std::pair<double, double>> amplitude_table;  // (detuning, A); overrides the Gaussian
  double gdd = 0.0;
  double pump_carrier = 0.0;  // 0: resonant with the excited centre level
  double window_fwhms = 3.0;  // Franck-Condon window half width in bandwidths
  double detuning_period = 0.0;  // time period of the detuning grid
  double dipole = 1.0;
  ShapingGauge gauge = ShapingGauge::dump_envelope;

  std::size_t grid_points = 256;
  double dt = 0.0;  // 0: stable_time_step
  CouplingMethod coupling = CouplingMethod::exact;
  double tail_fraction = 1e-9;
  FreeEvolveOptions capture;
};

/// Everything a pulse train needs, derived once from a SystemSpec.
struct LambdaSystem {
  SystemSpec spec;
  RadialGrid grid;
  VibrationalLevel input;
  VibrationalLevel target;
  std::vector<VibrationalLevel> neighbours;
  double pump_carrier = 0.0;
  double dump_carrier = 0.0;
  double delay = 0.0;
  DetuningGrid detuning;
  FCSpectrum fc_pump;
  FCSpectrum fc_dump;
  DispersionPhase phase;
  PulsePair pair;  // unit peak shapes, chirp applied
  FrameHamiltonian ham;
  std::array<SurfaceBasis, kSurfaces> bases;
  double dt = 0.0;
  PairDrive drive;

  std::array<const SurfaceBasis*, kSurfaces> basis_ptrs() const { return {&bases[0], &bases[1], &bases[2]}; }
  SplitOperator stepper() const { return SplitOperator(ham, dt, spec.coupling); }
};

inline LambdaSystem build_lambda_system(const SystemSpec& spec) {
  LambdaSystem sys;
  sys.spec = spec;
  const auto& g1 = spec.input_surface;
  const auto& ex = spec.excited_surface;
  const auto& g2 = spec.target_surface;
  if (g1.reduced_mass != ex.reduced_mass || g1.reduced_mass != g2.reduced_mass) {
    throw InvalidArgument("build_lambda_system: surfaces must share the reduced mass");
  }
  if (spec.input_v < 0 || spec.input_v > max_bound_index(g1)) throw UnboundLevel("input level is not bound");
  if (spec.target_v < 0 || spec.target_v > max_bound_index(g2)) throw UnboundLevel("target level is not bound");
  if (!(spec.bandwidth > 0.0) && spec.amplitude_table.empty()) {
    throw InvalidArgument("build_lambda_system: bandwidth must be positive");
  }
  const double half_window = spec.window_fwhms * spec.bandwidth;
  const double e_center = ex.electronic_offset + morse_energy(ex, spec.excited_center_v);

  // Every excited level inside the window plus a one-level margin must fit.
  int top_excited = spec.excited_center_v;
  while (top_excited < max_bound_index(ex) &&
         morse_energy(ex, top_excited) + ex.electronic_offset < e_center + half_window) {
    ++top_excited;
  }
  top_excited = std::min(top_excited + 1, max_bound_index(ex));
  int top_ground = spec.input_v;
  for (int v : spec.neighbour_v) top_ground = std::max(top_ground, v);
  std::vector<GridRequest> req{{&g1, top_ground}, {&ex, top_excited}, {&g2, spec.target_v}};
  sys.grid = fit_grid(req, spec.grid_points);

  sys.input = morse_wavefunction(g1, spec.input_v, sys.grid);
  sys.target = morse_wavefunction(g2, spec.target_v, sys.grid);
  for (int v : spec.neighbour_v) sys.neighbours.push_back(morse_wavefunction(g1, v, sys.grid));

  sys.pump_carrier = spec.pump_carrier > 0.0 ? spec.pump_carrier : e_center - sys.input.absolute_energy();
  sys.dump_carrier = sys.pump_carrier + sys.input.absolute_energy() - sys.target.absolute_energy();
  sys.delay = 0.5 * vibration_period(ex, spec.excited_center_v);

  const double period = spec.detuning_period > 0.0 ? spec.detuning_period : 16.0 * sys.delay;
  const double spread = std::max(half_window, 1.0 / std::max(sys.delay, 1.0));
  sys.detuning = DetuningGrid::covering(half_window + spread, units::kTwoPi / period);
  const FrequencyWindow window{-half_window, half_window};
  sys.fc_pump = fc_spectrum(sys.input, ex, sys.pump_carrier, window, spec.dipole);
  sys.fc_dump = fc_spectrum(sys.target, ex, sys.dump_carrier, window, spec.dipole);
  sys.phase = dispersion_phase(sys.fc_pump, sys.delay, sys.detuning);
  const auto common = spec.amplitude_table.empty() ? gaussian_amplitude(sys.detuning, spec.bandwidth)
                                                   : tabulated_amplitude(sys.detuning, spec.amplitude_table);
  sys.pair = design_pair(sys.fc_pump, sys.fc_dump, common, sys.phase, spec.gauge);
  sys.pair.pump = apply_chirp(sys.pair.pump, spec.gdd);
  sys.pair.dump = apply_chirp(sys.pair.dump, spec.gdd);

  sys.ham = make_frame_hamiltonian(g1, ex, g2, sys.grid, sys.pump_carrier, sys.dump_carrier,
                                   sys.input.absolute_energy());
  sys.bases[0] = make_surface_basis(g1, sys.ham, Surface::input);
  sys.bases[1] = make_surface_basis(ex, sys.ham, Surface::excited);
  sys.bases[2] = make_surface_basis(g2, sys.ham, Surface::target);
  sys.dt = spec.dt > 0.0 ? spec.dt : stable_time_step(sys.ham);
  sys.drive = make_pair_drive(sys.pair.pump, sys.pair.dump, sys.delay, sys.dt, spec.dipole, spec.tail_fraction);
  return sys;
}

// ---------------------------------------------------------------------------
// Area calibration against full propagation

/// Maps effective areas to field scales by propagating each pulse alone from
/// its source level. Results are cached; safe to share between threads.
class AreaCalibrator {
 public:
  explicit AreaCalibrator(const LambdaSystem& sys, double tolerance = 1e-4, std::size_t curve_points = 48)
      : sys_(&sys),
        tolerance_(tolerance),
        curve_points_(curve_points),
        pump_drive_(make_single_drive(sys.pair.pump, Channel::pump, sys.dt, sys.spec.dipole, sys.spec.tail_fraction)),
        dump_drive_(make_single_drive(sys.pair.dump, Channel::dump, sys.dt, sys.spec.dipole, sys.spec.tail_fraction)) {}

  /// Pump field scale moving sin^2(A/2) of the input level to the excited surface.
  double pump_scale(double area) const {
    std::lock_guard lock(mutex_);
    auto it = pump_cache_.find(area);
    if (it != pump_cache_.end()) return it->second;
    const double s = solve(Channel::pump, area_to_fraction(area));
    pump_cache_.emplace(area, s);
    return s;
  }

  /// Excited fraction the pump moves at the given scale.
  double pump_fraction(double scale) const { return excited_fraction(Channel::pump, scale); }

  /// Dump field scale moving fraction p of the target level to the excited
  /// surface, interpolated on a sampled response curve. Fractions beyond the
  /// curve's maximum return the scale of the maximum.
  double dump_scale_for_fraction(double p) const {
    std::lock_guard lock(mutex_);
    if (dump_curve_.empty()) build_dump_curve();
    if (p <= 0.0) return 0.0;
    for (std::size_t k = 1; k < dump_curve_.size(); ++k) {
      const auto& [s0, f0] = dump_curve_[k - 1];
      const auto& [s1, f1] = dump_curve_[k];
      if (f1 >= p) return s0 + (s1 - s0) * (p - f0) / (f1 - f0);
    }
    return dump_curve_.back().first;
  }

  double dump_scale(double area) const { return dump_scale_for_fraction(area_to_fraction(area)); }

  /// Sampled (scale, fraction) response of the dump, up to its first maximum.
  std::vector<std::pair<double, double>> dump_curve() const {
    std::lock_guard lock(mutex_);
    if (dump_curve_.empty()) build_dump_curve();
    return dump_curve_;
  }

  double excited_fraction(Channel channel, double scale) const {
    const auto& sys = *sys_;
    const bool pump = channel == Channel::pump;
    const auto& drive = pump ? pump_drive_ : dump_drive_;
    auto state = pump ? ThreeSurfaceState::from_level(sys.input, Surface::input)
                      : ThreeSurfaceState::from_level(sys.target, Surface::target);
    const auto stepper = sys.stepper();
    propagate_pulse_pair(state, stepper, drive, pump ? scale : 0.0, pump ? 0.0 : scale);
    return state.norm(Surface::excited);
  }

 private:
  double first_order_scale(Channel channel, double p) const {
    const auto& sys = *sys_;
    const auto& pulse = channel == Channel::pump ? sys.pair.pump : sys.pair.dump;
    const auto& fc = channel == Channel::pump ? sys.fc_pump : sys.fc_dump;
    double unit = 0.0;
    for (const auto& e : fc.entries) unit += std::norm(pulse.at(e.detuning) * e.amplitude);
    if (!(unit > 0.0)) throw DegenerateDesign("AreaCalibrator: pulse misses the Franck-Condon spectrum");
    return 2.0 * std::sqrt(p / unit) / sys.spec.dipole;
  }

  double solve(Channel channel, double p) const {
    // Illinois regula falsi on f(s) - p. The bracket grows from a weak-field
    // guess so strong targets land on the first crossing.
    double lo = 0.0;
    double flo = -p;
    double hi = first_order_scale(channel, std::min(p, 0.1));
    double fhi = excited_fraction(channel, hi) - p;
    int grow = 0;
    while (fhi < 0.0) {
      lo = hi;
      flo = fhi;
      hi *= 1.3;
      fhi = excited_fraction(channel, hi) - p;
      if (++grow > 30) throw Unachievable("AreaCalibrator: excited fraction " + std::to_string(p) + " not reached");
    }
    int side = 0;
    for (int it = 0; it < 60; ++it) {
      const double s = (lo * fhi - hi * flo) / (fhi - flo);
      const double f = excited_fraction(channel, s) - p;
      if (std::abs(f) <= tolerance_ * p) return s;
      if (f < 0.0) {
        lo = s;
        flo = f;
        if (side == -1) fhi *= 0.5;
        side = -1;
      } else {
        hi = s;
        fhi = f;
        if (side == 1) flo *= 0.5;
        side = 1;
      }
    }
    throw NumericalFailure("AreaCalibrator: calibration did not converge");
  }

  void build_dump_curve() const {
    const double s_pi = first_order_scale(Channel::dump, 1.0);
    const double s_max = 1.6 * s_pi;
    dump_curve_.emplace_back(0.0, 0.0);
    for (std::size_t k = 1; k <= curve_points_; ++k) {
      const double s = s_max * static_cast<double>(k) / static_cast<double>(curve_points_);
      const double f = excited_fraction(Channel::dump, s);
      if (f <= dump_curve_.back().second) break;
      dump_curve_.emplace_back(s, f);
    }
  }

  const LambdaSystem* sys_;
  double tolerance_;
  std::size_t curve_points_;
  mutable std::mutex mutex_;
  mutable std::map<double, double> pump_cache_;
  mutable std::vector<std::pair<double, double>> dump_curve_;
  PairDrive pump_drive_;
  PairDrive dump_drive_;
};

// ---------------------------------------------------------------------------
// Pulse trains

struct AccumulationRow {
  int n = 0;
  double pop_input = 0.0;
  double pop_excited_peak = 0.0;
  double pop_excited = 0.0;  // left on the excited surface after the pair
  double pop_target = 0.0;
  double pop_leaked = 0.0;   // everything on g1/g2 outside input and target
  double pop_lost = 0.0;     // removed by decay
  double purity = 0.0;       // target level / g2 norm
  double input_purity = 0.0; // input level / g1 norm
  double pump_area = 0.0;
  double dump_area = 0.0;
  double pump_scale = 0.0;
  double dump_scale = 0.0;
  std::vector<double> neighbour_pop;
};

struct AccumulationRecord {
  std::vector<AccumulationRow> rows;
  std::vector<int> neighbour_v;
  double pump_excited_fraction = 0.0;  // measured single-pump excitation of the input level
  double raman_phase = 0.0;

  const AccumulationRow& final() const { return rows.back(); }
  double efficiency() const { return rows.empty() ? 0.0 : rows.back().pop_target; }
};

struct TrainOptions {
  double gamma = 0.0;
  double pump_intensity = 1.0;  // multiplies calibrated intensities
  double dump_intensity = 1.0;
  std::function<void(const ThreeSurfaceState&, int pair, std::size_t step)> observe;
  std::size_t sample_every = 0;
};

/// Runs the schedule from the input level. Errors carry the failing pair index.
inline AccumulationRecord run_train(const LambdaSystem& sys, const PulsePairSchedule& schedule,
                                    const AreaCalibrator& calibrator, const TrainOptions& opt = {}) {
  if (!(schedule.repetition_time >= sys.drive.window())) {
    throw InvalidArgument("run_train: repetition time is shorter than the pulse-pair window");
  }
  AccumulationRecord rec;
  rec.neighbour_v = sys.spec.neighbour_v;
  rec.raman_phase = raman_phase(sys.input.absolute_energy(), sys.target.absolute_energy(), schedule.repetition_time);
  const auto stepper = sys.stepper();
  auto state = ThreeSurfaceState::from_level(sys.input, Surface::input);
  std::vector<Projector> proj{{Surface::input, &sys.input}, {Surface::target, &sys.target}};
  for (const auto& l : sys.neighbours) proj.push_back({Surface::input, &l});
  const double gap = schedule.repetition_time - sys.drive.window();
  const double sqrt_pump = std::sqrt(opt.pump_intensity);
  const double sqrt_dump = std::sqrt(opt.dump_intensity);

  double pop_input = 1.0;
  double pop_target = 0.0;
  for (int n = 1; n <= schedule.pairs; ++n) {
    const auto k = static_cast<std::size_t>(n - 1);
    try {
      AccumulationRow row;
      row.n = n;
      row.pump_area = schedule.pump_area[k];
      const double s_p = calibrator.pump_scale(row.pump_area);
      double s_d = 0.0;
      if (schedule.matched_dump()) {
        const double p_pump = area_to_fraction(row.pump_area);
        const double p_dump = matched_dump_fraction(p_pump * pop_input, pop_target);
        row.dump_area = fraction_to_area(p_dump);
        s_d = calibrator.dump_scale_for_fraction(p_dump);
      } else {
        row.dump_area = schedule.dump_area[k];
        s_d = calibrator.dump_scale(row.dump_area);
      }
      row.pump_scale = s_p * sqrt_pump;
      row.dump_scale = s_d * sqrt_dump;
      const double dump_phase = -static_cast<double>(n - 1) * schedule.inter_pair_phase;
      std::function<void(const ThreeSurfaceState&, std::size_t)> obs;
      if (opt.observe) obs = [&](const ThreeSurfaceState& s, std::size_t j) { opt.observe(s, n, j); };
      const auto diag = propagate_pulse_pair(state, stepper, sys.drive, row.pump_scale, row.dump_scale, dump_phase,
                                             obs, opt.sample_every);
      const auto m = measure_populations(state, proj);
      row.pop_input = m.level_population[0];
      row.pop_target = m.level_population[1];
      row.pop_excited_peak = diag.peak_excited;
      row.pop_excited = m.surface_norm[1];
      row.pop_leaked = (m.surface_norm[0] - row.pop_input) + (m.surface_norm[2] - row.pop_target);
      row.pop_lost = 1.0 - (m.surface_norm[0] + m.surface_norm[1] + m.surface_norm[2]);
      row.purity = m.purity(1, Surface::target);
      row.input_purity = m.purity(0, Surface::input);
      for (std::size_t j = 0; j < sys.neighbours.size(); ++j) row.neighbour_pop.push_back(m.level_population[2 + j]);
      pop_input = row.pop_input;
      pop_target = row.pop_target;
      rec.rows.push_back(std::move(row));
      if (n < schedule.pairs) free_evolve(state, sys.basis_ptrs(), gap, opt.gamma, sys.spec.capture);
    } catch (const Error& e) {
      throw NumericalFailure("pulse pair " + std::to_string(n) + ": " + e.what());
    }
  }
  rec.pump_excited_fraction = calibrator.pump_fraction(calibrator.pump_scale(schedule.pump_area.front()) * sqrt_pump);
  return rec;
}

// ---------------------------------------------------------------------------
// Analyses

struct PowerLawFit {
  bool fitted = false;
  double exponent = 0.0;
  std::string diagnostic;
};

/// Least-squares slope of log y against log n over rows [first, last).
inline PowerLawFit fit_power_law(const std::vector<std::pair<double, double>>& points) {
  PowerLawFit fit;
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  std::size_t m = 0;
  for (const auto& [n, y] : points) {
    if (!(y > 0.0)) {
      fit.diagnostic = "non-positive value at n = " + std::to_string(static_cast<int>(n)) + "; fit skipped";
      return fit;
    }
    const double x = std::log(n);
    const double z = std::log(y);
    sx += x;
    sy += z;
    sxx += x * x;
    sxy += x * z;
    ++m;
  }
  if (m < 2) {
    fit.diagnostic = "fewer than two points";
    return fit;
  }
  const double den = static_cast<double>(m) * sxx - sx * sx;
  fit.exponent = (static_cast<double>(m) * sxy - sx * sy) / den;
  fit.fitted = true;
  return fit;
}

struct LeakageAnalysis {
  PowerLawFit leak;       // total leaked population
  PowerLawFit depletion;  // 1 - pop_input
  std::vector<PowerLawFit> neighbours;
};

/// Power-law exponents over the second half of the train.
inline LeakageAnalysis leakage_exponent(const AccumulationRecord& rec) {
  LeakageAnalysis out;
  const std::size_t n = rec.rows.size();
  const std::size_t first = n / 2;
  std::vector<std::pair<double, double>> leak, depletion;
  std::vector<std::vector<std::pair<double, double>>> neighbour(rec.neighbour_v.size());
  for (std::size_t k = first; k < n; ++k) {
    const auto& r = rec.rows[k];
    leak.emplace_back(r.n, r.pop_leaked);
    depletion.emplace_back(r.n, 1.0 - r.pop_input);
    for (std::size_t j = 0; j < neighbour.size(); ++j) neighbour[j].emplace_back(r.n, r.neighbour_pop[j]);
  }
  out.leak = fit_power_law(leak);
  out.depletion = fit_power_law(depletion);
  for (const auto& pts : neighbour) out.neighbours.push_back(fit_power_law(pts));
  return out;
}

struct RobustnessEntry {
  double factor = 1.0;
  double efficiency = 0.0;
  double pop_input = 0.0;
};

/// Number of worker threads: COMBCTL_THREADS if set and positive, else the
/// hardware concurrency.
inline unsigned worker_threads(unsigned requested = 0) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("COMBCTL_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) return static_cast<unsigned>(n);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

/// Reruns the train with the pump and/or dump intensity scaled by each factor.
inline std::vector<RobustnessEntry> robustness_scan(const LambdaSystem& sys, const PulsePairSchedule& schedule,
                                                    const AreaCalibrator& calibrator, const TrainOptions& base,
                                                    const std::vector<double>& factors, bool scale_pump = true,
                                                    bool scale_dump = true, unsigned threads = 0) {
  for (double f : factors) {
    if (!(f > 0.0)) throw InvalidArgument("robustness_scan: intensity factors must be positive");
  }
  std::vector<RobustnessEntry> out(factors.size());
  std::vector<std::exception_ptr> errors(factors.size());
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t k = next++; k < factors.size(); k = next++) {
      try {
        TrainOptions opt = base;
        opt.observe = {};
        if (scale_pump) opt.pump_intensity *= factors[k];
        if (scale_dump) opt.dump_intensity *= factors[k];
        const auto rec = run_train(sys, schedule, calibrator, opt);
        out[k] = {factors[k], rec.efficiency(), rec.final().pop_input};
      } catch (...) {
        errors[k] = std::current_exception();
      }
    }
  };
  const unsigned n = std::min<unsigned>(worker_threads(threads), static_cast<unsigned>(factors.size()));
  if (n <= 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < n; ++t) pool.emplace_back(work);
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

}  // namespace combctl
