#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <boost/math/interpolators/makima.hpp>

#include "combctl/error.hpp"
#include "combctl/franck_condon.hpp"
#include "combctl/units.hpp"

namespace combctl {

/// Uniform detuning grid omega_k = (k - M) * spacing, k = 0..2M. Symmetric
/// about zero and always containing the carrier itself.
struct DetuningGrid {
  double spacing = 0.0;
  std::size_t half_points = 0;

  DetuningGrid() = default;
  DetuningGrid(double d_omega, std::size_t m) : spacing(d_omega), half_points(m) {
    if (!(d_omega > 0.0) || m == 0) throw InvalidArgument("DetuningGrid: spacing and half width must be positive");
  }
  /// Grid with at least the requested half width.
  static DetuningGrid covering(double half_width, double d_omega) {
    return DetuningGrid(d_omega, static_cast<std::size_t>(std::ceil(half_width / d_omega)));
  }

  std::size_t size() const { return 2 * half_points + 1; }
  double omega(std::size_t k) const { return (static_cast<double>(k) - static_cast<double>(half_points)) * spacing; }
  double max_omega() const { return spacing * static_cast<double>(half_points); }
  /// Time period of a field synthesized from this grid.
  double period() const { return units::kTwoPi / spacing; }

  friend bool operator==(const DetuningGrid&, const DetuningGrid&) = default;
};

namespace detail {

template <typename T>
T interpolate_on_grid(const DetuningGrid& grid, std::span<const T> values, double w) {
  const double x = w / grid.spacing + static_cast<double>(grid.half_points);
  if (x < 0.0 || x > static_cast<double>(grid.size() - 1)) return T{};
  const auto k = std::min(static_cast<std::size_t>(x), grid.size() - 2);
  const double f = x - static_cast<double>(k);
  return values[k] * (1.0 - f) + values[k + 1] * f;
}

}  // namespace detail

/// Complex spectral amplitude about a carrier, in the carrier's rotating frame.
/// The time envelope is eps(t) = field_scale/(2 pi) * integral E(w) exp(-i w t) dw.
struct SpectralPulse {
  double carrier = 0.0;
  DetuningGrid grid;
  std::vector<Complex> amplitude;
  double field_scale = 1.0;

  Complex at(double w) const { return detail::interpolate_on_grid<Complex>(grid, amplitude, w); }

  double energy() const {
    double s = 0.0;
    for (const auto& a : amplitude) s += std::norm(a);
    return s * grid.spacing;
  }
};

/// Spectral phase acquired by the excited packet between pump and dump.
struct DispersionPhase {
  DetuningGrid grid;
  std::vector<double> samples;
  double delay_reference = 0.0;
  std::vector<std::pair<int, double>> level_phases;  // (v_excited, phase at its detuning)

  double at(double w) const { return detail::interpolate_on_grid<double>(grid, samples, w); }

  /// Exact phase at an excited level inside the window, else the grid value at w.
  double at_level(int v, double w) const {
    for (const auto& [lv, ph] : level_phases) {
      if (lv == v) return ph;
    }
    return at(w);
  }
};

/// phi_D at each excited level is -(E_v - E_ref) T, E_ref the carrier-resonant
/// energy; between levels it is interpolated linearly and beyond the outermost
/// levels it continues with the pure-delay slope -T.
inline DispersionPhase dispersion_phase(const FCSpectrum& pump_fc, double delay, const DetuningGrid& grid) {
  if (delay < 0.0) throw InvalidArgument("dispersion_phase: delay must be non-negative");
  if (pump_fc.entries.empty()) throw InvalidArgument("dispersion_phase: no excited levels in the window");
  DispersionPhase out;
  out.grid = grid;
  out.delay_reference = delay;
  std::vector<std::pair<double, double>> nodes;
  for (const auto& e : pump_fc.entries) {
    // detuning = E_v - E_ref exactly, since the carrier defines E_ref.
    const double phase = -e.detuning * delay;
    out.level_phases.emplace_back(e.v_excited, phase);
    nodes.emplace_back(e.detuning, phase);
  }
  std::sort(nodes.begin(), nodes.end());
  out.samples.resize(grid.size());
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const double w = grid.omega(k);
    if (w <= nodes.front().first) {
      out.samples[k] = nodes.front().second - (w - nodes.front().first) * delay;
    } else if (w >= nodes.back().first) {
      out.samples[k] = nodes.back().second - (w - nodes.back().first) * delay;
    } else {
      auto hi = std::upper_bound(nodes.begin(), nodes.end(), std::make_pair(w, -1e300));
      auto lo = hi - 1;
      const double f = (w - lo->first) / (hi->first - lo->first);
      out.samples[k] = lo->second * (1.0 - f) + hi->second * f;
    }
  }
  return out;
}

/// Gaussian common amplitude whose power spectrum |A|^2 has the given FWHM.
inline std::vector<double> gaussian_amplitude(const DetuningGrid& grid, double intensity_fwhm, double center = 0.0) {
  if (!(intensity_fwhm > 0.0)) throw InvalidArgument("gaussian_amplitude: FWHM must be positive");
  std::vector<double> a(grid.size());
  const double c = 2.0 * std::log(2.0) / (intensity_fwhm * intensity_fwhm);
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const double x = grid.omega(k) - center;
    a[k] = std::exp(-c * x * x);
  }
  return a;
}

/// Piecewise-linear common amplitude from (detuning, amplitude) nodes; zero outside.
inline std::vector<double> tabulated_amplitude(const DetuningGrid& grid, std::vector<std::pair<double, double>> nodes) {
  if (nodes.size() < 2) throw InvalidArgument("tabulated_amplitude: need at least two nodes");
  std::sort(nodes.begin(), nodes.end());
  std::vector<double> a(grid.size(), 0.0);
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const double w = grid.omega(k);
    if (w < nodes.front().first || w > nodes.back().first) continue;
    auto hi = std::lower_bound(nodes.begin(), nodes.end(), std::make_pair(w, -1e300));
    if (hi == nodes.begin()) {
      a[k] = hi->second;
      continue;
    }
    auto lo = hi - 1;
    const double f = (w - lo->first) / (hi->first - lo->first);
    a[k] = lo->second * (1.0 - f) + hi->second * f;
  }
  return a;
}

/// How the sign pattern of the dump dipoles is distributed between the pulses.
enum class ShapingGauge {
  /// E_p ~ F_d A and E_d ~ F_p A exp(i phi_D) with A taken as given.
  literal,
  /// A additionally carries sign(F_d) at each level, so the pump follows the
  /// slow envelope |F_d| and the sign alternation lands on the delayed dump.
  dump_envelope,
};

struct PulsePair {
  SpectralPulse pump;
  SpectralPulse dump;
};

namespace detail {

/// Interpolates level-sampled values in modulus and unwrapped phase (each
/// step taken as the shortest turn) with modified Akima splines, ramping the
/// modulus to zero one mean level spacing beyond the outermost levels.
inline std::vector<Complex> spread_levels(const DetuningGrid& grid, std::vector<std::pair<double, Complex>> nodes) {
  std::sort(nodes.begin(), nodes.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  const double pad = nodes.size() > 1 ? (nodes.back().first - nodes.front().first) / static_cast<double>(nodes.size() - 1)
                                      : 4.0 * grid.spacing;
  std::vector<double> w{nodes.front().first - pad};
  std::vector<double> mod{0.0};
  std::vector<double> arg{std::arg(nodes.front().second)};
  for (const auto& [x, c] : nodes) {
    double step = std::arg(c) - arg.back();
    step -= units::kTwoPi * std::round(step / units::kTwoPi);
    w.push_back(x);
    mod.push_back(std::abs(c));
    arg.push_back(arg.back() + step);
  }
  w.push_back(nodes.back().first + pad);
  mod.push_back(0.0);
  arg.push_back(arg.back());
  const double lo = w.front();
  const double hi = w.back();
  std::vector<Complex> out(grid.size());
  if (w.size() < 4) {
    for (std::size_t k = 0; k < grid.size(); ++k) {
      const double x = grid.omega(k);
      if (x <= lo || x >= hi) continue;
      const auto j = static_cast<std::size_t>(std::upper_bound(w.begin(), w.end(), x) - w.begin());
      const double f = (x - w[j - 1]) / (w[j] - w[j - 1]);
      out[k] = std::polar(mod[j - 1] * (1.0 - f) + mod[j] * f, arg[j - 1] * (1.0 - f) + arg[j] * f);
    }
    return out;
  }
  auto w2 = w;
  const boost::math::interpolators::makima<std::vector<double>> fm(std::move(w), std::move(mod));
  const boost::math::interpolators::makima<std::vector<double>> fa(std::move(w2), std::move(arg));
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const double x = grid.omega(k);
    if (x <= lo || x >= hi) continue;
    out[k] = std::polar(std::max(0.0, fm(x)), fa(x));
  }
  return out;
}

inline void normalize_peak(std::vector<Complex>& a, const char* what) {
  double peak = 0.0;
  for (const auto& x : a) peak = std::max(peak, std::abs(x));
  if (!(peak > 0.0)) throw DegenerateDesign(std::string("design_pair: ") + what + " spectrum vanishes");
  for (auto& x : a) x /= peak;
}

}  // namespace detail

/// Differential shaping: the pump follows the dump dipoles and the dump follows
/// the pump dipoles times exp(i phi_D), both multiplied by the common A(w).
/// Each output is normalized to unit peak amplitude (field_scale = 1).
inline PulsePair design_pair(const FCSpectrum& fc_pump, const FCSpectrum& fc_dump, std::span<const double> common,
                             const DispersionPhase& phase, ShapingGauge gauge = ShapingGauge::dump_envelope) {
  const auto& grid = phase.grid;
  if (common.size() != grid.size()) throw GridMismatch("design_pair: common amplitude is not on the detuning grid");
  if (std::none_of(common.begin(), common.end(), [](double a) { return a != 0.0; })) {
    throw DegenerateDesign("design_pair: common amplitude A is identically zero");
  }
  const double tol = 1e-9 * std::max(grid.max_omega(), 1e-300);
  std::vector<std::pair<double, Complex>> pump_nodes;
  std::vector<std::pair<double, Complex>> dump_nodes;
  for (const auto& p : fc_pump.entries) {
    const auto* d = fc_dump.find(p.v_excited);
    if (d == nullptr) continue;
    if (std::abs(d->detuning - p.detuning) > tol) {
      throw GridMismatch("design_pair: pump and dump detunings of level " + std::to_string(p.v_excited) +
                         " differ; carriers are not Raman matched");
    }
    const double sigma = (gauge == ShapingGauge::dump_envelope && d->amplitude < 0.0) ? -1.0 : 1.0;
    pump_nodes.emplace_back(p.detuning, Complex(d->amplitude * sigma, 0.0));
    dump_nodes.emplace_back(p.detuning, p.amplitude * sigma * std::polar(1.0, phase.at_level(p.v_excited, p.detuning)));
  }
  if (pump_nodes.empty()) throw DegenerateDesign("design_pair: pump and dump spectra share no excited level");

  PulsePair pair;
  pair.pump.carrier = fc_pump.carrier;
  pair.dump.carrier = fc_dump.carrier;
  pair.pump.grid = grid;
  pair.dump.grid = grid;
  pair.pump.amplitude = detail::spread_levels(grid, std::move(pump_nodes));
  pair.dump.amplitude = detail::spread_levels(grid, std::move(dump_nodes));
  for (std::size_t k = 0; k < grid.size(); ++k) {
    pair.pump.amplitude[k] *= common[k];
    pair.dump.amplitude[k] *= common[k];
  }
  detail::normalize_peak(pair.pump.amplitude, "pump");
  detail::normalize_peak(pair.dump.amplitude, "dump");
  return pair;
}

/// Quadratic spectral phase exp(i gdd/2 w^2); positive gdd puts red before blue.
inline SpectralPulse apply_chirp(SpectralPulse pulse, double gdd) {
  if (gdd == 0.0) return pulse;
  for (std::size_t k = 0; k < pulse.grid.size(); ++k) {
    const double w = pulse.grid.omega(k);
    pulse.amplitude[k] *= std::polar(1.0, 0.5 * gdd * w * w);
  }
  return pulse;
}

/// Uniformly sampled complex time envelope.
struct TimeEnvelope {
  double t0 = 0.0;
  double dt = 0.0;
  std::vector<Complex> samples;

  double time(std::size_t j) const { return t0 + dt * static_cast<double>(j); }
  double energy() const {
    double s = 0.0;
    for (const auto& x : samples) s += std::norm(x);
    return s * dt;
  }
};

/// Direct band-limited evaluation of the envelope at t0 + j dt, j < n.
inline std::vector<Complex> evaluate_envelope(const SpectralPulse& pulse, double t0, double dt, std::size_t n) {
  std::vector<Complex> out(n);
  const double norm = pulse.field_scale * pulse.grid.spacing / units::kTwoPi;
  constexpr std::size_t kReanchor = 256;
  for (std::size_t k = 0; k < pulse.grid.size(); ++k) {
    const Complex a = pulse.amplitude[k];
    if (a == Complex{}) continue;
    const double w = pulse.grid.omega(k);
    const Complex step = std::polar(1.0, -w * dt);
    Complex z;
    for (std::size_t j = 0; j < n; ++j) {
      if (j % kReanchor == 0) z = std::polar(1.0, -w * (t0 + dt * static_cast<double>(j)));
      out[j] += a * z;
      z *= step;
    }
  }
  for (auto& x : out) x *= norm;
  return out;
}

/// Time envelope on round(span/dt) samples starting at -span/2. Rejects
/// sampling below Nyquist, spans longer than the spectral period, and pulses
/// that still carry >= 1e-6 of their energy in the outer 1% at either edge.
inline TimeEnvelope synthesize_time_domain(const SpectralPulse& pulse, double dt, double span) {
  if (!(dt > 0.0) || !(span > 0.0)) throw InvalidArgument("synthesize_time_domain: dt and span must be positive");
  double w_max = 0.0;
  for (std::size_t k = 0; k < pulse.grid.size(); ++k) {
    if (pulse.amplitude[k] != Complex{}) w_max = std::max(w_max, std::abs(pulse.grid.omega(k)));
  }
  if (w_max * dt > units::kPi) throw Aliasing("synthesize_time_domain: dt undersamples the spectrum");
  if (span > pulse.grid.period() * (1.0 + 1e-12)) {
    throw Aliasing("synthesize_time_domain: span exceeds the period set by the detuning spacing");
  }
  const auto n = static_cast<std::size_t>(std::llround(span / dt));
  TimeEnvelope env;
  env.t0 = -0.5 * span;
  env.dt = dt;
  env.samples = evaluate_envelope(pulse, env.t0, dt, n);
  const std::size_t edge = std::max<std::size_t>(1, n / 100);
  double total = 0.0;
  double rim = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    const double e = std::norm(env.samples[j]);
    total += e;
    if (j < edge || j + edge >= n) rim += e;
  }
  if (total > 0.0 && rim >= 1e-6 * total) {
    throw Aliasing("synthesize_time_domain: pulse reaches the edges of the span");
  }
  return env;
}

/// Spectrum of a sampled envelope on a detuning grid (unit field scale).
inline std::vector<Complex> analyze_time_domain(const TimeEnvelope& env, const DetuningGrid& grid) {
  std::vector<Complex> out(grid.size());
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const double w = grid.omega(k);
    Complex acc;
    for (std::size_t j = 0; j < env.samples.size(); ++j) acc += env.samples[j] * std::polar(1.0, w * env.time(j));
    out[k] = acc * env.dt;
  }
  return out;
}

/// Full width at half maximum of |eps(t)|^2, linearly interpolated.
inline double intensity_fwhm(const TimeEnvelope& env) {
  const auto n = env.samples.size();
  std::vector<double> I(n);
  for (std::size_t j = 0; j < n; ++j) I[j] = std::norm(env.samples[j]);
  const auto peak_it = std::max_element(I.begin(), I.end());
  const double half = 0.5 * *peak_it;
  const auto p = static_cast<std::size_t>(peak_it - I.begin());
  std::size_t a = p;
  while (a > 0 && I[a - 1] >= half) --a;
  std::size_t b = p;
  while (b + 1 < n && I[b + 1] >= half) ++b;
  const double left = (a == 0) ? env.time(0) : env.time(a - 1) + env.dt * (half - I[a - 1]) / (I[a] - I[a - 1]);
  const double right = (b + 1 == n) ? env.time(n - 1) : env.time(b) + env.dt * (I[b] - half) / (I[b] - I[b + 1]);
  return right - left;
}

/// First-order excited fraction sum_v |(s/2) E(w_v) F_v|^2 for unit source population.
inline double first_order_fraction(const SpectralPulse& pulse, const FCSpectrum& fc) {
  double s = 0.0;
  for (const auto& e : fc.entries) s += std::norm(pulse.at(e.detuning) * e.amplitude);
  return 0.25 * pulse.field_scale * pulse.field_scale * s;
}

struct AreaCalibration {
  double field_scale = 0.0;
  double excited_fraction = 0.0;
};

inline double area_to_fraction(double area) {
  const double s = std::sin(0.5 * area);
  return s * s;
}

inline double fraction_to_area(double p) { return 2.0 * std::asin(std::sqrt(std::clamp(p, 0.0, 1.0))); }

/// Field scale for which first-order theory moves sin^2(A/2) of the source
/// level into the excited surface. Fails when the requested fraction exceeds
/// the Franck-Condon weight the pulse spectrum reaches.
inline AreaCalibration calibrate_area(const SpectralPulse& pulse, const FCSpectrum& fc, double area) {
  if (!(area > 0.0) || area > units::kPi + 1e-12) throw InvalidArgument("calibrate_area: area must lie in (0, pi]");
  const double p = area_to_fraction(area);
  double reach = 0.0;
  double unit = 0.0;
  for (const auto& e : fc.entries) {
    const Complex a = pulse.at(e.detuning);
    if (a == Complex{}) continue;
    reach += e.amplitude * e.amplitude;
    unit += std::norm(a * e.amplitude);
  }
  reach /= fc.dipole * fc.dipole;
  if (!(unit > 0.0)) throw DegenerateDesign("calibrate_area: pulse does not overlap the Franck-Condon spectrum");
  if (p > reach + 1e-12) {
    throw Unachievable("calibrate_area: requested fraction " + std::to_string(p) + " exceeds reachable FC weight " +
                       std::to_string(reach));
  }
  return {2.0 * std::sqrt(p / unit), p};
}

}  // namespace combctl
