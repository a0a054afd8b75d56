#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "combctl/error.hpp"
#include "combctl/fft.hpp"
#include "combctl/potentials.hpp"
#include "combctl/pulses.hpp"
#include "combctl/units.hpp"

namespace combctl {

/// Surfaces of the Lambda system: input ground copy, excited, target ground copy.
enum class Surface : std::size_t { input = 0, excited = 1, target = 2 };

inline constexpr std::size_t kSurfaces = 3;
inline constexpr std::size_t index_of(Surface s) { return static_cast<std::size_t>(s); }

/// Three wavefunctions on one radial grid.
struct ThreeSurfaceState {
  RadialGrid grid;
  std::array<std::vector<Complex>, kSurfaces> psi;
  double elapsed_time = 0.0;

  static ThreeSurfaceState empty(const RadialGrid& g) {
    ThreeSurfaceState s;
    s.grid = g;
    for (auto& w : s.psi) w.assign(g.size(), Complex{});
    return s;
  }

  static ThreeSurfaceState from_level(const VibrationalLevel& level, Surface where) {
    auto s = empty(level.grid);
    s.psi[index_of(where)] = level.wavefunction;
    return s;
  }

  std::vector<Complex>& operator[](Surface s) { return psi[index_of(s)]; }
  const std::vector<Complex>& operator[](Surface s) const { return psi[index_of(s)]; }

  double norm(Surface s) const {
    double acc = 0.0;
    for (const auto& x : psi[index_of(s)]) acc += std::norm(x);
    return acc * grid.spacing();
  }
  double total_norm() const { return norm(Surface::input) + norm(Surface::excited) + norm(Surface::target); }
};

/// Rotating-frame Hamiltonian of the Lambda system. The excited surface is
/// shifted down by the pump carrier and the target copy up by (dump - pump)
/// carrier, so with Raman-matched carriers input and target levels are
/// degenerate. `energy_reference` is removed from all three surfaces.
struct FrameHamiltonian {
  RadialGrid grid;
  double mass = 0.0;
  std::array<std::vector<double>, kSurfaces> potential;  // absolute, T_e included
  double pump_carrier = 0.0;
  double dump_carrier = 0.0;
  double energy_reference = 0.0;

  double frame_shift(Surface s) const {
    switch (s) {
      case Surface::input: return energy_reference;
      case Surface::excited: return energy_reference + pump_carrier;
      case Surface::target: return energy_reference + pump_carrier - dump_carrier;
    }
    return 0.0;
  }

  /// Rotating-frame energy of a state with absolute energy E on surface s.
  double frame_energy(Surface s, double absolute) const { return absolute - frame_shift(s); }

  double diagonal(Surface s, std::size_t i) const { return potential[index_of(s)][i] - frame_shift(s); }

  double max_potential_magnitude() const {
    double m = 0.0;
    for (std::size_t s = 0; s < kSurfaces; ++s) {
      for (std::size_t i = 0; i < grid.size(); ++i) m = std::max(m, std::abs(diagonal(static_cast<Surface>(s), i)));
    }
    return m;
  }

  double max_kinetic_energy() const {
    const double k = units::kPi / grid.spacing();
    return 0.5 * k * k / mass;
  }
};

inline FrameHamiltonian make_frame_hamiltonian(const MorsePotential& input, const MorsePotential& excited,
                                               const MorsePotential& target, const RadialGrid& grid, double pump_carrier,
                                               double dump_carrier, double energy_reference) {
  if (input.reduced_mass != excited.reduced_mass || input.reduced_mass != target.reduced_mass) {
    throw InvalidArgument("make_frame_hamiltonian: surfaces of one molecule must share the reduced mass");
  }
  FrameHamiltonian h;
  h.grid = grid;
  h.mass = input.reduced_mass;
  h.potential = {sample_potential(input, grid), sample_potential(excited, grid), sample_potential(target, grid)};
  h.pump_carrier = pump_carrier;
  h.dump_carrier = dump_carrier;
  h.energy_reference = energy_reference;
  return h;
}

/// Largest step keeping both the kinetic and the potential phase per step
/// under `max_phase` radians.
inline double stable_time_step(const FrameHamiltonian& h, double max_phase = 0.5) {
  return 0.999 * max_phase / std::max(h.max_kinetic_energy(), h.max_potential_magnitude());
}

enum class CouplingMethod {
  /// Exact exponential of the local 3x3 Hermitian matrix at every grid point.
  exact,
  /// exp(-iV dt/2) exp(-iC dt) exp(-iV dt/2) with the r-independent coupling C
  /// exponentiated in closed form; error O(dt^3 [V, C]) per step.
  split,
};

/// Symmetric (Strang) split-operator stepper for a fixed time step.
class SplitOperator {
 public:
  SplitOperator(const FrameHamiltonian& ham, double dt, CouplingMethod method = CouplingMethod::exact)
      : ham_(ham), dt_(dt), method_(method), fft_(ham.grid.size()) {
    if (!(dt > 0.0)) throw InvalidArgument("SplitOperator: dt must be positive");
    const double kinetic_phase = ham.max_kinetic_energy() * dt;
    const double potential_phase = ham.max_potential_magnitude() * dt;
    if (kinetic_phase >= 0.5 || potential_phase >= 0.5) {
      throw InvalidArgument("SplitOperator: dt violates the 0.5 rad phase policy (kinetic " +
                            std::to_string(kinetic_phase) + ", potential " + std::to_string(potential_phase) + ")");
    }
    const std::size_t n = ham.grid.size();
    const double dk = units::kTwoPi / (static_cast<double>(n) * ham.grid.spacing());
    half_kinetic_.resize(n);
    full_kinetic_.resize(n);
    for (std::size_t j = 0; j < n; ++j) {
      const double k = dk * (j < n / 2 ? static_cast<double>(j) : static_cast<double>(j) - static_cast<double>(n));
      const double e = 0.5 * k * k / ham.mass;
      half_kinetic_[j] = std::polar(1.0 / static_cast<double>(n), -0.5 * e * dt);
      full_kinetic_[j] = std::polar(1.0 / static_cast<double>(n), -e * dt);
    }
    for (std::size_t s = 0; s < kSurfaces; ++s) {
      full_potential_[s].resize(n);
      half_potential_[s].resize(n);
      for (std::size_t i = 0; i < n; ++i) {
        const double v = ham.diagonal(static_cast<Surface>(s), i);
        full_potential_[s][i] = std::polar(1.0, -v * dt);
        half_potential_[s][i] = std::polar(1.0, -0.5 * v * dt);
      }
    }
  }

  double dt() const { return dt_; }
  const FrameHamiltonian& hamiltonian() const { return ham_; }

  /// One full Strang step with coupling Rabi envelopes evaluated at the midpoint.
  void step(ThreeSurfaceState& state, Complex pump_rabi, Complex dump_rabi) const {
    kinetic(state, half_kinetic_);
    potential(state, pump_rabi, dump_rabi);
    kinetic(state, half_kinetic_);
    state.elapsed_time += dt_;
    check_finite(state);
  }

  /// Steps through midpoint Rabi envelopes; adjacent half kinetic steps are
  /// fused. `observe` (optional) sees the completed state every `sample_every` steps.
  void run(ThreeSurfaceState& state, std::span<const Complex> pump_rabi, std::span<const Complex> dump_rabi,
           const std::function<void(const ThreeSurfaceState&, std::size_t)>& observe = {},
           std::size_t sample_every = 0, const std::function<void(const ThreeSurfaceState&)>& on_norms = {}) const {
    const std::size_t n = pump_rabi.size();
    if (dump_rabi.size() != n) throw InvalidArgument("SplitOperator::run: envelope lengths differ");
    if (n == 0) return;
    kinetic(state, half_kinetic_);
    for (std::size_t j = 0; j < n; ++j) {
      potential(state, pump_rabi[j], dump_rabi[j]);
      state.elapsed_time += dt_;
      if (on_norms) on_norms(state);  // surface norms are invariant under the kinetic factor
      const bool last = j + 1 == n;
      const bool sample = observe && sample_every > 0 && ((j + 1) % sample_every == 0 || last);
      if (last || sample) {
        kinetic(state, half_kinetic_);
        check_finite(state);
        if (sample) observe(state, j + 1);
        if (!last) kinetic(state, half_kinetic_);
      } else {
        kinetic(state, full_kinetic_);
        if ((j & 63) == 0) check_finite(state);
      }
    }
  }

 private:
  void kinetic(ThreeSurfaceState& state, const std::vector<Complex>& factor) const {
    for (auto& w : state.psi) {
      fft_.forward(w);
      for (std::size_t j = 0; j < w.size(); ++j) w[j] *= factor[j];
      fft_.backward(w);
    }
  }

  void potential(ThreeSurfaceState& state, Complex pump_rabi, Complex dump_rabi) const {
    auto& g1 = state.psi[0];
    auto& ex = state.psi[1];
    auto& g2 = state.psi[2];
    const std::size_t n = g1.size();
    const double a = 0.5 * std::abs(pump_rabi);
    const double b = 0.5 * std::abs(dump_rabi);
    if (a * dt_ < 1e-17 && b * dt_ < 1e-17) {
      for (std::size_t i = 0; i < n; ++i) {
        g1[i] *= full_potential_[0][i];
        ex[i] *= full_potential_[1][i];
        g2[i] *= full_potential_[2][i];
      }
      return;
    }
    // <e|H|g1> = pump/2 and <e|H|g2> = dump/2. The diagonal gauge
    // diag(e^{-i arg pump}, 1, e^{-i arg dump}) makes the local matrix real.
    const Complex in_gauge = std::polar(1.0, std::arg(pump_rabi));
    const Complex tg_gauge = std::polar(1.0, std::arg(dump_rabi));
    if (method_ == CouplingMethod::split) {
      const auto c = closed_form_coupling(a, b);
      for (std::size_t i = 0; i < n; ++i) {
        const Complex x0 = g1[i] * half_potential_[0][i] * in_gauge;
        const Complex x1 = ex[i] * half_potential_[1][i];
        const Complex x2 = g2[i] * half_potential_[2][i] * tg_gauge;
        const Complex y0 = c[0] * x0 + c[1] * x1 + c[2] * x2;
        const Complex y1 = c[1] * x0 + c[3] * x1 + c[4] * x2;
        const Complex y2 = c[2] * x0 + c[4] * x1 + c[5] * x2;
        g1[i] = y0 * std::conj(in_gauge) * half_potential_[0][i];
        ex[i] = y1 * half_potential_[1][i];
        g2[i] = y2 * std::conj(tg_gauge) * half_potential_[2][i];
      }
      return;
    }
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> solver;
    Eigen::Vector3d diag;
    Eigen::Vector2d sub(a, b);
    for (std::size_t i = 0; i < n; ++i) {
      diag << ham_.diagonal(Surface::input, i), ham_.diagonal(Surface::excited, i), ham_.diagonal(Surface::target, i);
      solver.computeFromTridiagonal(diag, sub, Eigen::ComputeEigenvectors);
      const auto& q = solver.eigenvectors();
      const auto& lam = solver.eigenvalues();
      const Complex x[3] = {g1[i] * in_gauge, ex[i], g2[i] * tg_gauge};
      Complex proj[3];
      for (int m = 0; m < 3; ++m) {
        proj[m] = (q(0, m) * x[0] + q(1, m) * x[1] + q(2, m) * x[2]) * std::polar(1.0, -lam(m) * dt_);
      }
      Complex y[3];
      for (int r = 0; r < 3; ++r) y[r] = q(r, 0) * proj[0] + q(r, 1) * proj[1] + q(r, 2) * proj[2];
      g1[i] = y[0] * std::conj(in_gauge);
      ex[i] = y[1];
      g2[i] = y[2] * std::conj(tg_gauge);
    }
  }

  /// exp(-i C dt) for C = [[0,a,0],[a,0,b],[0,b,0]] as the symmetric entries
  /// (00, 01, 02, 11, 12, 22).
  std::array<Complex, 6> closed_form_coupling(double a, double b) const {
    const double w = std::sqrt(a * a + b * b);
    const double cw = std::cos(w * dt_);
    const double sw = std::sin(w * dt_);
    const double c1 = (cw - 1.0) / (w * w);
    const Complex s(0.0, -sw / w);
    // C^2 = [[a^2, 0, ab], [0, a^2+b^2, 0], [ab, 0, b^2]]
    return {1.0 + c1 * a * a, s * a, c1 * a * b, 1.0 + c1 * w * w, s * b, 1.0 + c1 * b * b};
  }

  void check_finite(const ThreeSurfaceState& state) const {
    const double n = state.total_norm();
    if (!std::isfinite(n) || n > 1e6) {
      throw NumericalFailure("split-operator step produced non-finite norm at t = " +
                             std::to_string(units::atomic_to_fs(state.elapsed_time)) + " fs");
    }
  }

  FrameHamiltonian ham_;
  double dt_;
  CouplingMethod method_;
  Fft fft_;
  std::vector<Complex> half_kinetic_;
  std::vector<Complex> full_kinetic_;
  std::array<std::vector<Complex>, kSurfaces> full_potential_;
  std::array<std::vector<Complex>, kSurfaces> half_potential_;
};

/// Free-standing single step (builds the stepper each call; tests and tools only).
inline void split_step(ThreeSurfaceState& state, const FrameHamiltonian& ham, Complex pump_rabi, Complex dump_rabi,
                       double dt, CouplingMethod method = CouplingMethod::exact) {
  SplitOperator(ham, dt, method).step(state, pump_rabi, dump_rabi);
}

/// Bound eigenbasis of one surface with rotating-frame energies.
struct SurfaceBasis {
  std::vector<VibrationalLevel> levels;
  std::vector<double> frame_energies;
};

inline SurfaceBasis make_surface_basis(const MorsePotential& p, const FrameHamiltonian& ham, Surface s) {
  SurfaceBasis b;
  b.levels = levels_on_grid(p, ham.grid);
  for (const auto& l : b.levels) b.frame_energies.push_back(ham.frame_energy(s, l.absolute_energy()));
  return b;
}

inline Complex project(const VibrationalLevel& level, std::span<const Complex> psi) {
  Complex acc;
  for (std::size_t i = 0; i < psi.size(); ++i) acc += std::conj(level.wavefunction[i]) * psi[i];
  return acc * level.grid.spacing();
}

struct FreeEvolveOptions {
  double capture_tolerance = 1e-6;  // relative to the surface norm
  double capture_floor = 1e-10;     // absolute slack for round-off on nearly empty surfaces
};

/// Exact evolution between pulses: each surface is expanded in its bound
/// eigenbasis, coefficient v picks up exp(-i E_v t), and excited coefficients
/// also decay as exp(-gamma t / 2). Throws ContinuumLeakage if a surface holds
/// more than the tolerated norm outside its bound basis.
inline void free_evolve(ThreeSurfaceState& state, const std::array<const SurfaceBasis*, kSurfaces>& bases,
                        double duration, double gamma, const FreeEvolveOptions& opt = {}) {
  if (duration < 0.0) throw InvalidArgument("free_evolve: negative duration");
  if (duration == 0.0) return;
  for (std::size_t s = 0; s < kSurfaces; ++s) {
    const auto& basis = *bases[s];
    auto& psi = state.psi[s];
    const double surface_norm = state.norm(static_cast<Surface>(s));
    std::vector<Complex> coeff(basis.levels.size());
    double captured = 0.0;
    for (std::size_t v = 0; v < coeff.size(); ++v) {
      coeff[v] = project(basis.levels[v], psi);
      captured += std::norm(coeff[v]);
    }
    if (surface_norm - captured > opt.capture_tolerance * surface_norm + opt.capture_floor) {
      throw ContinuumLeakage("free_evolve: surface " + std::to_string(s) + " keeps " +
                             std::to_string(surface_norm - captured) + " of " + std::to_string(surface_norm) +
                             " outside its bound levels");
    }
    const double damp = (s == index_of(Surface::excited)) ? std::exp(-0.5 * gamma * duration) : 1.0;
    std::fill(psi.begin(), psi.end(), Complex{});
    for (std::size_t v = 0; v < coeff.size(); ++v) {
      const Complex c = coeff[v] * std::polar(damp, -basis.frame_energies[v] * duration);
      if (c == Complex{}) continue;
      const auto& phi = basis.levels[v].wavefunction;
      for (std::size_t i = 0; i < psi.size(); ++i) psi[i] += c * phi[i];
    }
  }
  state.elapsed_time += duration;
}

struct Projector {
  Surface surface = Surface::input;
  const VibrationalLevel* level = nullptr;
};

struct PopulationReport {
  std::array<double, kSurfaces> surface_norm{};
  std::vector<double> level_population;  // one per projector

  /// Level population over the norm of its surface.
  double purity(std::size_t projector, Surface s) const {
    const double n = surface_norm[index_of(s)];
    return n > 0.0 ? level_population[projector] / n : 0.0;
  }
};

inline PopulationReport measure_populations(const ThreeSurfaceState& state, std::span<const Projector> projectors) {
  PopulationReport r;
  for (std::size_t s = 0; s < kSurfaces; ++s) r.surface_norm[s] = state.norm(static_cast<Surface>(s));
  for (const auto& p : projectors) {
    if (!(p.level->grid == state.grid)) throw GridMismatch("measure_populations: projector on a different grid");
    r.level_population.push_back(std::norm(project(*p.level, state[p.surface])));
  }
  return r;
}

/// Total population a surface holds inside its bound basis.
inline double bound_population(const ThreeSurfaceState& state, const SurfaceBasis& basis, Surface s) {
  double acc = 0.0;
  for (const auto& l : basis.levels) acc += std::norm(project(l, state[s]));
  return acc;
}

// ---------------------------------------------------------------------------
// Pulse pairs

/// Time support of a pulse: the interval outside of which at most
/// `tail_fraction` of the envelope energy lies on either side.
struct PulseSupport {
  double start = 0.0;
  double end = 0.0;
};

inline PulseSupport pulse_support(const SpectralPulse& pulse, double dt, double tail_fraction) {
  const double period = pulse.grid.period();
  const auto n = static_cast<std::size_t>(std::ceil(period / dt));
  const double t0 = -0.5 * period;
  SpectralPulse unit = pulse;
  unit.field_scale = 1.0;
  const auto env = evaluate_envelope(unit, t0, dt, n);
  std::vector<double> cumulative(n + 1, 0.0);
  for (std::size_t j = 0; j < n; ++j) cumulative[j + 1] = cumulative[j] + std::norm(env[j]);
  const double total = cumulative[n];
  if (!(total > 0.0)) throw DegenerateDesign("pulse_support: empty pulse");
  const std::size_t rim = std::max<std::size_t>(1, n / 100);
  if (cumulative[rim] + (total - cumulative[n - rim]) > 1e-6 * total) {
    throw Aliasing("pulse_support: pulse fills its spectral period; refine the detuning spacing");
  }
  std::size_t a = 0;
  while (a < n && cumulative[a + 1] <= tail_fraction * total) ++a;
  std::size_t b = n;
  while (b > 0 && total - cumulative[b - 1] <= tail_fraction * total) --b;
  return {t0 + dt * static_cast<double>(a), t0 + dt * static_cast<double>(b)};
}

/// Unit-scale Rabi envelopes of a pump/dump pair sampled at step midpoints
/// over the pair window. The pump is centred at t = 0 and the dump at `delay`.
struct PairDrive {
  double dt = 0.0;
  double delay = 0.0;
  double window_start = 0.0;
  std::vector<Complex> pump_unit;  // d_el * eps_p(t) / field_scale
  std::vector<Complex> dump_unit;

  double window() const { return dt * static_cast<double>(pump_unit.size()); }
};

inline PairDrive make_pair_drive(const SpectralPulse& pump, const SpectralPulse& dump, double delay, double dt,
                                 double dipole = 1.0, double tail_fraction = 1e-9) {
  const auto sp = pulse_support(pump, dt, tail_fraction);
  const auto sd = pulse_support(dump, dt, tail_fraction);
  PairDrive d;
  d.dt = dt;
  d.delay = delay;
  d.window_start = std::min(sp.start, sd.start + delay);
  const double end = std::max(sp.end, sd.end + delay);
  const auto n = static_cast<std::size_t>(std::ceil((end - d.window_start) / dt));
  SpectralPulse p = pump;
  SpectralPulse q = dump;
  p.field_scale = dipole;
  q.field_scale = dipole;
  d.pump_unit = evaluate_envelope(p, d.window_start + 0.5 * dt, dt, n);
  d.dump_unit = evaluate_envelope(q, d.window_start - delay + 0.5 * dt, dt, n);
  return d;
}

enum class Channel { pump, dump };

/// Drive carrying one pulse only, centred at t = 0, on the given channel.
inline PairDrive make_single_drive(const SpectralPulse& pulse, Channel channel, double dt, double dipole = 1.0,
                                   double tail_fraction = 1e-9) {
  const auto sp = pulse_support(pulse, dt, tail_fraction);
  PairDrive d;
  d.dt = dt;
  d.window_start = sp.start;
  const auto n = static_cast<std::size_t>(std::ceil((sp.end - sp.start) / dt));
  SpectralPulse p = pulse;
  p.field_scale = dipole;
  auto env = evaluate_envelope(p, d.window_start + 0.5 * dt, dt, n);
  if (channel == Channel::pump) {
    d.pump_unit = std::move(env);
    d.dump_unit.assign(n, Complex{});
  } else {
    d.dump_unit = std::move(env);
    d.pump_unit.assign(n, Complex{});
  }
  return d;
}

struct PairDiagnostics {
  double peak_excited = 0.0;
  std::array<double, kSurfaces> final_norm{};
  double window = 0.0;
};

/// Propagates one pump/dump pair through its window. Field scales multiply
/// the unit envelopes; `dump_phase` rotates the dump carrier phase.
inline PairDiagnostics propagate_pulse_pair(ThreeSurfaceState& state, const SplitOperator& stepper,
                                            const PairDrive& drive, double pump_scale, double dump_scale,
                                            double dump_phase = 0.0,
                                            const std::function<void(const ThreeSurfaceState&, std::size_t)>& observe = {},
                                            std::size_t sample_every = 0) {
  if (std::abs(stepper.dt() - drive.dt) > 1e-12 * drive.dt) {
    throw InvalidArgument("propagate_pulse_pair: drive and stepper use different time steps");
  }
  const std::size_t n = drive.pump_unit.size();
  std::vector<Complex> pump(n);
  std::vector<Complex> dump(n);
  const Complex dump_factor = std::polar(dump_scale, dump_phase);
  for (std::size_t j = 0; j < n; ++j) {
    pump[j] = drive.pump_unit[j] * pump_scale;
    dump[j] = drive.dump_unit[j] * dump_factor;
  }
  PairDiagnostics diag;
  diag.window = drive.window();
  diag.peak_excited = state.norm(Surface::excited);
  stepper.run(state, pump, dump, observe, sample_every,
              [&](const ThreeSurfaceState& s) { diag.peak_excited = std::max(diag.peak_excited, s.norm(Surface::excited)); });
  for (std::size_t s = 0; s < kSurfaces; ++s) diag.final_norm[s] = state.norm(static_cast<Surface>(s));
  return diag;
}

}  // namespace combctl
