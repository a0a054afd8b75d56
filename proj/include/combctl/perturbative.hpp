#pragma once

#include <cmath>
#include <complex>
#include <string>
#include <vector>

#include "combctl/error.hpp"
#include "combctl/franck_condon.hpp"
#include "combctl/pulses.hpp"

namespace combctl {

/// Excited-surface packet as coefficients over bound levels.
struct LevelWavepacket {
  std::string excited_potential_id;
  std::vector<int> levels;
  std::vector<Complex> coefficients;

  double norm_squared() const {
    double s = 0.0;
    for (const auto& c : coefficients) s += std::norm(c);
    return s;
  }

  Complex coefficient(int v) const {
    for (std::size_t i = 0; i < levels.size(); ++i) {
      if (levels[i] == v) return coefficients[i];
    }
    return {};
  }
};

// First-order amplitudes use the propagator's coupling <e|H|g> = Omega(t)/2
// with Omega = d_el * field_scale * eps(t), so c_v = -(i/2) s E(w_v) F_v and
// the squared norm is directly the excited fraction of a unit source.

/// Pumped packet after the intra-pair delay, in the frame co-rotating with the source level.
inline LevelWavepacket pump_wavepacket(const SpectralPulse& pump, const FCSpectrum& fc_pump, const DispersionPhase& phase) {
  LevelWavepacket out;
  out.excited_potential_id = fc_pump.excited_potential_id;
  const Complex factor(0.0, -0.5 * pump.field_scale);
  for (const auto& e : fc_pump.entries) {
    out.levels.push_back(e.v_excited);
    out.coefficients.push_back(factor * pump.at(e.detuning) * std::polar(1.0, phase.at_level(e.v_excited, e.detuning)) * e.amplitude);
  }
  return out;
}

/// Packet the time-reversed dump would raise from the target level. The dump
/// spectrum is referenced to the dump's own centre; reversal conjugates the
/// spectrum and reporting the packet in the pump's time orientation conjugates
/// it back, so the coefficients carry E_d(w) itself.
inline LevelWavepacket reversed_dump_wavepacket(const SpectralPulse& dump, const FCSpectrum& fc_dump) {
  LevelWavepacket out;
  out.excited_potential_id = fc_dump.excited_potential_id;
  const Complex factor(0.0, -0.5 * dump.field_scale);
  for (const auto& e : fc_dump.entries) {
    out.levels.push_back(e.v_excited);
    out.coefficients.push_back(factor * dump.at(e.detuning) * e.amplitude);
  }
  return out;
}

/// Normalized <a|b> over the levels both packets share.
inline Complex overlap(const LevelWavepacket& a, const LevelWavepacket& b) {
  if (a.excited_potential_id != b.excited_potential_id) {
    throw InvalidArgument("overlap: packets live on different potentials");
  }
  const double na = a.norm_squared();
  const double nb = b.norm_squared();
  if (!(na > 0.0) || !(nb > 0.0)) throw InvalidArgument("overlap: zero-norm packet");
  Complex acc;
  for (std::size_t i = 0; i < a.levels.size(); ++i) acc += std::conj(a.coefficients[i]) * b.coefficient(a.levels[i]);
  return acc / std::sqrt(na * nb);
}

}  // namespace combctl
