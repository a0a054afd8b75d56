#pragma once

#include <algorithm>
#include <string>
#include <vector>

#include "combctl/error.hpp"
#include "combctl/potentials.hpp"

namespace combctl {

/// Signed overlap <a|b> of two levels sampled on the same grid.
inline double fc_factor(const VibrationalLevel& a, const VibrationalLevel& b) {
  if (!(a.grid == b.grid) || a.wavefunction.size() != b.wavefunction.size()) {
    throw GridMismatch("fc_factor: levels " + a.potential_id + "/" + std::to_string(a.index) + " and " +
                       b.potential_id + "/" + std::to_string(b.index) + " live on different grids");
  }
  Complex acc = 0.0;
  for (std::size_t i = 0; i < a.wavefunction.size(); ++i) acc += std::conj(a.wavefunction[i]) * b.wavefunction[i];
  return acc.real() * a.grid.spacing();
}

struct FrequencyWindow {
  double lo = 0.0;
  double hi = 0.0;
  bool contains(double w) const { return w >= lo && w <= hi; }
};

/// Transition dipoles <v|d_el|anchor> from one lower-surface level into the
/// bound levels of an excited surface, indexed by detuning from a carrier.
struct FCSpectrum {
  struct Entry {
    int v_excited = 0;
    double detuning = 0.0;
    double amplitude = 0.0;  // d_el * <v|anchor>, signed
  };

  std::string anchor_potential_id;
  int anchor_index = 0;
  double anchor_energy = 0.0;  // absolute (T_e + E_v)
  std::string excited_potential_id;
  double carrier = 0.0;
  double dipole = 1.0;
  std::vector<Entry> entries;

  const Entry* find(int v) const {
    auto it = std::find_if(entries.begin(), entries.end(), [v](const Entry& e) { return e.v_excited == v; });
    return it == entries.end() ? nullptr : &*it;
  }

  double weight() const {
    double s = 0.0;
    for (const auto& e : entries) s += e.amplitude * e.amplitude;
    return s;
  }
};

/// Detuning of excited level v from the carrier when excited from `anchor`.
inline double transition_detuning(const VibrationalLevel& anchor, const MorsePotential& excited, int v, double carrier) {
  return excited.electronic_offset + morse_energy(excited, v) - anchor.absolute_energy() - carrier;
}

/// Franck-Condon spectrum of `anchor` against every bound excited level whose
/// detuning lies in `window`. Excited levels are sampled on the anchor's grid.
inline FCSpectrum fc_spectrum(const VibrationalLevel& anchor, const MorsePotential& excited, double carrier,
                              FrequencyWindow window, double dipole = 1.0) {
  FCSpectrum spec;
  spec.anchor_potential_id = anchor.potential_id;
  spec.anchor_index = anchor.index;
  spec.anchor_energy = anchor.absolute_energy();
  spec.excited_potential_id = excited.name;
  spec.carrier = carrier;
  spec.dipole = dipole;
  for (int v = 0; v <= max_bound_index(excited); ++v) {
    const double w = transition_detuning(anchor, excited, v, carrier);
    if (!window.contains(w)) continue;
    const auto level = morse_wavefunction(excited, v, anchor.grid);
    spec.entries.push_back({v, w, dipole * fc_factor(level, anchor)});
  }
  if (spec.entries.empty()) {
    throw InvalidArgument("fc_spectrum: no level of " + excited.name + " inside the detuning window");
  }
  return spec;
}

}  // namespace combctl
