#pragma once

#include <numbers>

// Everything inside the library runs in atomic units (hbar = m_e = e = 1).
// These factors convert laboratory units at the configuration boundary.
namespace combctl::units {

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

inline constexpr double kHartreePerWavenumber = 4.556335252912088e-6;  // 1 cm^-1
inline constexpr double kBohrPerAngstrom = 1.8897261245650618;
inline constexpr double kElectronMassesPerAmu = 1822.888486209;
inline constexpr double kAtomicTimePerFs = 41.341373335335184;
inline constexpr double kAtomicTimePerNs = kAtomicTimePerFs * 1.0e6;

constexpr double wavenumber_to_hartree(double cm1) { return cm1 * kHartreePerWavenumber; }
constexpr double hartree_to_wavenumber(double eh) { return eh / kHartreePerWavenumber; }
constexpr double angstrom_to_bohr(double a) { return a * kBohrPerAngstrom; }
constexpr double bohr_to_angstrom(double b) { return b / kBohrPerAngstrom; }
constexpr double amu_to_electron_masses(double m) { return m * kElectronMassesPerAmu; }
constexpr double fs_to_atomic(double t) { return t * kAtomicTimePerFs; }
constexpr double atomic_to_fs(double t) { return t / kAtomicTimePerFs; }
constexpr double ns_to_atomic(double t) { return t * kAtomicTimePerNs; }
constexpr double fs2_to_atomic(double gdd) { return gdd * kAtomicTimePerFs * kAtomicTimePerFs; }

/// Vacuum wavelength in nm to photon energy (= angular frequency) in hartree.
constexpr double wavelength_nm_to_hartree(double nm) { return wavenumber_to_hartree(1.0e7 / nm); }
constexpr double hartree_to_wavelength_nm(double eh) { return 1.0e7 / hartree_to_wavenumber(eh); }

/// Spectral FWHM given in nm around a carrier wavelength, as an angular frequency width.
constexpr double bandwidth_nm_to_hartree(double fwhm_nm, double carrier_nm) {
  return wavenumber_to_hartree(1.0e7 * fwhm_nm / (carrier_nm * carrier_nm));
}

}  // namespace combctl::units
