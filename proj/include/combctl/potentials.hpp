#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "combctl/error.hpp"
#include "combctl/units.hpp"

namespace combctl {

using Complex = std::complex<double>;

/// Uniform radial grid shared by every wavefunction of a run.
struct RadialGrid {
  double r_min = 0.0;
  double r_max = 0.0;
  std::size_t n_points = 0;

  RadialGrid() = default;
  RadialGrid(double lo, double hi, std::size_t n) : r_min(lo), r_max(hi), n_points(n) {
    if (!(hi > lo)) throw InvalidArgument("RadialGrid: r_max must exceed r_min");
    if (n < 4 || !std::has_single_bit(n)) throw InvalidArgument("RadialGrid: n_points must be a power of two >= 4");
  }

  double spacing() const { return (r_max - r_min) / static_cast<double>(n_points - 1); }
  double r(std::size_t i) const { return r_min + spacing() * static_cast<double>(i); }
  std::size_t size() const { return n_points; }

  friend bool operator==(const RadialGrid&, const RadialGrid&) = default;
};

/// Morse curve V(r) = T_e + D_e (1 - exp(-a (r - r_e)))^2 in atomic units.
struct MorsePotential {
  std::string name;
  double dissociation_energy = 0.0;   // D_e
  double width = 0.0;                 // a
  double equilibrium_distance = 0.0;  // r_e
  double electronic_offset = 0.0;     // T_e
  double reduced_mass = 0.0;          // mu

  MorsePotential() = default;
  MorsePotential(std::string id, double de, double a, double re, double te, double mu)
      : name(std::move(id)), dissociation_energy(de), width(a), equilibrium_distance(re),
        electronic_offset(te), reduced_mass(mu) {
    validate();
  }

  void validate() const {
    if (!(dissociation_energy > 0.0)) throw InvalidArgument("MorsePotential " + name + ": D_e must be positive");
    if (!(width > 0.0)) throw InvalidArgument("MorsePotential " + name + ": a must be positive");
    if (!(equilibrium_distance > 0.0)) throw InvalidArgument("MorsePotential " + name + ": r_e must be positive");
    if (!(reduced_mass > 0.0)) throw InvalidArgument("MorsePotential " + name + ": reduced mass must be positive");
    if (lambda() < 0.5) throw InvalidArgument("MorsePotential " + name + ": no bound level (lambda < 1/2)");
  }

  /// lambda = sqrt(2 mu D_e) / a; the well holds floor(lambda - 1/2) + 1 levels.
  double lambda() const { return std::sqrt(2.0 * reduced_mass * dissociation_energy) / width; }

  /// Harmonic angular frequency at the bottom of the well.
  double harmonic_frequency() const { return width * std::sqrt(2.0 * dissociation_energy / reduced_mass); }

  double operator()(double r) const {
    const double x = 1.0 - std::exp(-width * (r - equilibrium_distance));
    return electronic_offset + dissociation_energy * x * x;
  }
};

inline int max_bound_index(const MorsePotential& p) {
  return static_cast<int>(std::floor(p.lambda() - 0.5));
}

inline int count_bound_levels(const MorsePotential& p) { return max_bound_index(p) + 1; }

/// Energy of level v above the potential minimum (T_e excluded).
inline double morse_energy(const MorsePotential& p, int v) {
  if (v < 0 || v > max_bound_index(p)) {
    throw UnboundLevel("morse_energy: level " + std::to_string(v) + " is not bound in " + p.name +
                       " (v_max = " + std::to_string(max_bound_index(p)) + ")");
  }
  const double x = p.harmonic_frequency() * (v + 0.5);
  return x - x * x / (4.0 * p.dissociation_energy);
}

/// Classical turning points (inner, outer) of level v.
inline std::pair<double, double> turning_points(const MorsePotential& p, int v) {
  const double s = std::sqrt(morse_energy(p, v) / p.dissociation_energy);
  const double inner = p.equilibrium_distance - std::log1p(s) / p.width;
  const double outer = p.equilibrium_distance - std::log1p(-s) / p.width;
  return {inner, outer};
}

/// Classical period from the local level spacing around v_center.
inline double vibration_period(const MorsePotential& p, int v_center) {
  if (v_center < 1 || v_center + 1 > max_bound_index(p)) {
    throw UnboundLevel("vibration_period: level " + std::to_string(v_center) + " of " + p.name +
                       " needs bound neighbours on both sides");
  }
  const double spacing = 0.5 * (morse_energy(p, v_center + 1) - morse_energy(p, v_center - 1));
  return units::kTwoPi / spacing;
}

namespace detail {

struct LogValue {
  double sign = 0.0;
  double log_abs = -std::numeric_limits<double>::infinity();
};

/// Generalized Laguerre L_n^(alpha)(z) by the three-term recurrence, carried
/// with a running log scale so that large n and z stay finite.
inline LogValue laguerre_log(int n, double alpha, double z) {
  if (n == 0) return {1.0, 0.0};
  double prev = 1.0;
  double cur = 1.0 + alpha - z;
  double log_scale = 0.0;
  for (int k = 1; k < n; ++k) {
    const double next = ((2.0 * k + 1.0 + alpha - z) * cur - (k + alpha) * prev) / (k + 1.0);
    prev = cur;
    cur = next;
    const double mag = std::abs(cur);
    if (mag > 1e150) {
      prev /= mag;
      cur /= mag;
      log_scale += std::log(mag);
    }
  }
  if (cur == 0.0) return {0.0, -std::numeric_limits<double>::infinity()};
  return {cur > 0.0 ? 1.0 : -1.0, std::log(std::abs(cur)) + log_scale};
}

}  // namespace detail

/// Closed-form normalized Morse eigenfunction psi_v(r), evaluated in the log
/// domain. Sign is the raw analytic sign; the sampled level fixes its own sign.
inline double morse_eigenfunction(const MorsePotential& p, int v, double r) {
  const double lam = p.lambda();
  const double alpha = 2.0 * lam - 2.0 * v - 1.0;
  const double z = 2.0 * lam * std::exp(-p.width * (r - p.equilibrium_distance));
  const auto lag = detail::laguerre_log(v, alpha, z);
  if (lag.sign == 0.0) return 0.0;
  const double log_norm = 0.5 * (std::log(p.width * alpha) + std::lgamma(v + 1.0) - std::lgamma(2.0 * lam - v));
  const double log_psi = log_norm + (lam - v - 0.5) * std::log(z) - 0.5 * z + lag.log_abs;
  return lag.sign * std::exp(log_psi);
}

/// A bound eigenstate sampled on a radial grid.
struct VibrationalLevel {
  std::string potential_id;
  int index = 0;
  double energy = 0.0;            // above the potential minimum
  double electronic_offset = 0.0; // T_e of the owning surface
  RadialGrid grid;
  std::vector<Complex> wavefunction;

  double absolute_energy() const { return electronic_offset + energy; }
};

inline constexpr double kTruncationTolerance = 1e-6;

/// Samples psi_v on the grid, normalizes it there and fixes the sign so the
/// innermost lobe is positive. Throws GridTruncation when the grid misses more
/// than kTruncationTolerance of the norm.
inline VibrationalLevel morse_wavefunction(const MorsePotential& p, int v, const RadialGrid& grid) {
  VibrationalLevel level;
  level.potential_id = p.name;
  level.index = v;
  level.energy = morse_energy(p, v);
  level.electronic_offset = p.electronic_offset;
  level.grid = grid;

  std::vector<double> psi(grid.size());
  double peak = 0.0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    psi[i] = morse_eigenfunction(p, v, grid.r(i));
    peak = std::max(peak, std::abs(psi[i]));
  }
  double norm = 0.0;
  for (double x : psi) norm += x * x;
  norm *= grid.spacing();
  if (!(1.0 - norm <= kTruncationTolerance)) {
    throw GridTruncation("morse_wavefunction: level " + std::to_string(v) + " of " + p.name +
                         " keeps norm " + std::to_string(norm) + " on the grid");
  }
  const auto first = std::find_if(psi.begin(), psi.end(), [&](double x) { return std::abs(x) > 1e-3 * peak; });
  const double sign = (first != psi.end() && *first < 0.0) ? -1.0 : 1.0;
  const double scale = sign / std::sqrt(norm);
  level.wavefunction.resize(psi.size());
  std::transform(psi.begin(), psi.end(), level.wavefunction.begin(), [&](double x) { return Complex(x * scale, 0.0); });
  return level;
}

/// All bound levels v = 0.. that the grid holds, stopping at the first one it truncates.
inline std::vector<VibrationalLevel> levels_on_grid(const MorsePotential& p, const RadialGrid& grid, int v_limit = -1) {
  std::vector<VibrationalLevel> out;
  const int top = v_limit < 0 ? max_bound_index(p) : std::min(v_limit, max_bound_index(p));
  for (int v = 0; v <= top; ++v) {
    try {
      out.push_back(morse_wavefunction(p, v, grid));
    } catch (const GridTruncation&) {
      break;
    }
  }
  return out;
}

/// Potential (including T_e) sampled on the grid.
inline std::vector<double> sample_potential(const MorsePotential& p, const RadialGrid& grid) {
  std::vector<double> v(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) v[i] = p(grid.r(i));
  return v;
}

struct GridRequest {
  const MorsePotential* potential = nullptr;
  int highest_level = 0;
};

/// Radial range whose edges sit where every requested level has fallen below
/// `edge_fraction` of its peak, widened to keep a 10% margin past the turning points.
inline std::pair<double, double> fit_radial_range(std::span<const GridRequest> requests, double edge_fraction = 1e-8) {
  if (requests.empty()) throw InvalidArgument("fit_radial_range: no levels requested");
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  double inner_tp = lo;
  double outer_tp = -lo;
  for (const auto& req : requests) {
    const auto& p = *req.potential;
    for (int v = 0; v <= req.highest_level; ++v) {
      const auto [rin, rout] = turning_points(p, v);
      inner_tp = std::min(inner_tp, rin);
      outer_tp = std::max(outer_tp, rout);
      const double step = (rout - rin) / 2000.0;
      double peak = 0.0;
      for (double r = rin; r <= rout; r += step) peak = std::max(peak, std::abs(morse_eigenfunction(p, v, r)));
      double r = rout;
      while (std::abs(morse_eigenfunction(p, v, r)) > edge_fraction * peak) r += step;
      hi = std::max(hi, r);
      r = rin;
      while (r > step && std::abs(morse_eigenfunction(p, v, r)) > edge_fraction * peak) r -= step;
      lo = std::min(lo, r);
    }
  }
  const double margin = 0.1 * (outer_tp - inner_tp);
  lo = std::min(lo, inner_tp - margin);
  hi = std::max(hi, outer_tp + margin);
  if (!(lo > 0.0)) throw GridTruncation("fit_radial_range: inner edge reaches r <= 0");
  return {lo, hi};
}

inline RadialGrid fit_grid(std::span<const GridRequest> requests, std::size_t n_points, double edge_fraction = 1e-8) {
  const auto [lo, hi] = fit_radial_range(requests, edge_fraction);
  return RadialGrid(lo, hi, n_points);
}

}  // namespace combctl
