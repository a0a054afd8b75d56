#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "combctl/perturbative.hpp"

using namespace combctl;

namespace {

FCSpectrum ladder(const std::vector<double>& amps, double spacing, double dipole = 1.0) {
  FCSpectrum s;
  s.excited_potential_id = "A";
  s.dipole = dipole;
  const int half = static_cast<int>(amps.size()) / 2;
  for (std::size_t k = 0; k < amps.size(); ++k) {
    const int v = static_cast<int>(k);
    s.entries.push_back({v, (v - half) * spacing, amps[k]});
  }
  return s;
}

SpectralPulse flat(const DetuningGrid& g, double scale) {
  SpectralPulse p;
  p.grid = g;
  p.amplitude.assign(g.size(), Complex(1.0, 0.0));
  p.field_scale = scale;
  return p;
}

}  // namespace

TEST(PumpWavepacket, SingleLevelMatchesFirstOrder) {
  const auto fc = ladder({0.4}, 0.01);
  const DetuningGrid g(0.001, 20);
  const auto ph = dispersion_phase(fc, 0.0, g);
  const auto pump = flat(g, 0.05);
  const auto pk = pump_wavepacket(pump, fc, ph);
  ASSERT_EQ(pk.levels.size(), 1u);
  EXPECT_NEAR(pk.norm_squared(), first_order_fraction(pump, fc), 1e-15);
  EXPECT_NEAR(pk.norm_squared(), std::pow(0.5 * 0.05 * 0.4, 2), 1e-15);
}

TEST(PumpWavepacket, ZeroPhaseRealInputsGiveCommonPhase) {
  const auto fc = ladder({0.1, -0.3, 0.5, -0.2, 0.1}, 0.01);
  const auto g = DetuningGrid::covering(0.03, 0.001);
  const auto ph = dispersion_phase(fc, 0.0, g);
  const auto pk = pump_wavepacket(flat(g, 1.0), fc, ph);
  // Every coefficient is -i/2 times a real number.
  for (const auto& c : pk.coefficients) EXPECT_NEAR((c * Complex(0.0, 2.0)).imag(), 0.0, 1e-15);
  const auto dk = reversed_dump_wavepacket(flat(g, 1.0), fc);
  for (const auto& c : dk.coefficients) EXPECT_NEAR((c * Complex(0.0, 2.0)).imag(), 0.0, 1e-15);
}

TEST(ReversedDump, SingleLevel) {
  const auto fc = ladder({-0.7}, 0.01);
  const DetuningGrid g(0.001, 20);
  const auto dk = reversed_dump_wavepacket(flat(g, 0.02), fc);
  ASSERT_EQ(dk.levels.size(), 1u);
  EXPECT_NEAR(dk.norm_squared(), std::pow(0.5 * 0.02 * 0.7, 2), 1e-15);
}

TEST(Overlap, IdentityAndGlobalPhaseInvariance) {
  const auto fc = ladder({0.1, -0.3, 0.5, -0.2, 0.1}, 0.01);
  const auto g = DetuningGrid::covering(0.03, 0.001);
  const auto ph = dispersion_phase(fc, 123.0, g);
  const auto a = pump_wavepacket(flat(g, 1.0), fc, ph);
  EXPECT_NEAR(std::abs(overlap(a, a) - 1.0), 0.0, 1e-15);
  auto b = a;
  for (auto& c : b.coefficients) c *= std::polar(3.7, 1.1);
  EXPECT_NEAR(std::abs(overlap(a, b)), 1.0, 1e-14);
  auto zero = a;
  for (auto& c : zero.coefficients) c = 0.0;
  EXPECT_THROW(overlap(a, zero), InvalidArgument);
  auto other = a;
  other.excited_potential_id = "B";
  EXPECT_THROW(overlap(a, other), InvalidArgument);
}

TEST(Overlap, ShapedPairBeatsUnshaped) {
  std::vector<double> fp, fd;
  for (int v = 0; v < 15; ++v) {
    fp.push_back(std::exp(-0.05 * (v - 7) * (v - 7)));
    fd.push_back((v % 2 == 0 ? 1.0 : -1.0) * (0.3 + 0.02 * v));
  }
  const double spacing = 0.004;
  const auto fcp = ladder(fp, spacing);
  const auto fcd = ladder(fd, spacing);
  const auto g = DetuningGrid::covering(0.05, spacing / 8.0);
  const double delay = 0.5 * units::kTwoPi / spacing;
  const auto ph = dispersion_phase(fcp, delay, g);
  const auto A = gaussian_amplitude(g, 0.03);
  for (auto gauge : {ShapingGauge::literal, ShapingGauge::dump_envelope}) {
    const auto pair = design_pair(fcp, fcd, A, ph, gauge);
    const double shaped = std::abs(overlap(pump_wavepacket(pair.pump, fcp, ph), reversed_dump_wavepacket(pair.dump, fcd)));
    EXPECT_GT(shaped, 1.0 - 1e-3);
    SpectralPulse plain;
    plain.grid = g;
    plain.amplitude.assign(A.begin(), A.end());
    const double unshaped = std::abs(overlap(pump_wavepacket(plain, fcp, ph), reversed_dump_wavepacket(plain, fcd)));
    EXPECT_LT(unshaped, shaped);
  }
}
