#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "combctl/accumulation.hpp"
#include "support/oracles.hpp"

using namespace combctl;
namespace u = combctl::units;

TEST(AreaSchedule, Eq1Areas) {
  const auto one = area_schedule(1, ScheduleMode::eq1);
  EXPECT_NEAR(one.pump_area[0], u::kPi, 1e-12);
  EXPECT_NEAR(one.dump_area[0], u::kPi, 1e-12);
  const auto two = area_schedule(2, ScheduleMode::eq1);
  EXPECT_NEAR(two.pump_area[0], u::kPi / 2.0, 1e-12);
  EXPECT_NEAR(two.dump_area[0], u::kPi, 1e-12);
  EXPECT_NEAR(two.pump_area[1], u::kPi, 1e-12);
  EXPECT_NEAR(two.dump_area[1], u::kPi / 2.0, 1e-12);
  const auto forty = area_schedule(40, ScheduleMode::eq1);
  // sin^2(A/2) = 1/40
  EXPECT_NEAR(forty.pump_area[0], 2.0 * std::asin(std::sqrt(1.0 / 40.0)), 1e-12);
  EXPECT_NEAR(forty.dump_area[39], forty.pump_area[0], 1e-12);
}

TEST(AreaSchedule, FixedModesAndErrors) {
  const auto s = area_schedule(5, ScheduleMode::fixed_pump, u::kPi / 6.6);
  EXPECT_TRUE(s.matched_dump());
  for (double a : s.pump_area) EXPECT_DOUBLE_EQ(a, u::kPi / 6.6);
  for (double a : s.dump_area) EXPECT_TRUE(std::isnan(a));
  EXPECT_THROW(area_schedule(0, ScheduleMode::eq1), InvalidArgument);
  EXPECT_THROW(area_schedule(3, ScheduleMode::fixed_pump, 0.0), InvalidArgument);
  EXPECT_THROW(area_schedule(3, ScheduleMode::fixed_both, 1.0, 4.0), InvalidArgument);
}

TEST(AreaFraction, PumpAreaOfPaper) {
  // pi / 6.6 puts about 5.7 % into the excited state.
  EXPECT_NEAR(area_to_fraction(u::kPi / 6.6), 0.0557, 5e-4);
  EXPECT_NEAR(fraction_to_area(area_to_fraction(1.234)), 1.234, 1e-12);
}

TEST(RamanPhase, SubharmonicConditions) {
  const double t = 1000.0;
  const double f = u::kTwoPi / t;
  EXPECT_NEAR(raman_phase(7.0 * f, 0.0, t), 0.0, 1e-9);
  EXPECT_NEAR(raman_phase(7.5 * f, 0.0, t), u::kPi, 1e-9);
  // Invariant under shifts by whole comb teeth.
  const double d = 0.123;
  EXPECT_NEAR(raman_phase(d, 0.0, t), raman_phase(d + 3.0 * f, 0.0, t), 1e-9);
  EXPECT_GE(raman_phase(-d, 0.0, t), 0.0);
  EXPECT_THROW(raman_phase(1.0, 0.0, 0.0), InvalidArgument);
}

TEST(IdealLambdaMap, Eq1ReachesTarget) {
  for (int n : {1, 2, 5, 40}) {
    const auto c = ideal_lambda_map(area_schedule(n, ScheduleMode::eq1), 0.0);
    EXPECT_NEAR(std::norm(c.target), 1.0, 1e-9) << "N=" << n;
    EXPECT_NEAR(std::norm(c.input) + std::norm(c.excited), 0.0, 1e-9);
  }
}

TEST(IdealLambdaMap, AntiPhaseSuppresses) {
  const auto s = area_schedule(40, ScheduleMode::eq1);
  const double on = std::norm(ideal_lambda_map(s, 0.0).target);
  const double off = std::norm(ideal_lambda_map(s, u::kPi).target);
  EXPECT_LT(off, 0.1 * on);
}

TEST(IdealLambdaMap, DecayLimitIsContinuous) {
  const auto s = area_schedule(10, ScheduleMode::eq1);
  double last = 0.0;
  for (double g : {1e-2, 1e-4, 1e-6, 1e-8}) {
    LambdaMapOptions opt;
    opt.intra_pair_decay = g;
    opt.inter_pair_decay = 10.0 * g;
    const double p = std::norm(ideal_lambda_map(s, 0.0, opt).target);
    EXPECT_GT(p, last);
    last = p;
  }
  EXPECT_NEAR(last, 1.0, 1e-6);
}

TEST(IdealLambdaMap, MatchedDumpAccumulates) {
  const auto s = area_schedule(40, ScheduleMode::fixed_pump, u::kPi / 6.6);
  const auto c = ideal_lambda_map(s, 0.0);
  EXPECT_LT(std::norm(c.input), 0.15);
  EXPECT_GT(std::norm(c.target), 0.85);
  EXPECT_NEAR(std::norm(c.input) + std::norm(c.excited) + std::norm(c.target), 1.0, 1e-12);
}

TEST(MatchedDump, Fractions) {
  EXPECT_DOUBLE_EQ(matched_dump_fraction(0.05, 0.0), 1.0);
  EXPECT_DOUBLE_EQ(matched_dump_fraction(0.05, 0.05), 0.5);
  EXPECT_DOUBLE_EQ(matched_dump_fraction(0.0, 0.0), 1.0);
}

TEST(PowerLaw, FitsExponentAndSkipsNonPositive) {
  std::vector<std::pair<double, double>> pts;
  for (int n = 20; n <= 40; ++n) pts.emplace_back(n, 3e-3 * std::sqrt(static_cast<double>(n)));
  const auto f = fit_power_law(pts);
  ASSERT_TRUE(f.fitted);
  EXPECT_NEAR(f.exponent, 0.5, 1e-12);
  pts[3].second = 0.0;
  const auto g = fit_power_law(pts);
  EXPECT_FALSE(g.fitted);
  EXPECT_NE(g.diagnostic.find("non-positive"), std::string::npos);
}

TEST(LeakageExponent, UsesSecondHalf) {
  AccumulationRecord rec;
  rec.neighbour_v = {3};
  for (int n = 1; n <= 40; ++n) {
    AccumulationRow r;
    r.n = n;
    r.pop_leaked = n <= 20 ? 1.0 : 1e-3 * std::sqrt(static_cast<double>(n));
    r.pop_input = 1.0 - 0.02 * n;
    r.neighbour_pop = {1e-4 * n};
    rec.rows.push_back(r);
  }
  const auto a = leakage_exponent(rec);
  EXPECT_NEAR(a.leak.exponent, 0.5, 1e-12);
  EXPECT_NEAR(a.depletion.exponent, 1.0, 1e-12);
  ASSERT_EQ(a.neighbours.size(), 1u);
  EXPECT_NEAR(a.neighbours[0].exponent, 1.0, 1e-12);
}

namespace {

struct ShortTrain {
  RunConfig cfg = oracle::load_config("desk_scale.toml");
  LambdaSystem sys = build_lambda_system(cfg.system);
  AreaCalibrator cal{sys, cfg.calibration_tolerance};
  PulsePairSchedule schedule = [this] {
    auto s = cfg.make_schedule(sys.delay);
    s.pairs = 4;
    s.pump_area.resize(4);
    s.dump_area.resize(4);
    return s;
  }();
  AccumulationRecord lossy = run_train(sys, schedule, cal, cfg.train_options());
};

const ShortTrain& short_train() {
  static const ShortTrain t;
  return t;
}

}  // namespace

TEST(RunTrain, BookkeepingCloses) {
  const auto& rec = short_train().lossy;
  ASSERT_EQ(rec.rows.size(), 4u);
  for (const auto& r : rec.rows) {
    EXPECT_NEAR(r.pop_input + r.pop_target + r.pop_leaked + r.pop_lost + r.pop_excited, 1.0, 1e-6) << "n=" << r.n;
    EXPECT_GE(r.pop_lost, -1e-9);
  }
  EXPECT_NEAR(rec.rows[0].pop_lost, 0.0, 1e-9);
  EXPECT_GT(rec.rows[3].pop_lost, 0.0);
}

TEST(RunTrain, LosslessTargetIsMonotonic) {
  const auto& t = short_train();
  const auto rec = run_train(t.sys, t.schedule, t.cal, TrainOptions{});
  for (std::size_t k = 1; k < rec.rows.size(); ++k) {
    EXPECT_GE(rec.rows[k].pop_target, rec.rows[k - 1].pop_target - 1e-6);
    // Only the tolerated unbound remainder is dropped between pairs.
    EXPECT_NEAR(rec.rows[k].pop_lost, 0.0, 1e-6 * static_cast<double>(k));
  }
}

TEST(RunTrain, RejectsShortRepetition) {
  const auto& t = short_train();
  auto s = t.schedule;
  s.repetition_time = 0.5 * t.sys.drive.window();
  EXPECT_THROW(run_train(t.sys, s, t.cal), InvalidArgument);
}

TEST(RobustnessScan, UnitFactorReproducesBaseRun) {
  const auto& t = short_train();
  const auto rows = robustness_scan(t.sys, t.schedule, t.cal, t.cfg.train_options(), {1.0});
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(rows[0].efficiency, t.lossy.efficiency());
  EXPECT_EQ(rows[0].pop_input, t.lossy.final().pop_input);
  EXPECT_THROW(robustness_scan(t.sys, t.schedule, t.cal, {}, {0.0}), InvalidArgument);
}
