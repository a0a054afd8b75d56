#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "combctl/config.hpp"
#include "support/oracles.hpp"

using namespace combctl;
namespace fs = std::filesystem;

namespace {

const std::string kConfigs = std::string(COMBCTL_SOURCE_DIR) + "/configs/";

std::string desk_text() { return read_text_file(kConfigs + "desk_scale.toml"); }

std::string replace_line(std::string text, const std::string& from, const std::string& to) {
  const auto p = text.find(from);
  EXPECT_NE(p, std::string::npos) << from;
  if (p != std::string::npos) text.replace(p, from.size(), to);
  return text;
}

std::string config_error(const std::string& text) {
  try {
    build_run_config(parse_config_text(text));
  } catch (const ConfigError& e) {
    return e.what();
  }
  return {};
}

struct Run {
  int status = -1;
  std::string out;
};

Run run_cli(const std::string& args) {
  const std::string cmd = std::string(COMBCTL_CLI) + " " + args + " 2>&1";
  Run r;
  FILE* p = popen(cmd.c_str(), "r");
  if (p == nullptr) return r;
  char buf[4096];
  while (std::fgets(buf, sizeof buf, p) != nullptr) r.out += buf;
  const int st = pclose(p);
  r.status = WIFEXITED(st) ? WEXITSTATUS(st) : -1;
  return r;
}

fs::path scratch(const std::string& name) {
  auto d = fs::temp_directory_path() / ("combctl_test_" + name);
  fs::remove_all(d);
  return d;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::size_t data_rows(const fs::path& csv) {
  std::istringstream in(slurp(csv));
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) n += line.empty() ? 0 : 1;
  return n == 0 ? 0 : n - 1;
}

}  // namespace

TEST(Config, DeskScaleRoundTrips) {
  const auto text = desk_text();
  const auto canonical = serialize_config(parse_config_text(text));
  EXPECT_EQ(serialize_config(parse_config_text(canonical)), canonical);
  EXPECT_NE(canonical.find("De_cm1 = 600.0\n"), std::string::npos);
  const auto cfg = build_run_config(parse_config_text(text));
  EXPECT_EQ(cfg.pairs, 40);
  EXPECT_NEAR(cfg.repetition_time, units::ns_to_atomic(10.0), 1e-6);
  EXPECT_NEAR(cfg.pump_area, units::kPi / 6.6, 1e-12);
}

TEST(Config, NegativeDepthNamesTheKey) {
  const auto msg = config_error(replace_line(desk_text(), "De_cm1 = 600", "De_cm1 = -5"));
  EXPECT_NE(msg.find("potential.input.De_cm1"), std::string::npos) << msg;
}

TEST(Config, MisspelledKeyIsRejected) {
  const auto msg = config_error(replace_line(desk_text(), "bandwidth_nm = ", "bandwith_nm = "));
  EXPECT_NE(msg.find("bandwith_nm"), std::string::npos) << msg;
}

TEST(Config, UnitSuffixMismatchIsReported) {
  const auto msg = config_error(replace_line(desk_text(), "repetition_ns = 10", "repetition_us = 0.01"));
  EXPECT_NE(msg.find("unit suffix"), std::string::npos) << msg;
}

TEST(Config, SyntaxErrorsCarryLineNumbers) {
  EXPECT_THROW(parse_config_text("[levels]\ninput_v 4\n"), ConfigError);
  try {
    parse_config_text("[levels]\ninput_v = 4\ninput_v = 5\n");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos);
  }
}

TEST(Config, DefaultsAreRecorded) {
  const auto cfg = build_run_config(parse_config_text(desk_text()));
  bool saw = false;
  for (const auto& d : cfg.defaults_used) saw |= d.rfind("pulse.dipole_au", 0) == 0;
  EXPECT_TRUE(saw);
}

TEST(Cli, VersionAndUsageErrors) {
  const auto v = run_cli("--version");
  EXPECT_EQ(v.status, 0);
  EXPECT_NE(v.out.find(COMBCTL_VERSION), std::string::npos);
  EXPECT_NE(run_cli("eigen").status, 0);
  const auto bad = scratch("bad");
  fs::create_directories(bad);
  std::ofstream(bad / "bad.toml") << replace_line(desk_text(), "De_cm1 = 600", "De_cm1 = -5");
  const auto r = run_cli("--config " + (bad / "bad.toml").string() + " --out " + (bad / "o").string() + " eigen");
  EXPECT_EQ(r.status, 2);
  EXPECT_NE(r.out.find("De_cm1"), std::string::npos);
}

TEST(Cli, EigenWritesOneRowPerBoundLevel) {
  const auto out = scratch("eigen");
  const auto r = run_cli("--config " + kConfigs + "desk_scale.toml --out " + out.string() + " eigen");
  ASSERT_EQ(r.status, 0) << r.out;
  const auto cfg = oracle::load_config("desk_scale.toml");
  const auto& s = cfg.system;
  const auto expected = count_bound_levels(s.input_surface) + count_bound_levels(s.excited_surface) +
                        count_bound_levels(s.target_surface);
  EXPECT_EQ(data_rows(out / "levels.csv"), static_cast<std::size_t>(expected));
  EXPECT_TRUE(fs::exists(out / "manifest.json"));
}

TEST(Cli, DesignCheckPrintsOverlap) {
  const auto out = scratch("design");
  const auto r = run_cli("--config " + kConfigs + "desk_scale.toml --out " + out.string() + " design --check");
  ASSERT_EQ(r.status, 0) << r.out;
  const auto p = r.out.find("overlap ");
  ASSERT_NE(p, std::string::npos);
  EXPECT_GT(std::stod(r.out.substr(p + 8)), 0.999);
  EXPECT_TRUE(fs::exists(out / "pump_spectrum.csv"));
  EXPECT_TRUE(fs::exists(out / "dump_spectrum.csv"));
}

TEST(Cli, AccumulateWritesOneRowPerPair) {
  const auto out = scratch("accumulate");
  const auto r = run_cli("--config " + kConfigs + "quick.toml --out " + out.string() + " accumulate");
  ASSERT_EQ(r.status, 0) << r.out;
  EXPECT_EQ(data_rows(out / "accumulation.csv"), 4u);
  EXPECT_EQ(slurp(out / "accumulation.csv").substr(0, 2), "n,");
  const auto summary = slurp(out / "summary.json");
  EXPECT_NE(summary.find("\"efficiency\""), std::string::npos);
  EXPECT_NE(summary.find("\"exponents\""), std::string::npos);
}

TEST(Cli, ScanReportsEachFactor) {
  const auto out = scratch("scan");
  const auto r = run_cli("--config " + kConfigs + "quick.toml --out " + out.string() + " scan --intensity 0.5,1,2");
  ASSERT_EQ(r.status, 0) << r.out;
  EXPECT_EQ(data_rows(out / "scan.csv"), 3u);
  EXPECT_EQ(run_cli("--config " + kConfigs + "quick.toml --out " + out.string() + " scan --intensity 1,-2").status, 2);
}
