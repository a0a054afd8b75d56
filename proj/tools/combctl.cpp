// combctl: design and simulate shaped pump-dump pulse trains.

#include <CLI11.hpp>

#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "combctl/config.hpp"
#include "combctl/error.hpp"
#include "combctl/scenario.hpp"

namespace {

std::vector<double> parse_factors(const std::string& list) {
  std::vector<double> out;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    double x = 0.0;
    try {
      x = std::stod(item, &used);
    } catch (const std::exception&) {
      throw combctl::ConfigError("--intensity: cannot parse '" + item + "'");
    }
    if (used != item.size() || !(x > 0.0)) throw combctl::ConfigError("--intensity: bad factor '" + item + "'");
    out.push_back(x);
  }
  if (out.empty()) throw combctl::ConfigError("--intensity: empty list");
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Shaped pump-dump pulse-train simulator"};
  app.set_version_flag("--version", COMBCTL_VERSION);
  std::string config_path;
  std::string out_dir = "out";
  bool verbose = false;
  app.add_option("--config", config_path, "Run configuration (TOML)")->required()->check(CLI::ExistingFile);
  app.add_option("--out", out_dir, "Output directory");
  app.add_flag("--verbose,-v", verbose, "Log progress and defaults to stderr");
  app.require_subcommand(1);

  app.add_subcommand("eigen", "Bound level tables of the three potentials");
  app.add_subcommand("fc", "Franck-Condon spectra of the input and target levels");
  auto* design = app.add_subcommand("design", "Shaped pump and dump spectra");
  bool check = false;
  design->add_flag("--check", check, "Print the perturbative overlap and per-level coefficients");
  app.add_subcommand("propagate", "Propagate one pulse pair");
  app.add_subcommand("accumulate", "Run the pulse train");
  auto* scan = app.add_subcommand("scan", "Intensity robustness scan");
  std::string intensity;
  scan->add_option("--intensity", intensity, "Comma-separated intensity factors");

  CLI11_PARSE(app, argc, argv);
  const std::string sub = app.get_subcommands().front()->get_name();

  try {
    combctl::ScenarioContext ctx;
    ctx.config_path = config_path;
    ctx.config_text = combctl::read_text_file(config_path);
    ctx.config = combctl::build_run_config(combctl::parse_config_text(ctx.config_text));
    ctx.out_dir = out_dir;
    ctx.verbose = verbose;
    ctx.design_check = check;
    if (!intensity.empty()) ctx.scan_factors = parse_factors(intensity);
    for (const auto& d : ctx.config.defaults_used) std::cerr << "[combctl] default " << d << "\n";
    ctx.config.defaults_used.clear();
    combctl::run_scenario(ctx, sub);
  } catch (const combctl::ConfigError& e) {
    std::cerr << "combctl: config error: " << e.what() << "\n";
    return 2;
  } catch (const combctl::Error& e) {
    std::cerr << "combctl: " << sub << " failed: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "combctl: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
