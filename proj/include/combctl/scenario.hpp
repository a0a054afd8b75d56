#pragma once

#include <fftw3.h>
#include <openssl/evp.h>
#include <openssl/opensslv.h>

#include <Eigen/Core>
#include <charconv>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "combctl/accumulation.hpp"
#include "combctl/config.hpp"
#include "combctl/franck_condon.hpp"
#include "combctl/perturbative.hpp"
#include "combctl/potentials.hpp"
#include "combctl/propagator.hpp"
#include "combctl/pulses.hpp"
#include "combctl/units.hpp"

#ifndef COMBCTL_VERSION
#define COMBCTL_VERSION "0.0.0"
#endif

namespace combctl {

using Json = nlohmann::json;

inline std::string sha256_hex(std::string_view data) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1) {
    throw Error("sha256: digest failed");
  }
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 15];
  }
  return out;
}

/// Shortest round-trip decimal form.
inline std::string num(double x) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, end);
}

/// Comma-separated table with a header row and LF line endings.
class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> header) : width_(header.size()) { row(header); }

  template <typename... Ts>
  void add(const Ts&... cells) {
    std::vector<std::string> r{cell(cells)...};
    if (r.size() != width_) throw Error("CsvTable: row width mismatch");
    row(r);
  }

  void add_row(const std::vector<std::string>& cells) {
    if (cells.size() != width_) throw Error("CsvTable: row width mismatch");
    row(cells);
  }

  const std::string& text() const { return text_; }

 private:
  static std::string cell(double x) { return num(x); }
  static std::string cell(int x) { return std::to_string(x); }
  static std::string cell(std::size_t x) { return std::to_string(x); }
  static std::string cell(const std::string& s) { return s; }
  static std::string cell(const char* s) { return s; }

  void row(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) text_ += ',';
      text_ += cells[i];
    }
    text_ += '\n';
  }

  std::size_t width_;
  std::string text_;
};

/// Collects output files so the manifest can list them with checksums.
class OutputSet {
 public:
  explicit OutputSet(std::filesystem::path dir) : dir_(std::move(dir)) { std::filesystem::create_directories(dir_); }

  void write(const std::string& name, const std::string& content) {
    std::ofstream out(dir_ / name, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + (dir_ / name).string());
    out << content;
    files_.emplace_back(name, sha256_hex(content));
  }

  void write_json(const std::string& name, const Json& j) { write(name, j.dump(2) + "\n"); }

  const std::filesystem::path& dir() const { return dir_; }
  const std::vector<std::pair<std::string, std::string>>& files() const { return files_; }

 private:
  std::filesystem::path dir_;
  std::vector<std::pair<std::string, std::string>> files_;
};

struct ScenarioContext {
  RunConfig config;
  std::string config_text;  // raw bytes as read
  std::string config_path;
  std::filesystem::path out_dir;
  bool verbose = false;
  std::ostream* log = &std::cerr;

  // Subcommand options.
  bool design_check = false;
  std::vector<double> scan_factors;  // overrides the config list when non-empty
};

namespace detail {

inline void log_line(const ScenarioContext& ctx, const std::string& s) {
  if (ctx.verbose) *ctx.log << "[combctl] " << s << "\n";
}

inline double cm1(double eh) { return units::hartree_to_wavenumber(eh); }

inline Json potential_json(const MorsePotential& p) {
  return Json{{"name", p.name},
              {"De_cm1", cm1(p.dissociation_energy)},
              {"a_inv_angstrom", p.width * units::angstrom_to_bohr(1.0)},
              {"re_angstrom", units::bohr_to_angstrom(p.equilibrium_distance)},
              {"Te_cm1", cm1(p.electronic_offset)},
              {"bound_levels", count_bound_levels(p)}};
}

inline Json system_json(const LambdaSystem& sys) {
  return Json{{"pump_carrier_nm", units::hartree_to_wavelength_nm(sys.pump_carrier)},
              {"dump_carrier_nm", units::hartree_to_wavelength_nm(sys.dump_carrier)},
              {"intra_pair_delay_fs", units::atomic_to_fs(sys.delay)},
              {"grid_r_min_angstrom", units::bohr_to_angstrom(sys.grid.r_min)},
              {"grid_r_max_angstrom", units::bohr_to_angstrom(sys.grid.r_max)},
              {"grid_points", sys.grid.n_points},
              {"dt_fs", units::atomic_to_fs(sys.dt)},
              {"pair_window_fs", units::atomic_to_fs(sys.drive.window())}};
}

inline std::string level_table(const std::vector<const MorsePotential*>& pots) {
  CsvTable t({"potential", "v", "energy_cm1", "absolute_energy_cm1", "inner_turning_angstrom",
              "outer_turning_angstrom"});
  for (const auto* p : pots) {
    for (int v = 0; v <= max_bound_index(*p); ++v) {
      const double e = morse_energy(*p, v);
      const auto [a, b] = turning_points(*p, v);
      t.add(p->name, v, cm1(e), cm1(e + p->electronic_offset), units::bohr_to_angstrom(a),
            std::isfinite(b) ? num(units::bohr_to_angstrom(b)) : std::string("inf"));
    }
  }
  return t.text();
}

inline std::string fc_table(const FCSpectrum& fc) {
  CsvTable t({"detuning_cm1", "amplitude"});
  for (const auto& e : fc.entries) t.add(cm1(e.detuning), e.amplitude);
  return t.text();
}

inline std::string spectrum_table(const SpectralPulse& p) {
  CsvTable t({"detuning_cm1", "re_amplitude", "im_amplitude"});
  for (std::size_t k = 0; k < p.grid.size(); ++k) t.add(cm1(p.grid.omega(k)), p.amplitude[k].real(), p.amplitude[k].imag());
  return t.text();
}

inline std::string gnuplot_script(const std::string& subcommand) {
  std::string s = "set datafile separator ','\nset key autotitle columnhead\nset terminal pngcairo size 900,600\n";
  if (subcommand == "accumulate") {
    s += "set output 'accumulation.png'\nset xlabel 'pulse pair n'\nset ylabel 'population'\n"
         "plot 'accumulation.csv' using 1:2 with linespoints, '' using 1:4 with linespoints, "
         "'' using 1:5 with linespoints, '' using 1:6 with linespoints\n";
  } else if (subcommand == "propagate") {
    s += "set output 'propagate.png'\nset xlabel 'time (fs)'\nset ylabel 'population'\n"
         "plot 'propagate.csv' using 1:2 with lines, '' using 1:3 with lines, '' using 1:4 with lines\n";
  } else if (subcommand == "design") {
    s += "set output 'design.png'\nset xlabel 'detuning (cm^-1)'\nset ylabel 'amplitude'\n"
         "plot 'pump_spectrum.csv' using 1:2 with lines, 'dump_spectrum.csv' using 1:2 with lines, "
         "'' using 1:3 with lines\n";
  } else if (subcommand == "fc") {
    s += "set output 'fc.png'\nset xlabel 'detuning (cm^-1)'\nset ylabel 'F'\n"
         "plot 'fc_input.csv' using 1:2 with impulses, 'fc_target.csv' using 1:2 with impulses\n";
  } else if (subcommand == "scan") {
    s += "set output 'scan.png'\nset xlabel 'intensity factor'\nset ylabel 'efficiency'\n"
         "plot 'scan.csv' using 1:2 with linespoints\n";
  } else {
    s += "set output 'levels.png'\nset xlabel 'v'\nset ylabel 'energy (cm^-1)'\n"
         "plot 'levels.csv' using 2:3 with points\n";
  }
  return s;
}

inline Json leakage_json(const LeakageAnalysis& a, const std::vector<int>& neighbour_v) {
  auto fit = [](const PowerLawFit& f) {
    Json j{{"fitted", f.fitted}};
    if (f.fitted) j["exponent"] = f.exponent;
    else j["diagnostic"] = f.diagnostic;
    return j;
  };
  Json n = Json::array();
  for (std::size_t k = 0; k < a.neighbours.size(); ++k) {
    auto j = fit(a.neighbours[k]);
    j["v"] = neighbour_v[k];
    n.push_back(j);
  }
  return Json{{"leak", fit(a.leak)}, {"input_depletion", fit(a.depletion)}, {"neighbors", n}};
}

inline std::string accumulation_table(const AccumulationRecord& rec) {
  CsvTable t({"n", "pop_input", "pop_excited_peak", "pop_target", "pop_leaked", "pop_lost", "purity"});
  for (const auto& r : rec.rows) {
    t.add(r.n, r.pop_input, r.pop_excited_peak, r.pop_target, r.pop_leaked, r.pop_lost, r.purity);
  }
  return t.text();
}

}  // namespace detail

inline Json versions_json() {
  return Json{{"combctl", COMBCTL_VERSION},
              {"fftw", std::string(fftw_version)},
              {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                            std::to_string(EIGEN_MINOR_VERSION)},
              {"openssl", OPENSSL_VERSION_TEXT},
              {"compiler", __VERSION__},
              {"cxx_standard", __cplusplus}};
}

inline void write_manifest(const ScenarioContext& ctx, OutputSet& out, const std::string& subcommand) {
  Json files = Json::object();
  for (const auto& [name, hash] : out.files()) files[name] = Json{{"sha256", hash}};
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  char stamp[32];
  std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
  Json m{{"subcommand", subcommand},
         {"config_path", ctx.config_path},
         {"config_sha256", sha256_hex(ctx.config_text)},
         {"versions", versions_json()},
         {"outputs", files},
         {"created_utc", stamp}};
  std::ofstream f(out.dir() / "manifest.json", std::ios::binary | std::ios::trunc);
  f << m.dump(2) << "\n";
}

/// Runs one subcommand and writes its artifacts plus manifest.json.
inline void run_scenario(const ScenarioContext& ctx, const std::string& subcommand) {
  const auto& cfg = ctx.config;
  OutputSet out(ctx.out_dir);
  for (const auto& d : cfg.defaults_used) detail::log_line(ctx, "default " + d);

  if (subcommand == "eigen") {
    const auto& s = cfg.system;
    out.write("levels.csv", detail::level_table({&s.input_surface, &s.excited_surface, &s.target_surface}));
    out.write_json("summary.json", Json{{"potentials", Json::array({detail::potential_json(s.input_surface),
                                                                     detail::potential_json(s.excited_surface),
                                                                     detail::potential_json(s.target_surface)})}});
  } else {
    detail::log_line(ctx, "building the Lambda system");
    const auto sys = build_lambda_system(cfg.system);
    detail::log_line(ctx, "pair window " + num(units::atomic_to_fs(sys.drive.window())) + " fs, dt " +
                              num(units::atomic_to_fs(sys.dt)) + " fs");

    if (subcommand == "fc") {
      out.write("fc_input.csv", detail::fc_table(sys.fc_pump));
      out.write("fc_target.csv", detail::fc_table(sys.fc_dump));
      out.write_json("summary.json", Json{{"system", detail::system_json(sys)},
                                          {"input_fc_weight", sys.fc_pump.weight()},
                                          {"target_fc_weight", sys.fc_dump.weight()}});
    } else if (subcommand == "design") {
      out.write("pump_spectrum.csv", detail::spectrum_table(sys.pair.pump));
      out.write("dump_spectrum.csv", detail::spectrum_table(sys.pair.dump));
      const AreaCalibration cal = calibrate_area(sys.pair.pump, sys.fc_pump, cfg.pump_area);
      const auto pk = pump_wavepacket(sys.pair.pump, sys.fc_pump, sys.phase);
      const auto dk = reversed_dump_wavepacket(sys.pair.dump, sys.fc_dump);
      const double ov = std::abs(overlap(pk, dk));
      auto pulse_json = [&](const SpectralPulse& p, double scale) {
        return Json{{"carrier_nm", units::hartree_to_wavelength_nm(p.carrier)},
                    {"carrier_cm1", detail::cm1(p.carrier)},
                    {"gdd_fs2", cfg.system.gdd / (units::kAtomicTimePerFs * units::kAtomicTimePerFs)},
                    {"field_scale", scale}};
      };
      out.write_json("design.json", Json{{"pump", pulse_json(sys.pair.pump, cal.field_scale)},
                                         {"dump", pulse_json(sys.pair.dump, 1.0)},
                                         {"overlap", ov},
                                         {"system", detail::system_json(sys)}});
      if (ctx.design_check) {
        std::cout << "overlap " << num(ov) << "\n";
        std::cout << "v_excited,re_pump,im_pump,re_reversed_dump,im_reversed_dump\n";
        for (std::size_t k = 0; k < pk.levels.size(); ++k) {
          const auto a = pk.coefficients[k];
          const auto b = dk.coefficient(pk.levels[k]);
          std::cout << pk.levels[k] << "," << num(a.real()) << "," << num(a.imag()) << "," << num(b.real()) << ","
                    << num(b.imag()) << "\n";
        }
      }
    } else if (subcommand == "propagate") {
      const AreaCalibrator cal(sys, cfg.calibration_tolerance);
      const double s_p = cal.pump_scale(cfg.pump_area);
      const double s_d = cal.dump_scale(cfg.dump_area);
      const auto stepper = sys.stepper();
      auto state = ThreeSurfaceState::from_level(sys.input, Surface::input);
      std::vector<Projector> proj{{Surface::input, &sys.input}, {Surface::target, &sys.target}};
      CsvTable t({"time_fs", "norm_g1", "norm_e", "norm_g2", "pop_input", "pop_target", "purity"});
      auto record = [&](const ThreeSurfaceState& s, std::size_t) {
        const auto m = measure_populations(s, proj);
        t.add(units::atomic_to_fs(sys.drive.window_start + s.elapsed_time), m.surface_norm[0], m.surface_norm[1],
              m.surface_norm[2], m.level_population[0], m.level_population[1], m.purity(1, Surface::target));
      };
      record(state, 0);
      const std::size_t every = cfg.per_step ? 1 : cfg.sample_every;
      const auto diag = propagate_pulse_pair(state, stepper, sys.drive, s_p, s_d, 0.0, record, every);
      const auto m = measure_populations(state, proj);
      out.write("propagate.csv", t.text());
      out.write_json("summary.json", Json{{"system", detail::system_json(sys)},
                                          {"pump_field_scale", s_p},
                                          {"dump_field_scale", s_d},
                                          {"peak_excited", diag.peak_excited},
                                          {"pop_input", m.level_population[0]},
                                          {"pop_target", m.level_population[1]},
                                          {"norm_excited", m.surface_norm[1]},
                                          {"purity", m.purity(1, Surface::target)}});
    } else if (subcommand == "accumulate") {
      const AreaCalibrator cal(sys, cfg.calibration_tolerance);
      const auto schedule = cfg.make_schedule(sys.delay);
      auto opt = cfg.train_options();
      CsvTable steps({"n", "step", "time_fs", "norm_g1", "norm_e", "norm_g2"});
      if (cfg.per_step) {
        opt.sample_every = cfg.sample_every;
        opt.observe = [&](const ThreeSurfaceState& s, int n, std::size_t j) {
          steps.add(n, j, units::atomic_to_fs(static_cast<double>(j) * sys.dt + sys.drive.window_start),
                    s.norm(Surface::input), s.norm(Surface::excited), s.norm(Surface::target));
        };
      }
      const auto rec = run_train(sys, schedule, cal, opt);
      for (const auto& r : rec.rows) {
        detail::log_line(ctx, "pair " + std::to_string(r.n) + " input " + num(r.pop_input) + " target " +
                                  num(r.pop_target));
      }
      out.write("accumulation.csv", detail::accumulation_table(rec));
      if (cfg.per_step) out.write("accumulation_steps.csv", steps.text());
      const auto& f = rec.final();
      const double transferred = 1.0 - f.pop_input;
      out.write_json(
          "summary.json",
          Json{{"system", detail::system_json(sys)},
               {"pairs", cfg.pairs},
               {"pump_excited_fraction", rec.pump_excited_fraction},
               {"raman_phase_rad", rec.raman_phase},
               {"inter_pair_phase_rad", schedule.inter_pair_phase},
               {"final",
                Json{{"pop_input", f.pop_input},
                     {"pop_target", f.pop_target},
                     {"pop_leaked", f.pop_leaked},
                     {"pop_lost", f.pop_lost},
                     {"pop_excited", f.pop_excited},
                     {"purity", f.purity},
                     {"input_purity", f.input_purity}}},
               {"efficiency", f.pop_target},
               {"input_depletion", transferred},
               {"target_share_of_transferred", transferred > 0.0 ? f.pop_target / transferred : 0.0},
               {"exponents", detail::leakage_json(leakage_exponent(rec), rec.neighbour_v)}});
    } else if (subcommand == "scan") {
      const AreaCalibrator cal(sys, cfg.calibration_tolerance);
      const auto schedule = cfg.make_schedule(sys.delay);
      const auto factors = ctx.scan_factors.empty() ? cfg.scan_intensity : ctx.scan_factors;
      const auto rows = robustness_scan(sys, schedule, cal, cfg.train_options(), factors, cfg.scan_pump, cfg.scan_dump);
      CsvTable t({"factor", "efficiency", "pop_input"});
      Json entries = Json::array();
      for (const auto& r : rows) {
        t.add(r.factor, r.efficiency, r.pop_input);
        entries.push_back(Json{{"factor", r.factor}, {"efficiency", r.efficiency}, {"pop_input", r.pop_input}});
      }
      out.write("scan.csv", t.text());
      out.write_json("summary.json", Json{{"system", detail::system_json(sys)},
                                          {"scale_pump", cfg.scan_pump},
                                          {"scale_dump", cfg.scan_dump},
                                          {"efficiencies", entries}});
    } else {
      throw InvalidArgument("unknown subcommand '" + subcommand + "'");
    }
  }
  if (cfg.gnuplot) out.write("plot.gp", detail::gnuplot_script(subcommand));
  write_manifest(ctx, out, subcommand);
}

}  // namespace combctl
