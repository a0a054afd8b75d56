#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "combctl/accumulation.hpp"
#include "combctl/error.hpp"
#include "combctl/potentials.hpp"
#include "combctl/units.hpp"

namespace combctl {

// ---------------------------------------------------------------------------
// TOML subset: [section.sub] headers, key = value with numbers, strings,
// booleans and flat numeric arrays, '#' comments. Full-line comments and blank
// lines are kept so that a canonical file serializes back byte for byte.

using ConfigValue = std::variant<double, std::string, bool, std::vector<double>>;

struct ConfigEntry {
  enum class Kind { value, comment, blank };
  Kind kind = Kind::value;
  std::string key;   // or comment text including '#'
  ConfigValue value;
  int line = 0;
};

struct ConfigSection {
  std::string name;  // empty for the preamble
  int line = 0;
  std::vector<ConfigEntry> entries;
};

struct ConfigDocument {
  std::vector<ConfigSection> sections;

  const ConfigEntry* find(std::string_view section, std::string_view key) const {
    for (const auto& s : sections) {
      if (s.name != section) continue;
      for (const auto& e : s.entries) {
        if (e.kind == ConfigEntry::Kind::value && e.key == key) return &e;
      }
    }
    return nullptr;
  }
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string_view::npos) return {};
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

inline bool is_key_char(char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_' || c == '-';
}

inline std::string format_number(double x) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, x);
  std::string s(buf, end);
  if (s.find_first_of(".eEni") == std::string::npos) s += ".0";
  return s;
}

class LineParser {
 public:
  LineParser(std::string_view text, int line) : s_(text), line_(line) {}

  ConfigValue value() {
    skip_ws();
    if (eof()) fail("missing value");
    ConfigValue v;
    const char c = s_[pos_];
    if (c == '"') {
      v = string();
    } else if (c == '[') {
      v = array();
    } else if (s_.substr(pos_, 4) == "true") {
      pos_ += 4;
      v = true;
    } else if (s_.substr(pos_, 5) == "false") {
      pos_ += 5;
      v = false;
    } else {
      v = number();
    }
    skip_ws();
    if (!eof() && s_[pos_] != '#') fail("unexpected text after value");
    return v;
  }

 private:
  bool eof() const { return pos_ >= s_.size(); }
  void skip_ws() {
    while (!eof() && (s_[pos_] == ' ' || s_[pos_] == '\t' || s_[pos_] == '\r')) ++pos_;
  }
  [[noreturn]] void fail(const std::string& what) const {
    throw ConfigError("line " + std::to_string(line_) + ": " + what);
  }

  double number() {
    const char* first = s_.data() + pos_;
    const char* last = s_.data() + s_.size();
    if (*first == '+') ++first;
    double x = 0.0;
    auto [ptr, ec] = std::from_chars(first, last, x);
    if (ec != std::errc{} || ptr == first) fail("malformed number");
    pos_ = static_cast<std::size_t>(ptr - s_.data());
    if (!std::isfinite(x)) fail("non-finite number");
    return x;
  }

  std::string string() {
    ++pos_;
    std::string out;
    while (!eof() && s_[pos_] != '"') {
      char c = s_[pos_++];
      if (c == '\\') {
        if (eof()) fail("unterminated escape");
        c = s_[pos_++];
        if (c == 'n') c = '\n';
        else if (c == 't') c = '\t';
        else if (c != '"' && c != '\\') fail("unsupported escape");
      }
      out += c;
    }
    if (eof()) fail("unterminated string");
    ++pos_;
    return out;
  }

  std::vector<double> array() {
    ++pos_;
    std::vector<double> out;
    skip_ws();
    if (!eof() && s_[pos_] == ']') {
      ++pos_;
      return out;
    }
    while (true) {
      skip_ws();
      out.push_back(number());
      skip_ws();
      if (eof()) fail("unterminated array");
      if (s_[pos_] == ']') {
        ++pos_;
        return out;
      }
      if (s_[pos_] != ',') fail("expected ',' in array");
      ++pos_;
    }
  }

  std::string_view s_;
  std::size_t pos_ = 0;
  int line_;
};

inline std::string escape(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    if (c == '\n') {
      out += "\\n";
      continue;
    }
    if (c == '\t') {
      out += "\\t";
      continue;
    }
    out += c;
  }
  return out + "\"";
}

}  // namespace detail

inline ConfigDocument parse_config_text(std::string_view text) {
  ConfigDocument doc;
  doc.sections.push_back({});
  std::set<std::string> seen_sections;
  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    const auto raw = text.substr(pos, nl - pos);
    ++line_no;
    const bool last = nl == text.size();
    pos = nl + 1;
    if (last && raw.empty()) break;
    const auto line = detail::trim(raw);
    auto& cur = doc.sections.back();
    if (line.empty()) {
      cur.entries.push_back({ConfigEntry::Kind::blank, {}, {}, line_no});
    } else if (line.front() == '#') {
      cur.entries.push_back({ConfigEntry::Kind::comment, std::string(line), {}, line_no});
    } else if (line.front() == '[') {
      const auto close = line.find(']');
      if (close == std::string_view::npos) throw ConfigError("line " + std::to_string(line_no) + ": unterminated section");
      const auto rest = detail::trim(line.substr(close + 1));
      if (!rest.empty() && rest.front() != '#') {
        throw ConfigError("line " + std::to_string(line_no) + ": text after section header");
      }
      const std::string name(detail::trim(line.substr(1, close - 1)));
      if (name.empty()) throw ConfigError("line " + std::to_string(line_no) + ": empty section name");
      for (char c : name) {
        if (!detail::is_key_char(c) && c != '.') {
          throw ConfigError("line " + std::to_string(line_no) + ": invalid section name '" + name + "'");
        }
      }
      if (!seen_sections.insert(name).second) {
        throw ConfigError("line " + std::to_string(line_no) + ": duplicate section [" + name + "]");
      }
      doc.sections.push_back({name, line_no, {}});
    } else {
      const auto eq = line.find('=');
      if (eq == std::string_view::npos) throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
      const std::string key(detail::trim(line.substr(0, eq)));
      if (key.empty()) throw ConfigError("line " + std::to_string(line_no) + ": empty key");
      for (char c : key) {
        if (!detail::is_key_char(c)) throw ConfigError("line " + std::to_string(line_no) + ": invalid key '" + key + "'");
      }
      for (const auto& e : cur.entries) {
        if (e.kind == ConfigEntry::Kind::value && e.key == key) {
          throw ConfigError("line " + std::to_string(line_no) + ": duplicate key '" + key + "'");
        }
      }
      detail::LineParser p(line.substr(eq + 1), line_no);
      cur.entries.push_back({ConfigEntry::Kind::value, key, p.value(), line_no});
    }
  }
  return doc;
}

inline std::string serialize_value(const ConfigValue& v) {
  if (const auto* d = std::get_if<double>(&v)) return detail::format_number(*d);
  if (const auto* s = std::get_if<std::string>(&v)) return detail::escape(*s);
  if (const auto* b = std::get_if<bool>(&v)) return *b ? "true" : "false";
  const auto& a = std::get<std::vector<double>>(v);
  std::string out = "[";
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (i) out += ", ";
    out += detail::format_number(a[i]);
  }
  return out + "]";
}

/// Canonical text: one `key = value` per line, numbers in shortest
/// round-trip form, comments and blank lines kept in place.
inline std::string serialize_config(const ConfigDocument& doc) {
  std::string out;
  for (const auto& s : doc.sections) {
    if (!s.name.empty()) out += "[" + s.name + "]\n";
    for (const auto& e : s.entries) {
      switch (e.kind) {
        case ConfigEntry::Kind::blank: out += "\n"; break;
        case ConfigEntry::Kind::comment: out += e.key + "\n"; break;
        case ConfigEntry::Kind::value: out += e.key + " = " + serialize_value(e.value) + "\n"; break;
      }
    }
  }
  return out;
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// ---------------------------------------------------------------------------
// Typed run configuration

struct RunConfig {
  SystemSpec system;
  double pump_carrier_nm = 0.0;
  double bandwidth_nm = 0.0;

  int pairs = 40;
  double repetition_time = 0.0;
  ScheduleMode schedule = ScheduleMode::fixed_pump;
  double pump_area = 0.0;
  double dump_area = 0.0;
  double inter_pair_phase = 0.0;
  bool inter_pair_phase_set = false;
  double gamma = 0.0;
  double calibration_tolerance = 1e-4;

  std::vector<double> scan_intensity;
  bool scan_pump = true;
  bool scan_dump = true;

  bool per_step = false;
  std::size_t sample_every = 0;
  bool gnuplot = false;

  ConfigDocument document;
  std::vector<std::string> defaults_used;  // "section.key = value"

  PulsePairSchedule make_schedule(double delay) const {
    auto s = area_schedule(pairs, schedule, pump_area, dump_area);
    s.repetition_time = repetition_time;
    s.inter_pair_phase = inter_pair_phase;
    s.intra_pair_delay = delay;
    return s;
  }

  TrainOptions train_options() const {
    TrainOptions o;
    o.gamma = gamma;
    return o;
  }
};

namespace detail {

/// Reads one section against a key list, tracking unknown keys, unit suffix
/// mistakes and defaults.
class SectionReader {
 public:
  SectionReader(const ConfigDocument& doc, std::string section, std::vector<std::string>& defaults)
      : doc_(doc), section_(std::move(section)), defaults_(defaults) {}

  double number(const std::string& key, std::optional<double> def = std::nullopt) {
    known_.insert(key);
    const auto* e = doc_.find(section_, key);
    if (e == nullptr) {
      if (!def) throw missing(key);
      defaults_.push_back(path(key) + " = " + format_number(*def));
      return *def;
    }
    const auto* d = std::get_if<double>(&e->value);
    if (d == nullptr) throw ConfigError(path(key) + ": expected a number");
    return *d;
  }

  double positive(const std::string& key, std::optional<double> def = std::nullopt) {
    const double x = number(key, def);
    if (!(x > 0.0)) throw ConfigError(path(key) + ": must be positive (got " + format_number(x) + ")");
    return x;
  }

  double non_negative(const std::string& key, std::optional<double> def = std::nullopt) {
    const double x = number(key, def);
    if (!(x >= 0.0)) throw ConfigError(path(key) + ": must be non-negative (got " + format_number(x) + ")");
    return x;
  }

  int integer(const std::string& key, std::optional<int> def = std::nullopt, int min = 0) {
    const double x = number(key, def ? std::optional<double>(*def) : std::nullopt);
    if (x != std::floor(x) || std::abs(x) > 1e9) throw ConfigError(path(key) + ": expected an integer");
    if (x < min) throw ConfigError(path(key) + ": must be at least " + std::to_string(min));
    return static_cast<int>(x);
  }

  bool boolean(const std::string& key, bool def) {
    known_.insert(key);
    const auto* e = doc_.find(section_, key);
    if (e == nullptr) {
      defaults_.push_back(path(key) + " = " + (def ? "true" : "false"));
      return def;
    }
    const auto* b = std::get_if<bool>(&e->value);
    if (b == nullptr) throw ConfigError(path(key) + ": expected true or false");
    return *b;
  }

  std::string text(const std::string& key, std::optional<std::string> def = std::nullopt) {
    known_.insert(key);
    const auto* e = doc_.find(section_, key);
    if (e == nullptr) {
      if (!def) throw missing(key);
      defaults_.push_back(path(key) + " = " + escape(*def));
      return *def;
    }
    const auto* s = std::get_if<std::string>(&e->value);
    if (s == nullptr) throw ConfigError(path(key) + ": expected a string");
    return *s;
  }

  std::vector<double> numbers(const std::string& key, std::vector<double> def) {
    known_.insert(key);
    const auto* e = doc_.find(section_, key);
    if (e == nullptr) {
      defaults_.push_back(path(key) + " = " + serialize_value(def));
      return def;
    }
    const auto* a = std::get_if<std::vector<double>>(&e->value);
    if (a == nullptr) throw ConfigError(path(key) + ": expected an array of numbers");
    return *a;
  }

  std::string path(const std::string& key) const { return section_ + "." + key; }

  /// Missing-key error naming a present key within two edits, if any.
  ConfigError missing(const std::string& key) const {
    for (const auto& s : doc_.sections) {
      if (s.name != section_) continue;
      for (const auto& e : s.entries) {
        if (e.kind == ConfigEntry::Kind::value && !known_.count(e.key) && edit_distance(e.key, key) <= 2) {
          return ConfigError(path(key) + ": missing required key (found unknown key '" + e.key + "')");
        }
      }
    }
    return ConfigError(path(key) + ": missing required key");
  }

  /// Rejects keys not read. A key sharing its stem with a known key but with a
  /// different unit suffix is reported as a unit mismatch.
  void finish() const {
    for (const auto& s : doc_.sections) {
      if (s.name != section_) continue;
      for (const auto& e : s.entries) {
        if (e.kind != ConfigEntry::Kind::value || known_.count(e.key)) continue;
        const auto stem = e.key.substr(0, e.key.find('_'));
        for (const auto& k : known_) {
          if (k.substr(0, k.find('_')) == stem && k.find('_') != std::string::npos &&
              e.key.find('_') != std::string::npos) {
            throw ConfigError(path(e.key) + ": unit suffix mismatch, expected '" + k + "'");
          }
        }
        throw ConfigError(path(e.key) + ": unknown key");
      }
    }
  }

 private:
  static std::size_t edit_distance(const std::string& a, const std::string& b) {
    std::vector<std::size_t> row(b.size() + 1);
    for (std::size_t j = 0; j <= b.size(); ++j) row[j] = j;
    for (std::size_t i = 1; i <= a.size(); ++i) {
      std::size_t diag = row[0];
      row[0] = i;
      for (std::size_t j = 1; j <= b.size(); ++j) {
        const std::size_t up = row[j];
        row[j] = std::min({row[j] + 1, row[j - 1] + 1, diag + (a[i - 1] == b[j - 1] ? 0 : 1)});
        diag = up;
      }
    }
    return row[b.size()];
  }

  const ConfigDocument& doc_;
  std::string section_;
  std::vector<std::string>& defaults_;
  std::set<std::string> known_;
};

inline MorsePotential read_potential(const ConfigDocument& doc, const std::string& section,
                                     std::vector<std::string>& defaults) {
  SectionReader r(doc, section, defaults);
  const std::string name = r.text("name", section.substr(section.find('.') + 1));
  const double de = r.positive("De_cm1");
  const double a = r.positive("a_inv_angstrom");
  const double re = r.positive("re_angstrom");
  const double te = r.non_negative("Te_cm1", 0.0);
  const double mu = r.positive("reduced_mass_amu");
  r.finish();
  try {
    return MorsePotential(name, units::wavenumber_to_hartree(de), a / units::angstrom_to_bohr(1.0),
                          units::angstrom_to_bohr(re), units::wavenumber_to_hartree(te),
                          units::amu_to_electron_masses(mu));
  } catch (const InvalidArgument& e) {
    throw ConfigError("[" + section + "]: " + e.what());
  }
}

}  // namespace detail

inline const std::vector<std::string>& config_sections() {
  static const std::vector<std::string> names{"potential.input", "potential.excited", "potential.target",
                                              "levels",          "pulse",             "train",
                                              "scan",            "numerics",          "output"};
  return names;
}

inline RunConfig build_run_config(ConfigDocument doc) {
  RunConfig cfg;
  for (const auto& s : doc.sections) {
    if (s.name.empty()) {
      for (const auto& e : s.entries) {
        if (e.kind == ConfigEntry::Kind::value) throw ConfigError(e.key + ": key outside any section");
      }
      continue;
    }
    const auto& known = config_sections();
    if (std::find(known.begin(), known.end(), s.name) == known.end()) {
      throw ConfigError("[" + s.name + "]: unknown section");
    }
  }
  auto& d = cfg.defaults_used;
  auto& sys = cfg.system;
  sys.input_surface = detail::read_potential(doc, "potential.input", d);
  sys.excited_surface = detail::read_potential(doc, "potential.excited", d);
  sys.target_surface = detail::read_potential(doc, "potential.target", d);

  {
    detail::SectionReader r(doc, "levels", d);
    sys.input_v = r.integer("input_v");
    sys.target_v = r.integer("target_v");
    sys.excited_center_v = r.integer("excited_center_v", std::nullopt, 1);
    for (double v : r.numbers("neighbor_v", {})) {
      if (v != std::floor(v) || v < 0) throw ConfigError(r.path("neighbor_v") + ": expected non-negative integers");
      sys.neighbour_v.push_back(static_cast<int>(v));
    }
    r.finish();
    if (sys.input_v > max_bound_index(sys.input_surface)) throw ConfigError(r.path("input_v") + ": level is not bound");
    if (sys.target_v > max_bound_index(sys.target_surface)) {
      throw ConfigError(r.path("target_v") + ": level is not bound");
    }
    if (sys.excited_center_v + 1 > max_bound_index(sys.excited_surface)) {
      throw ConfigError(r.path("excited_center_v") + ": level and its upper neighbour must be bound");
    }
    for (int v : sys.neighbour_v) {
      if (v > max_bound_index(sys.input_surface)) throw ConfigError(r.path("neighbor_v") + ": level is not bound");
    }
  }
  {
    detail::SectionReader r(doc, "pulse", d);
    cfg.pump_carrier_nm = r.non_negative("pump_carrier_nm", 0.0);
    cfg.bandwidth_nm = r.positive("bandwidth_nm");
    sys.gdd = units::fs2_to_atomic(r.number("gdd_fs2", 0.0));
    sys.window_fwhms = r.positive("window_fwhm", 3.0);
    sys.detuning_period = units::fs_to_atomic(r.non_negative("detuning_period_fs", 0.0));
    sys.dipole = r.positive("dipole_au", 1.0);
    const auto gauge = r.text("gauge", "dump_envelope");
    if (gauge == "dump_envelope") sys.gauge = ShapingGauge::dump_envelope;
    else if (gauge == "literal") sys.gauge = ShapingGauge::literal;
    else throw ConfigError(r.path("gauge") + ": expected \"dump_envelope\" or \"literal\"");
    const auto det = r.numbers("amplitude_detuning_cm1", {});
    const auto amp = r.numbers("amplitude_values", {});
    if (det.size() != amp.size()) {
      throw ConfigError(r.path("amplitude_values") + ": must have as many entries as amplitude_detuning_cm1");
    }
    if (!det.empty() && det.size() < 2) throw ConfigError(r.path("amplitude_detuning_cm1") + ": need two or more nodes");
    for (std::size_t k = 0; k < det.size(); ++k) {
      sys.amplitude_table.emplace_back(units::wavenumber_to_hartree(det[k]), amp[k]);
    }
    r.finish();
    const double e_center = sys.excited_surface.electronic_offset +
                            morse_energy(sys.excited_surface, sys.excited_center_v);
    const double e_input = sys.input_surface.electronic_offset + morse_energy(sys.input_surface, sys.input_v);
    sys.pump_carrier = cfg.pump_carrier_nm > 0.0 ? units::wavelength_nm_to_hartree(cfg.pump_carrier_nm) : 0.0;
    const double carrier = sys.pump_carrier > 0.0 ? sys.pump_carrier : e_center - e_input;
    if (!(carrier > 0.0)) throw ConfigError(r.path("pump_carrier_nm") + ": pump transition energy must be positive");
    sys.bandwidth = units::bandwidth_nm_to_hartree(cfg.bandwidth_nm, units::hartree_to_wavelength_nm(carrier));
  }
  {
    detail::SectionReader r(doc, "train", d);
    cfg.pairs = r.integer("pairs", 40, 1);
    cfg.repetition_time = units::ns_to_atomic(r.positive("repetition_ns", 10.0));
    const auto mode = r.text("schedule", "fixed_pump");
    if (mode == "eq1") cfg.schedule = ScheduleMode::eq1;
    else if (mode == "fixed_pump") cfg.schedule = ScheduleMode::fixed_pump;
    else if (mode == "fixed_both") cfg.schedule = ScheduleMode::fixed_both;
    else throw ConfigError(r.path("schedule") + ": expected \"eq1\", \"fixed_pump\" or \"fixed_both\"");
    cfg.pump_area = units::kPi * r.positive("pump_area_pi", 1.0 / 6.6);
    cfg.dump_area = units::kPi * r.positive("dump_area_pi", 0.5);
    if (cfg.pump_area > units::kPi + 1e-12) throw ConfigError(r.path("pump_area_pi") + ": must not exceed 1");
    if (cfg.dump_area > units::kPi + 1e-12) throw ConfigError(r.path("dump_area_pi") + ": must not exceed 1");
    cfg.inter_pair_phase_set = doc.find("train", "inter_pair_phase_rad") != nullptr;
    cfg.inter_pair_phase = r.number("inter_pair_phase_rad", 0.0);
    const double lifetime = r.non_negative("excited_lifetime_ns", 30.0);
    cfg.gamma = lifetime > 0.0 ? 1.0 / units::ns_to_atomic(lifetime) : 0.0;
    r.finish();
  }
  {
    detail::SectionReader r(doc, "scan", d);
    cfg.scan_intensity = r.numbers("intensity_factors", {0.5, 1.0, 2.0});
    for (double f : cfg.scan_intensity) {
      if (!(f > 0.0)) throw ConfigError(r.path("intensity_factors") + ": factors must be positive");
    }
    cfg.scan_pump = r.boolean("scale_pump", true);
    cfg.scan_dump = r.boolean("scale_dump", true);
    r.finish();
  }
  {
    detail::SectionReader r(doc, "numerics", d);
    const int points = r.integer("grid_points", 256, 4);
    if ((points & (points - 1)) != 0) throw ConfigError(r.path("grid_points") + ": must be a power of two");
    sys.grid_points = static_cast<std::size_t>(points);
    sys.dt = units::fs_to_atomic(r.non_negative("dt_fs", 0.0));
    const auto coupling = r.text("coupling", "exact");
    if (coupling == "exact") sys.coupling = CouplingMethod::exact;
    else if (coupling == "split") sys.coupling = CouplingMethod::split;
    else throw ConfigError(r.path("coupling") + ": expected \"exact\" or \"split\"");
    sys.tail_fraction = r.positive("pulse_tail_fraction", 1e-9);
    sys.capture.capture_tolerance = r.positive("capture_tolerance", 1e-6);
    sys.capture.capture_floor = r.positive("capture_floor", 1e-10);
    cfg.calibration_tolerance = r.positive("calibration_tolerance", 1e-4);
    r.finish();
  }
  {
    detail::SectionReader r(doc, "output", d);
    cfg.per_step = r.boolean("per_step", false);
    cfg.sample_every = static_cast<std::size_t>(r.integer("sample_every_steps", 100, 1));
    cfg.gnuplot = r.boolean("gnuplot", false);
    r.finish();
  }
  cfg.document = std::move(doc);
  return cfg;
}

inline RunConfig parse_config(const std::string& path) {
  return build_run_config(parse_config_text(read_text_file(path)));
}

}  // namespace combctl
