// Run configuration: a flat key-value document with typed sections. Unknown
// keys are hard errors; parse failures carry line numbers.
#ifndef NLHG_CONFIG_HPP
#define NLHG_CONFIG_HPP

#include <cstdint>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "nlhg/common.hpp"

namespace nlhg {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  std::string command;

  // [kernel]
  std::string family = "indicator-ball";
  int d = 3;
  int m = 1;
  double p = 2.0;
  double rho = 1.0;
  double c = 1.0;
  double cprime = 1.0;
  std::vector<double> axis;
  bool normalize = false;

  // [geometry]
  double box_lo = -1.0;
  double box_hi = 1.0;
  double h = 0.25;
  double delta = 0.0;
  double r = 0.0;  // perforation radius

  // [law]
  double delta_coeff = 1.0, delta_expo = 1.0;
  double r_coeff = 1.0, r_expo = 1.0;
  bool law_set = false;

  // [schedules]
  std::vector<double> eps_schedule{1.0};
  std::vector<double> R_schedule{8.0};
  std::vector<double> T_schedule{2.0};
  std::vector<double> z_schedule{1.0};
  std::vector<double> h_schedule;  // empty: use geometry h
  double r_short = 1.0;            // radius of the short-range comparison energy

  // [solver]
  double tol = 1e-6;
  int max_iter = 20000;
  double clamp_factor = 10.0;
  int eps_over_h = 4;

  // [output]
  std::string output_dir = "out";
  bool dump_fields = true;

  // [run]
  std::uint64_t seed = 1;
  int threads = 0;  // 0 = auto
  bool deterministic = false;
  int samples = 10000;

  std::vector<std::pair<std::string, std::string>> echo() const {
    std::vector<std::pair<std::string, std::string>> e;
    auto add = [&](const std::string& k, const std::string& v) { e.emplace_back(k, v); };
    auto list = [&](const std::vector<double>& v) {
      std::string s;
      for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) s += ' ';
        s += format_double(v[i]);
      }
      return s;
    };
    add("command", command);
    add("kernel.family", family);
    add("kernel.d", std::to_string(d));
    add("kernel.m", std::to_string(m));
    add("kernel.p", format_double(p));
    add("kernel.rho", format_double(rho));
    add("kernel.c", format_double(c));
    add("kernel.cprime", format_double(cprime));
    add("kernel.axis", list(axis));
    add("kernel.normalize", normalize ? "true" : "false");
    add("geometry.box", format_double(box_lo) + " " + format_double(box_hi));
    add("geometry.h", format_double(h));
    add("geometry.delta", format_double(delta));
    add("geometry.r", format_double(r));
    add("law.delta_coeff", format_double(delta_coeff));
    add("law.delta_expo", format_double(delta_expo));
    add("law.r_coeff", format_double(r_coeff));
    add("law.r_expo", format_double(r_expo));
    add("schedules.eps", list(eps_schedule));
    add("schedules.R", list(R_schedule));
    add("schedules.T", list(T_schedule));
    add("schedules.z", list(z_schedule));
    add("schedules.h", list(h_schedule));
    add("schedules.r_short", format_double(r_short));
    add("solver.tol", format_double(tol));
    add("solver.max_iter", std::to_string(max_iter));
    add("solver.clamp_factor", format_double(clamp_factor));
    add("solver.eps_over_h", std::to_string(eps_over_h));
    add("output.dir", output_dir);
    add("output.dump_fields", dump_fields ? "true" : "false");
    add("run.seed", std::to_string(seed));
    add("run.threads", std::to_string(threads));
    add("run.deterministic", deterministic ? "true" : "false");
    add("run.samples", std::to_string(samples));
    return e;
  }
};

namespace detail {

[[noreturn]] inline void config_fail(int line, const std::string& msg) {
  throw ConfigError("config line " + std::to_string(line) + ": " + msg);
}

inline double parse_double(const std::string& tok, int line) {
  std::size_t pos = 0;
  double v = 0;
  try {
    v = std::stod(tok, &pos);
  } catch (const std::exception&) {
    config_fail(line, "expected a number, got '" + tok + "'");
  }
  if (pos != tok.size()) config_fail(line, "trailing junk in number '" + tok + "'");
  return v;
}

inline long long parse_int(const std::string& tok, int line) {
  std::size_t pos = 0;
  long long v = 0;
  try {
    v = std::stoll(tok, &pos);
  } catch (const std::exception&) {
    config_fail(line, "expected an integer, got '" + tok + "'");
  }
  if (pos != tok.size()) config_fail(line, "trailing junk in integer '" + tok + "'");
  return v;
}

inline bool parse_bool(const std::string& tok, int line) {
  if (tok == "true" || tok == "1" || tok == "yes") return true;
  if (tok == "false" || tok == "0" || tok == "no") return false;
  config_fail(line, "expected a boolean, got '" + tok + "'");
}

inline std::vector<std::string> split_ws(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream is(s);
  std::string tok;
  while (is >> tok) out.push_back(tok);
  return out;
}

inline std::vector<double> parse_list(const std::string& s, int line) {
  std::vector<double> out;
  for (const auto& tok : split_ws(s)) out.push_back(parse_double(tok, line));
  if (out.empty()) config_fail(line, "empty schedule list");
  return out;
}

inline std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

}  // namespace detail

inline RunConfig parse_config(const std::string& text) {
  RunConfig cfg;
  std::istringstream is(text);
  std::string raw;
  std::string section;
  int line = 0;
  bool have_command = false;

  while (std::getline(is, raw)) {
    ++line;
    std::string s = raw;
    const std::size_t hash = s.find('#');
    if (hash != std::string::npos) s = s.substr(0, hash);
    s = detail::trim(s);
    if (s.empty()) continue;

    if (s.front() == '[') {
      if (s.back() != ']') detail::config_fail(line, "unterminated section header");
      section = detail::trim(s.substr(1, s.size() - 2));
      static const char* known[] = {"kernel", "geometry", "law",   "schedules",
                                    "solver", "output",   "run"};
      bool ok = false;
      for (const char* k : known) ok = ok || section == k;
      if (!ok) detail::config_fail(line, "unknown section [" + section + "]");
      continue;
    }

    const std::size_t eq = s.find('=');
    if (eq == std::string::npos) detail::config_fail(line, "expected key = value");
    const std::string key = detail::trim(s.substr(0, eq));
    const std::string value = detail::trim(s.substr(eq + 1));
    if (key.empty()) detail::config_fail(line, "empty key");
    if (value.empty()) detail::config_fail(line, "empty value for '" + key + "'");

    auto d = [&] { return detail::parse_double(value, line); };
    auto i = [&] { return detail::parse_int(value, line); };
    auto b = [&] { return detail::parse_bool(value, line); };
    auto lst = [&] { return detail::parse_list(value, line); };

    if (section.empty()) {
      if (key == "command") {
        cfg.command = value;
        have_command = true;
      } else {
        detail::config_fail(line, "unknown top-level key '" + key + "'");
      }
    } else if (section == "kernel") {
      if (key == "family") cfg.family = value;
      else if (key == "d") cfg.d = static_cast<int>(i());
      else if (key == "m") cfg.m = static_cast<int>(i());
      else if (key == "p") cfg.p = d();
      else if (key == "rho") cfg.rho = d();
      else if (key == "c") cfg.c = d();
      else if (key == "cprime") cfg.cprime = d();
      else if (key == "axis") cfg.axis = lst();
      else if (key == "normalize") cfg.normalize = b();
      else detail::config_fail(line, "unknown key 'kernel." + key + "'");
    } else if (section == "geometry") {
      if (key == "box") {
        const auto v = lst();
        if (v.size() != 2) detail::config_fail(line, "box takes two numbers: lo hi");
        cfg.box_lo = v[0];
        cfg.box_hi = v[1];
      } else if (key == "h") cfg.h = d();
      else if (key == "delta") cfg.delta = d();
      else if (key == "r") cfg.r = d();
      else detail::config_fail(line, "unknown key 'geometry." + key + "'");
    } else if (section == "law") {
      cfg.law_set = true;
      if (key == "delta_coeff") cfg.delta_coeff = d();
      else if (key == "delta_expo") cfg.delta_expo = d();
      else if (key == "r_coeff") cfg.r_coeff = d();
      else if (key == "r_expo") cfg.r_expo = d();
      else detail::config_fail(line, "unknown key 'law." + key + "'");
    } else if (section == "schedules") {
      if (key == "eps") cfg.eps_schedule = lst();
      else if (key == "R") cfg.R_schedule = lst();
      else if (key == "T") cfg.T_schedule = lst();
      else if (key == "z") cfg.z_schedule = lst();
      else if (key == "h") cfg.h_schedule = lst();
      else if (key == "r_short") cfg.r_short = d();
      else detail::config_fail(line, "unknown key 'schedules." + key + "'");
    } else if (section == "solver") {
      if (key == "tol") cfg.tol = d();
      else if (key == "max_iter") cfg.max_iter = static_cast<int>(i());
      else if (key == "clamp_factor") cfg.clamp_factor = d();
      else if (key == "eps_over_h") cfg.eps_over_h = static_cast<int>(i());
      else detail::config_fail(line, "unknown key 'solver." + key + "'");
    } else if (section == "output") {
      if (key == "dir") cfg.output_dir = value;
      else if (key == "dump_fields") cfg.dump_fields = b();
      else detail::config_fail(line, "unknown key 'output." + key + "'");
    } else if (section == "run") {
      if (key == "seed") cfg.seed = static_cast<std::uint64_t>(i());
      else if (key == "threads") cfg.threads = value == "auto" ? 0 : static_cast<int>(i());
      else if (key == "deterministic") cfg.deterministic = b();
      else if (key == "samples") cfg.samples = static_cast<int>(i());
      else detail::config_fail(line, "unknown key 'run." + key + "'");
    }
  }

  if (!have_command) throw ConfigError("config: missing required key 'command'");
  static const char* commands[] = {"verify-kernel", "fhom",        "phi",
                                   "phi-nl",        "capterm",     "gns-suite",
                                   "regime-sweep",  "recovery",    "negligibility"};
  bool ok = false;
  for (const char* c : commands) ok = ok || cfg.command == c;
  if (!ok) throw ConfigError("config: unknown command '" + cfg.command + "'");

  if (!(cfg.p > 1.0 && cfg.p < cfg.d)) {
    throw ConfigError("config: kernel.p must lie in (1, d); got p = " + format_double(cfg.p) +
                      " with d = " + std::to_string(cfg.d));
  }
  if (cfg.d < 2 || cfg.d > kMaxDim) throw ConfigError("config: kernel.d out of range");
  if (cfg.m < 1) throw ConfigError("config: kernel.m must be >= 1");
  if (cfg.h <= 0) throw ConfigError("config: geometry.h must be positive");
  if (cfg.box_hi <= cfg.box_lo) throw ConfigError("config: empty geometry box");
  if (cfg.tol <= 0) throw ConfigError("config: solver.tol must be positive");
  if (cfg.max_iter < 1) throw ConfigError("config: solver.max_iter must be >= 1");
  if (cfg.samples < 1) throw ConfigError("config: run.samples must be >= 1");
  if (cfg.threads < 0) throw ConfigError("config: run.threads must be 'auto' or >= 1");
  return cfg;
}

}  // namespace nlhg

#endif  // NLHG_CONFIG_HPP
