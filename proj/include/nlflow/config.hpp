#pragma once

// Flat key=value run configuration. Blank lines and '#' comments are
// ignored; unknown keys are rejected.

#include <algorithm>
#include <cctype>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "nlflow/error.hpp"
#include "nlflow/flow.hpp"
#include "nlflow/grid.hpp"
#include "nlflow/rof_solver.hpp"

namespace nlflow {

class RunConfig {
 public:
  /// Known keys with their defaults ("" = no default).
  static const std::vector<std::pair<std::string, std::string>>& schema() {
    static const std::vector<std::pair<std::string, std::string>> keys = {
        {"energy", "osc"},         {"r", "2"},
        {"s", "0.5"},              {"cutoff", "8"},
        {"radii", ""},             {"weights", ""},
        {"h", "1"},                {"t_max", "10"},
        {"dims", "64,64"},         {"dx", "1"},
        {"halo", ""},              {"tol", "1e-5"},
        {"max_iter", "50000"},     {"seed", "1"},
        {"levels", ""},            {"output", "."},
        {"record_certificates", "false"}, {"guard", "-1"},
        {"calibration", "-1"},     {"tail_correction", "false"},
        {"subcell", "false"},      {"frames", "false"},
    };
    return keys;
  }

  static bool known(const std::string& key) {
    const auto& s = schema();
    return std::any_of(s.begin(), s.end(), [&](const auto& kv) { return kv.first == key; });
  }

  void set(const std::string& key, const std::string& value) {
    require(known(key), ErrorCode::parse_error, "unknown key '" + key + "'");
    values_[key] = value;
  }

  bool has(const std::string& key) const { return values_.count(key) > 0; }

  std::string get(const std::string& key) const {
    if (auto it = values_.find(key); it != values_.end()) return it->second;
    for (const auto& [k, v] : schema())
      if (k == key) return v;
    throw Error(ErrorCode::parse_error, "unknown key '" + key + "'");
  }

  double number(const std::string& key) const {
    const std::string v = get(key);
    require(!v.empty(), ErrorCode::parse_error, "missing value for '" + key + "'");
    std::size_t used = 0;
    double x = 0.0;
    try {
      x = std::stod(v, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    require(used == v.size(), ErrorCode::parse_error, "'" + key + "' is not a number: " + v);
    return x;
  }

  long integer(const std::string& key) const {
    const double x = number(key);
    require(x == static_cast<double>(static_cast<long>(x)), ErrorCode::parse_error,
            "'" + key + "' must be an integer");
    return static_cast<long>(x);
  }

  bool flag(const std::string& key) const {
    const std::string v = get(key);
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw Error(ErrorCode::parse_error, "'" + key + "' must be true or false");
  }

  std::vector<double> list(const std::string& key) const {
    std::vector<double> out;
    std::string v = get(key);
    std::replace(v.begin(), v.end(), ',', ' ');
    std::replace(v.begin(), v.end(), 'x', ' ');
    std::istringstream in(v);
    std::string tok;
    while (in >> tok) {
      std::size_t used = 0;
      double x = 0.0;
      try {
        x = std::stod(tok, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      require(used == tok.size(), ErrorCode::parse_error, "bad list entry '" + tok + "' in " + key);
      out.push_back(x);
    }
    return out;
  }

  /// Every key with its effective value, one per line.
  std::string resolved() const {
    std::string out;
    for (const auto& [k, v] : schema()) {
      std::string val = get(k);
      if (k == "halo" && val.empty()) val = std::to_string(default_halo());
      out += k + "=" + val + "\n";
    }
    return out;
  }

  int default_halo() const {
    const double dx = number("dx");
    const std::string e = get("energy");
    if (e == "frac") return static_cast<int>(std::floor(number("cutoff") / dx * (1.0 + 1e-12)));
    double r = number("r");
    if (e == "weighted_osc" && !get("radii").empty()) r = list("radii").back();
    return static_cast<int>(std::floor(r / dx * (1.0 + 1e-12))) + 1;
  }

 private:
  std::map<std::string, std::string> values_;
};

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline RunConfig parse_config(const std::string& text) {
  RunConfig cfg;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    require(eq != std::string::npos, ErrorCode::parse_error,
            "line " + std::to_string(lineno) + ": expected key=value");
    cfg.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return cfg;
}

inline GridSpec make_grid(const RunConfig& cfg) {
  std::vector<int> dims;
  for (double d : cfg.list("dims")) dims.push_back(static_cast<int>(d));
  const int halo = cfg.get("halo").empty() ? cfg.default_halo() : static_cast<int>(cfg.integer("halo"));
  return GridSpec(dims, cfg.number("dx"), halo);
}

inline Energy make_energy(const RunConfig& cfg, const GridSpec& spec) {
  const std::string e = cfg.get("energy");
  if (e == "osc") return make_osc_params(spec, cfg.number("r"));
  if (e == "frac") return make_frac_params(spec, cfg.number("s"), cfg.number("cutoff"));
  if (e == "weighted_osc") return make_weighted_osc_params(spec, cfg.list("radii"), cfg.list("weights"));
  throw Error(ErrorCode::parse_error, "energy must be osc, frac or weighted_osc");
}

inline FlowConfig make_flow_config(const RunConfig& cfg, const GridSpec& spec) {
  FlowConfig f{make_energy(cfg, spec)};
  f.h = cfg.number("h");
  f.t_max = cfg.number("t_max");
  f.tol = cfg.number("tol");
  f.max_iter = cfg.integer("max_iter");
  f.record_certificates = cfg.flag("record_certificates");
  f.guard = static_cast<int>(cfg.integer("guard"));
  f.calibration = cfg.number("calibration");
  f.tail_correction = cfg.flag("tail_correction");
  f.subcell_datum = cfg.flag("subcell");
  return f;
}

}  // namespace nlflow
