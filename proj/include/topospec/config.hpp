#pragma once

// Sectioned key = value run configuration: parsing with line-numbered
// diagnostics, validation against a fixed schema, and canonical rendering.

#include "topospec/csv.hpp"
#include "topospec/types.hpp"

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

namespace topospec {

class ConfigError : public Error {
 public:
  explicit ConfigError(std::vector<std::string> issues)
      : Error(join(issues)), issues_(std::move(issues)) {}
  const std::vector<std::string>& issues() const { return issues_; }

 private:
  static std::string join(const std::vector<std::string>& xs) {
    std::string s;
    for (const auto& x : xs) s += (s.empty() ? "" : "\n") + x;
    return s;
  }
  std::vector<std::string> issues_;
};

enum class ValueKind { number, integer, text, flag, list };

using ConfigValue = std::variant<double, long, std::string, bool, std::vector<double>>;

struct KeySpec {
  std::string section;
  std::string key;
  ValueKind kind;
  std::vector<std::string> choices{};  // allowed words for text values
  double min = -HUGE_VAL;              // inclusive bounds for number/integer values
  double max = HUGE_VAL;
  bool positive = false;               // strictly > 0
};

inline const std::vector<KeySpec>& config_schema() {
  static const std::vector<KeySpec> schema = {
      {"system", "dimension", ValueKind::integer, {}, 1, 4},
      {"system", "metric.form", ValueKind::text, {"cartesian", "polar"}},
      {"system", "metric.m", ValueKind::number, {}, -HUGE_VAL, HUGE_VAL, true},
      {"system", "potential.family", ValueKind::text, {"free", "harmonic", "kepler"}},
      {"system", "potential.k1", ValueKind::number, {}, 0},
      {"system", "potential.k2", ValueKind::number, {}, 0},
      {"system", "potential.k3", ValueKind::number, {}, 0},
      {"system", "potential.k4", ValueKind::number, {}, 0},
      {"system", "potential.alpha", ValueKind::number, {}, -HUGE_VAL, HUGE_VAL, true},
      {"system", "energy", ValueKind::number},
      {"system", "angular_momentum", ValueKind::number, {}, 0},
      {"system", "hbar", ValueKind::number, {}, -HUGE_VAL, HUGE_VAL, true},

      {"command", "name", ValueKind::text,
       {"geodesic", "newton", "curvature", "euler", "spectrum", "check"}},
      {"command", "initial.q", ValueKind::list},
      {"command", "initial.direction", ValueKind::list},
      {"command", "span", ValueKind::number, {}, 0},
      {"command", "grid.lower", ValueKind::list},
      {"command", "grid.upper", ValueKind::list},
      {"command", "grid.n", ValueKind::integer, {}, 1, 1000},
      {"command", "domain.shape", ValueKind::text, {"box", "annulus", "radial", "reduced"}},
      {"command", "domain.lower", ValueKind::list},
      {"command", "domain.upper", ValueKind::list},
      {"command", "domain.r_inner", ValueKind::number, {}, 0},
      {"command", "domain.r_outer", ValueKind::number, {}, -HUGE_VAL, HUGE_VAL, true},
      {"command", "domain.q0", ValueKind::number},
      {"command", "domain.angular_factor", ValueKind::number, {}, -HUGE_VAL, HUGE_VAL, true},
      {"command", "relation", ValueKind::text, {"ho", "kepler_printed", "kepler_boundary"}},
      {"command", "levels", ValueKind::list},
      {"command", "free_param", ValueKind::text},
      {"command", "bracket", ValueKind::list},
      {"command", "q0", ValueKind::number},

      {"numeric", "tol", ValueKind::number, {}, -HUGE_VAL, HUGE_VAL, true},
      {"numeric", "epsilon", ValueKind::number, {}, 0},
      {"numeric", "inset", ValueKind::number, {}, 0},
      {"numeric", "extrapolate", ValueKind::flag},
      {"numeric", "quad.abs_tol", ValueKind::number, {}, -HUGE_VAL, HUGE_VAL, true},
      {"numeric", "quad.rel_tol", ValueKind::number, {}, -HUGE_VAL, HUGE_VAL, true},
      {"numeric", "quad.max_panels", ValueKind::integer, {}, 2, 1e7},
      {"numeric", "epsilon_stop", ValueKind::number, {}, 0},
      {"numeric", "boundary_guard", ValueKind::flag},
      {"numeric", "fd.step", ValueKind::number, {}, -HUGE_VAL, HUGE_VAL, true},
      {"numeric", "fd.order", ValueKind::integer, {}, 2, 4},

      {"output", "dir", ValueKind::text},
      {"output", "prefix", ValueKind::text},
  };
  return schema;
}

inline const KeySpec* find_key(const std::string& section, const std::string& key) {
  for (const auto& s : config_schema())
    if (s.section == section && s.key == key) return &s;
  return nullptr;
}

/// A validated configuration: section -> key -> typed value.
struct RunConfig {
  std::map<std::string, std::map<std::string, ConfigValue>> values;

  bool has(const std::string& section, const std::string& key) const {
    auto s = values.find(section);
    return s != values.end() && s->second.count(key) > 0;
  }

  template <typename T>
  std::optional<T> get(const std::string& section, const std::string& key) const {
    auto s = values.find(section);
    if (s == values.end()) return std::nullopt;
    auto it = s->second.find(key);
    if (it == s->second.end()) return std::nullopt;
    if constexpr (std::is_same_v<T, double>) {
      if (auto* l = std::get_if<long>(&it->second)) return static_cast<double>(*l);
    }
    return std::get<T>(it->second);
  }

  template <typename T>
  T value_or(const std::string& section, const std::string& key, T fallback) const {
    return get<T>(section, key).value_or(std::move(fallback));
  }

  template <typename T>
  T require(const std::string& section, const std::string& key) const {
    auto v = get<T>(section, key);
    if (!v) throw ConfigError({"missing required key '" + key + "' in [" + section + "]"});
    return *v;
  }

  void set(const std::string& section, const std::string& key, ConfigValue v) {
    values[section][key] = std::move(v);
  }

  bool operator==(const RunConfig&) const = default;
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::optional<double> parse_double(const std::string& text) {
  const std::string t = trim(text);
  if (t.empty()) return std::nullopt;
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(t.c_str(), &end);
  if (end != t.c_str() + t.size() || errno == ERANGE) return std::nullopt;
  return v;
}

inline std::string format_list(const std::vector<double>& xs) {
  std::string s;
  for (std::size_t i = 0; i < xs.size(); ++i) s += (i ? ", " : "") + format_number(xs[i]);
  return s;
}

}  // namespace detail

inline std::string render_value(const ConfigValue& v) {
  return std::visit(
      [](const auto& x) -> std::string {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, double>) return format_number(x);
        else if constexpr (std::is_same_v<T, long>) return std::to_string(x);
        else if constexpr (std::is_same_v<T, std::string>) return x;
        else if constexpr (std::is_same_v<T, bool>) return x ? "true" : "false";
        else return detail::format_list(x);
      },
      v);
}

/// Canonical text form; parse_config(render_config(c)) == c.
inline std::string render_config(const RunConfig& config) {
  std::ostringstream out;
  bool first = true;
  for (const char* section : {"system", "command", "numeric", "output"}) {
    auto s = config.values.find(section);
    if (s == config.values.end() || s->second.empty()) continue;
    out << (first ? "" : "\n") << '[' << section << "]\n";
    first = false;
    for (const auto& spec : config_schema()) {
      if (spec.section != section) continue;
      auto it = s->second.find(spec.key);
      if (it != s->second.end()) out << spec.key << " = " << render_value(it->second) << '\n';
    }
  }
  return out.str();
}

namespace detail {

inline void check_requirements(const RunConfig& c, std::vector<std::string>& issues) {
  auto missing = [&](const std::string& section, const std::string& key, const std::string& why) {
    if (!c.has(section, key))
      issues.push_back("missing required key '" + key + "' in [" + section + "]" +
                       (why.empty() ? "" : " (" + why + ")"));
  };
  missing("system", "dimension", "");
  missing("system", "potential.family", "");
  const auto name = c.get<std::string>("command", "name");
  // a spectrum may solve for the energy, so it is optional there
  if (name != "spectrum") missing("system", "energy", "");
  const long k = c.value_or<long>("system", "dimension", 0);
  const std::string family = c.value_or<std::string>("system", "potential.family", "");
  const std::string form = c.value_or<std::string>("system", "metric.form", "cartesian");
  if (family == "harmonic")
    for (long i = 1; i <= k && i <= 4; ++i)
      missing("system", "potential.k" + std::to_string(i), "harmonic potential");
  for (long i = k + 1; i <= 4; ++i)
    if (c.has("system", "potential.k" + std::to_string(i)))
      issues.push_back("potential.k" + std::to_string(i) + " exceeds the dimension " + std::to_string(k));
  if (family == "kepler") missing("system", "potential.alpha", "kepler potential");
  if (form == "polar" && k != 2) issues.push_back("metric.form = polar requires dimension = 2");

  auto list_size = [&](const std::string& key, std::size_t want) {
    if (auto v = c.get<std::vector<double>>("command", key); v && v->size() != want)
      issues.push_back("'" + key + "' in [command] needs " + std::to_string(want) + " values, got " +
                       std::to_string(v->size()));
  };
  if (auto order = c.get<long>("numeric", "fd.order"); order && *order != 2 && *order != 4)
    issues.push_back("fd.order must be 2 or 4");
  if (!name) return;
  const std::string why = "command " + *name;
  if (*name == "newton" || *name == "geodesic") {
    missing("command", "initial.q", why);
    missing("command", "initial.direction", why);
    missing("command", "span", why);
    list_size("initial.q", k);
    list_size("initial.direction", k);
  } else if (*name == "curvature") {
    missing("command", "grid.lower", why);
    missing("command", "grid.upper", why);
    missing("command", "grid.n", why);
    list_size("grid.lower", k);
    list_size("grid.upper", k);
  } else if (*name == "euler") {
    missing("command", "domain.shape", why);
    const std::string shape = c.value_or<std::string>("command", "domain.shape", "");
    if (shape == "box") {
      missing("command", "domain.lower", why + ", box");
      missing("command", "domain.upper", why + ", box");
      list_size("domain.lower", k);
      list_size("domain.upper", k);
    } else if (shape == "annulus" || shape == "radial") {
      // without radii a kepler system uses its apsidal radii
      if (!(family == "kepler" && c.has("system", "angular_momentum")))
        missing("command", "domain.r_outer", why + ", " + shape);
    } else if (shape == "reduced") {
      missing("command", "domain.q0", why + ", reduced");
      if (family != "harmonic") issues.push_back("domain.shape = reduced needs a harmonic potential");
    }
  } else if (*name == "spectrum") {
    missing("command", "relation", why);
    missing("command", "levels", why);
    missing("command", "free_param", why);
    missing("command", "bracket", why);
    list_size("bracket", 2);
    const std::string rel = c.value_or<std::string>("command", "relation", "");
    if (rel.rfind("kepler", 0) == 0) {
      missing("system", "angular_momentum", "kepler spectrum");
      if (family != "kepler") issues.push_back("relation " + rel + " needs potential.family = kepler");
    }
    if (rel == "ho" && family != "harmonic")
      issues.push_back("relation ho needs potential.family = harmonic");
  }
}

}  // namespace detail

/// Re-checks command-specific requirements, e.g. after overriding the command.
inline void validate_config(const RunConfig& config) {
  std::vector<std::string> issues;
  detail::check_requirements(config, issues);
  if (!issues.empty()) throw ConfigError(issues);
}

/// Parses and validates. All problems are collected and reported together,
/// each prefixed with its line number where one applies.
inline RunConfig parse_config(const std::string& text) {
  RunConfig config;
  std::vector<std::string> issues;
  std::string section = "system";
  std::set<std::pair<std::string, std::string>> seen;
  std::istringstream in(text);
  std::string raw;
  int line_no = 0;
  auto issue = [&](const std::string& msg) {
    issues.push_back("line " + std::to_string(line_no) + ": " + msg);
  };
  while (std::getline(in, raw)) {
    ++line_no;
    std::string line = raw;
    if (auto hash = line.find_first_of("#;"); hash != std::string::npos) line.resize(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') {
        issue("malformed section header '" + line + "'");
        continue;
      }
      section = detail::trim(line.substr(1, line.size() - 2));
      if (section != "system" && section != "command" && section != "numeric" && section != "output")
        issue("unknown section [" + section + "]");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      issue("expected 'key = value', got '" + line + "'");
      continue;
    }
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string text_value = detail::trim(line.substr(eq + 1));
    const KeySpec* spec = find_key(section, key);
    if (!spec) {
      issue("unknown key '" + key + "' in [" + section + "]");
      continue;
    }
    if (!seen.insert({section, key}).second) {
      issue("duplicate key '" + key + "' in [" + section + "]");
      continue;
    }
    if (text_value.empty()) {
      issue("empty value for '" + key + "'");
      continue;
    }
    auto check_range = [&](double v) {
      if (!std::isfinite(v)) {
        issue("range violation: '" + key + "' must be finite");
        return false;
      }
      if (v < spec->min || v > spec->max || (spec->positive && !(v > 0))) {
        issue("range violation: '" + key + "' = " + text_value + " is out of range");
        return false;
      }
      return true;
    };
    switch (spec->kind) {
      case ValueKind::number: {
        auto v = detail::parse_double(text_value);
        if (!v) {
          // strtod accepts "nan"/"inf"; anything else is not a number at all
          issue("'" + key + "' expects a number, got '" + text_value + "'");
        } else if (check_range(*v)) {
          config.set(section, key, *v);
        }
        break;
      }
      case ValueKind::integer: {
        auto v = detail::parse_double(text_value);
        if (!v || (std::isfinite(*v) && *v != std::floor(*v))) {
          issue("'" + key + "' expects an integer, got '" + text_value + "'");
        } else if (check_range(*v)) {
          config.set(section, key, static_cast<long>(*v));
        }
        break;
      }
      case ValueKind::text: {
        if (!spec->choices.empty() &&
            std::find(spec->choices.begin(), spec->choices.end(), text_value) == spec->choices.end()) {
          std::string allowed;
          for (const auto& c : spec->choices) allowed += (allowed.empty() ? "" : ", ") + c;
          issue("'" + key + "' must be one of {" + allowed + "}, got '" + text_value + "'");
        } else {
          config.set(section, key, text_value);
        }
        break;
      }
      case ValueKind::flag: {
        if (text_value == "true" || text_value == "1" || text_value == "yes")
          config.set(section, key, true);
        else if (text_value == "false" || text_value == "0" || text_value == "no")
          config.set(section, key, false);
        else
          issue("'" + key + "' expects true or false, got '" + text_value + "'");
        break;
      }
      case ValueKind::list: {
        std::vector<double> xs;
        std::stringstream items(text_value);
        std::string item;
        bool ok = true;
        while (std::getline(items, item, ',')) {
          auto v = detail::parse_double(item);
          if (!v) {
            issue("'" + key + "' expects comma-separated numbers, got '" + detail::trim(item) + "'");
            ok = false;
            break;
          }
          if (!check_range(*v)) {
            ok = false;
            break;
          }
          xs.push_back(*v);
        }
        if (ok) config.set(section, key, xs);
        break;
      }
    }
  }
  if (issues.empty()) detail::check_requirements(config, issues);
  if (!issues.empty()) throw ConfigError(issues);
  return config;
}

}  // namespace topospec
