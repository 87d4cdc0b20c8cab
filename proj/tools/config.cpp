#include "config.hpp"

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <limits>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "bdex/oracle.hpp"
#include "bdex/quasipotential.hpp"
#include "streams.hpp"

namespace bdex::cli {

namespace {

using nlohmann::json;

enum class ValueType { Int, UInt, Real, Text, RealList };

struct KeySpec {
  std::string section;
  std::string key;
  ValueType type;
  std::vector<std::string> choices;
  std::function<json(const ExperimentConfig&)> get;
  std::function<void(ExperimentConfig&, const json&)> set;
};

template <class T>
KeySpec field(const char* section, const char* key, ValueType type, T ExperimentConfig::*member,
              std::vector<std::string> choices = {}) {
  KeySpec spec{section, key, type, std::move(choices), nullptr, nullptr};
  spec.get = [member](const ExperimentConfig& c) { return json(c.*member); };
  spec.set = [member, key](ExperimentConfig& c, const json& j) {
    if constexpr (std::is_same_v<T, int>) {
      const auto v = j.get<std::int64_t>();
      if (v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max()) {
        throw std::out_of_range(fmt::format("{} is out of range", key));
      }
      c.*member = static_cast<int>(v);
    } else {
      c.*member = j.get<T>();
    }
  };
  return spec;
}

const std::vector<KeySpec>& key_table() {
  using C = ExperimentConfig;
  static const std::vector<KeySpec> table{
      field("experiment", "kind", ValueType::Text, &C::kind, kKinds),
      field("experiment", "seed", ValueType::UInt, &C::seed),
      field("experiment", "output", ValueType::Text, &C::output),
      field("model", "a", ValueType::Real, &C::a),
      field("model", "d", ValueType::Int, &C::d),
      field("model", "N", ValueType::Int, &C::N),
      field("boundary", "type", ValueType::Text, &C::boundaryType, {"constant", "affine", "tabulated"}),
      field("boundary", "value", ValueType::Real, &C::boundaryValue),
      field("boundary", "left", ValueType::Real, &C::boundaryLeft),
      field("boundary", "right", ValueType::Real, &C::boundaryRight),
      field("boundary", "left_values", ValueType::RealList, &C::boundaryLeftValues),
      field("boundary", "right_values", ValueType::RealList, &C::boundaryRightValues),
      field("mesh", "M1", ValueType::Int, &C::M1),
      field("mesh", "Mt", ValueType::Int, &C::Mt),
      field("time", "T", ValueType::Real, &C::T),
      field("time", "dt", ValueType::Real, &C::dt),
      field("time", "cfl_fraction", ValueType::Real, &C::cflFraction),
      field("time", "save_every", ValueType::Int, &C::saveEvery),
      field("kmc", "replicas", ValueType::Int, &C::replicas),
      field("kmc", "cells", ValueType::Int, &C::cells),
      field("kmc", "samples", ValueType::Int, &C::samples),
      field("kmc", "spacing", ValueType::Real, &C::spacing),
      field("kmc", "batches", ValueType::Int, &C::batches),
      field("kmc", "burn_in", ValueType::Real, &C::burnIn),
      field("kmc", "events", ValueType::Int, &C::events),
      field("kmc", "transient_replicas", ValueType::Int, &C::transientReplicas),
      field("kmc", "transient_time", ValueType::Real, &C::transientTime),
      field("kmc", "snapshots", ValueType::Int, &C::snapshots),
      field("functional", "perturbation", ValueType::Real, &C::perturbation),
      field("functional", "mode", ValueType::Int, &C::mode),
      field("functional", "trajectories", ValueType::Int, &C::trajectories),
      field("functional", "dictionary", ValueType::Int, &C::dictionary),
      field("quasipotential", "method", ValueType::Text, &C::method, {"interpolation", "reversal", "best-of"}),
      field("quasipotential", "family", ValueType::Text, &C::family, {"power", "cubic"}),
      field("quasipotential", "frames", ValueType::Int, &C::frames),
      field("quasipotential", "T", ValueType::Real, &C::qpT),
      field("quasipotential", "tolerance", ValueType::Real, &C::tolerance),
      field("quasipotential", "max_T", ValueType::Real, &C::maxT),
      field("quasipotential", "cfl_fraction", ValueType::Real, &C::qpCflFraction),
      field("quasipotential", "sweep", ValueType::Int, &C::sweep),
      field("initial", "type", ValueType::Text, &C::initialType, {"stationary", "constant", "bump", "random"}),
      field("initial", "value", ValueType::Real, &C::initialValue),
      field("initial", "amplitude", ValueType::Real, &C::amplitude),
      field("initial", "stream", ValueType::UInt, &C::stream),
  };
  return table;
}

const KeySpec* find_key(const std::string& section, const std::string& key) {
  for (const auto& spec : key_table()) {
    if (spec.section == section && spec.key == key) return &spec;
  }
  return nullptr;
}

bool known_section(const std::string& section) {
  return std::any_of(key_table().begin(), key_table().end(), [&](const KeySpec& s) { return s.section == section; });
}

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

double parse_real(const std::string& text) {
  const std::string t = trim(text);
  if (t.empty()) throw std::invalid_argument("expected a real number, got an empty value");
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(t.c_str(), &end);
  if (end != t.c_str() + t.size() || errno == ERANGE || !std::isfinite(v)) {
    throw std::invalid_argument(fmt::format("expected a real number, got '{}'", t));
  }
  return v;
}

json parse_value(const KeySpec& spec, const std::string& text) {
  switch (spec.type) {
    case ValueType::Int: {
      char* end = nullptr;
      errno = 0;
      const long long v = std::strtoll(text.c_str(), &end, 10);
      if (text.empty() || end != text.c_str() + text.size() || errno == ERANGE) {
        throw std::invalid_argument(fmt::format("expected an integer, got '{}'", text));
      }
      return json(static_cast<std::int64_t>(v));
    }
    case ValueType::UInt: {
      char* end = nullptr;
      errno = 0;
      const unsigned long long v = std::strtoull(text.c_str(), &end, 10);
      if (text.empty() || text[0] == '-' || end != text.c_str() + text.size() || errno == ERANGE) {
        throw std::invalid_argument(fmt::format("expected a nonnegative integer, got '{}'", text));
      }
      return json(static_cast<std::uint64_t>(v));
    }
    case ValueType::Real:
      return json(parse_real(text));
    case ValueType::Text:
      if (!spec.choices.empty() && std::find(spec.choices.begin(), spec.choices.end(), text) == spec.choices.end()) {
        std::string allowed;
        for (const auto& c : spec.choices) allowed += (allowed.empty() ? "" : ", ") + c;
        throw std::invalid_argument(fmt::format("'{}' is not one of: {}", text, allowed));
      }
      if (text.empty()) throw std::invalid_argument("empty value");
      return json(text);
    case ValueType::RealList: {
      std::vector<double> values;
      std::stringstream ss(text);
      std::string item;
      while (std::getline(ss, item, ',')) values.push_back(parse_real(item));
      if (values.empty()) throw std::invalid_argument("expected a comma-separated list of reals");
      return json(values);
    }
  }
  return {};
}

std::string format_value(const KeySpec& spec, const json& j) {
  switch (spec.type) {
    case ValueType::Int:
      return std::to_string(j.get<std::int64_t>());
    case ValueType::UInt:
      return std::to_string(j.get<std::uint64_t>());
    case ValueType::Real:
      return fmt::format("{}", j.get<double>());
    case ValueType::Text:
      return j.get<std::string>();
    case ValueType::RealList: {
      std::string out;
      for (double v : j.get<std::vector<double>>()) out += (out.empty() ? "" : ", ") + fmt::format("{}", v);
      return out;
    }
  }
  return {};
}

}  // namespace

BoundaryProfile ExperimentConfig::boundary() const {
  if (boundaryType == "constant") return BoundaryProfile::constant(boundaryValue);
  if (boundaryType == "affine") return BoundaryProfile::two_sided(boundaryLeft, boundaryRight);
  return BoundaryProfile::tabulated(boundaryLeftValues, boundaryRightValues);
}

double ExperimentConfig::time_step() const {
  return dt > 0.0 ? dt : cflFraction * pde::cfl_bound(mesh(), a);
}

pde::DensityField ExperimentConfig::initial_field() const {
  const auto m = mesh();
  if (initialType == "constant") return pde::DensityField::constant(m, initialValue);
  if (initialType == "random") {
    Rng rng(RngSpec{seed, kInitialStreamBase + stream});
    return qp::random_density_field(m, rng);
  }
  auto rho = pde::solve_elliptic(boundary(), a, m);
  if (initialType == "bump") {
    std::vector<double> v(rho.values().begin(), rho.values().end());
    for (int n = 0; n < m.node_count(); ++n) {
      v[n] += amplitude * std::sin(M_PI * (m.center(n)[0] + 1.0) / 2.0);
    }
    return pde::DensityField(m, std::move(v));
  }
  return rho;
}

ParsedConfig parse_config(const std::string& text) {
  ParsedConfig out;
  std::stringstream ss(text);
  std::string raw;
  std::string section;
  int line = 0;
  while (std::getline(ss, raw)) {
    ++line;
    // A comment starts at '#' or ';' at the beginning of the line or after whitespace.
    std::string content;
    for (std::size_t i = 0; i < raw.size(); ++i) {
      if ((raw[i] == '#' || raw[i] == ';') && (i == 0 || raw[i - 1] == ' ' || raw[i - 1] == '\t')) break;
      content += raw[i];
    }
    content = trim(content);
    if (content.empty()) continue;
    if (content.front() == '[') {
      if (content.back() != ']') {
        out.issues.push_back({line, fmt::format("malformed section header '{}'", content)});
        continue;
      }
      section = trim(content.substr(1, content.size() - 2));
      if (!known_section(section)) out.issues.push_back({line, fmt::format("unknown section [{}]", section)});
      continue;
    }
    const auto eq = content.find('=');
    if (eq == std::string::npos) {
      out.issues.push_back({line, fmt::format("expected 'key = value', got '{}'", content)});
      continue;
    }
    out.empty = false;
    const std::string key = trim(content.substr(0, eq));
    const std::string value = trim(content.substr(eq + 1));
    if (section.empty()) {
      out.issues.push_back({line, fmt::format("key '{}' appears before any section header", key)});
      continue;
    }
    if (!known_section(section)) continue;
    const KeySpec* spec = find_key(section, key);
    if (!spec) {
      out.issues.push_back({line, fmt::format("unknown key '{}' in [{}]", key, section)});
      continue;
    }
    const std::string id = section + "." + key;
    if (out.lines.count(id)) {
      out.issues.push_back({line, fmt::format("duplicate key '{}' in [{}] (first set on line {})", key, section,
                                              out.lines[id])});
      continue;
    }
    out.lines[id] = line;
    try {
      spec->set(out.config, parse_value(*spec, value));
    } catch (const std::exception& e) {
      out.issues.push_back({line, fmt::format("[{}] {}: {}", section, key, e.what())});
    }
  }
  if (!out.empty && !out.lines.count("experiment.kind")) {
    out.issues.push_back({0, "missing required key 'kind' in [experiment]"});
  }
  return out;
}

std::vector<Issue> validate(const ExperimentConfig& c, const std::map<std::string, int>& lines) {
  std::vector<Issue> issues;
  auto at = [&](const std::string& id) {
    const auto it = lines.find(id);
    return it == lines.end() ? 0 : it->second;
  };
  auto require = [&](bool ok, const std::string& id, const std::string& message) {
    if (!ok) issues.push_back({at(id), message});
    return ok;
  };

  require(std::find(kKinds.begin(), kKinds.end(), c.kind) != kKinds.end(), "experiment.kind",
          fmt::format("unknown experiment kind '{}'", c.kind));
  require(!c.output.empty(), "experiment.output", "output directory must not be empty");

  bool modelOk = require(c.a > -0.5, "model.a", fmt::format("a = {} violates a > -1/2", c.a));
  modelOk = require(c.d >= 1 && c.d <= 3, "model.d", fmt::format("d = {} must lie in 1..3", c.d)) && modelOk;
  modelOk = require(c.N >= 2, "model.N", fmt::format("N = {} must be at least 2", c.N)) && modelOk;

  auto inside = [](double v) { return v > 0.0 && v < 1.0; };
  if (c.boundaryType == "constant") {
    require(inside(c.boundaryValue), "boundary.value",
            fmt::format("b value {} outside the open interval (0,1)", c.boundaryValue));
  } else if (c.boundaryType == "affine") {
    require(inside(c.boundaryLeft), "boundary.left",
            fmt::format("b value {} outside the open interval (0,1)", c.boundaryLeft));
    require(inside(c.boundaryRight), "boundary.right",
            fmt::format("b value {} outside the open interval (0,1)", c.boundaryRight));
  } else if (c.boundaryType == "tabulated") {
    require(!c.boundaryLeftValues.empty(), "boundary.left_values", "tabulated boundary needs left_values");
    require(!c.boundaryRightValues.empty(), "boundary.right_values", "tabulated boundary needs right_values");
    for (double v : c.boundaryLeftValues) {
      require(inside(v), "boundary.left_values", fmt::format("b value {} outside the open interval (0,1)", v));
    }
    for (double v : c.boundaryRightValues) {
      require(inside(v), "boundary.right_values", fmt::format("b value {} outside the open interval (0,1)", v));
    }
  } else {
    require(false, "boundary.type", fmt::format("unknown boundary type '{}'", c.boundaryType));
  }

  bool meshOk = require(c.M1 >= 2, "mesh.M1", fmt::format("M1 = {} must be at least 2", c.M1));
  meshOk = require(c.Mt >= 1, "mesh.Mt", fmt::format("Mt = {} must be at least 1", c.Mt)) && meshOk;

  require(c.T > 0.0, "time.T", fmt::format("T = {} must be positive", c.T));
  require(c.dt >= 0.0, "time.dt", fmt::format("dt = {} must be nonnegative (0 selects the CFL step)", c.dt));
  require(c.cflFraction > 0.0 && c.cflFraction <= 1.0, "time.cfl_fraction",
          fmt::format("cfl_fraction = {} must lie in (0,1]", c.cflFraction));
  require(c.saveEvery >= 1, "time.save_every", "save_every must be at least 1");
  if (modelOk && meshOk && c.dt > 0.0) {
    const double bound = pde::cfl_bound(c.mesh(), c.a);
    require(c.dt <= bound, "time.dt", fmt::format("dt = {} exceeds the CFL bound {:.6g} for this mesh", c.dt, bound));
  }

  require(c.replicas >= 1, "kmc.replicas", "replicas must be at least 1");
  require(c.cells >= 1, "kmc.cells", "cells must be at least 1");
  require(c.batches >= 2, "kmc.batches", "batches must be at least 2");
  require(c.samples >= c.batches, "kmc.samples", "samples must be at least batches");
  require(c.spacing > 0.0, "kmc.spacing", "spacing must be positive");
  require(c.burnIn >= 0.0, "kmc.burn_in", "burn_in must be nonnegative");
  require(c.events >= 1, "kmc.events", "events must be at least 1");
  require(c.transientReplicas >= 1, "kmc.transient_replicas", "transient_replicas must be at least 1");
  require(c.transientTime > 0.0, "kmc.transient_time", "transient_time must be positive");
  require(c.snapshots >= 1, "kmc.snapshots", "snapshots must be at least 1");
  if (modelOk && c.kind == "oracle-validate") {
    const int sites = LatticeGeometry(c.model()).site_count();
    require(sites <= oracle::kMaxTransientSites, "model.N",
            fmt::format("oracle validation needs at most {} sites, got {}", oracle::kMaxTransientSites, sites));
  }
  const bool binned = c.kind == "hydrostatics" || c.kind == "hydrodynamics";
  if (modelOk && binned && c.cells > 2 * c.N - 1) {
    require(false, "kmc.cells", fmt::format("cells = {} exceeds the {} lattice columns", c.cells, 2 * c.N - 1));
  }

  require(c.perturbation >= 0.0, "functional.perturbation", "perturbation must be nonnegative");
  require(c.mode >= 1, "functional.mode", "mode must be at least 1");
  require(c.trajectories >= 1, "functional.trajectories", "trajectories must be at least 1");
  require(c.dictionary >= 1, "functional.dictionary", "dictionary must be at least 1");

  require(c.frames >= 2, "quasipotential.frames", "frames must be at least 2");
  require(c.qpT >= 0.0, "quasipotential.T", "T must be nonnegative (0 selects the adaptive horizon)");
  require(c.tolerance > 0.0, "quasipotential.tolerance", "tolerance must be positive");
  require(c.maxT > 0.0, "quasipotential.max_T", "max_T must be positive");
  require(c.qpCflFraction > 0.0 && c.qpCflFraction <= 1.0, "quasipotential.cfl_fraction",
          fmt::format("cfl_fraction = {} must lie in (0,1]", c.qpCflFraction));
  require(c.sweep >= 0, "quasipotential.sweep", "sweep must be nonnegative");

  require(c.initialValue >= 0.0 && c.initialValue <= 1.0, "initial.value",
          fmt::format("initial value {} outside [0,1]", c.initialValue));
  if (issues.empty()) {
    try {
      (void)c.boundary();
      (void)c.initial_field();
    } catch (const std::exception& e) {
      const std::string id = c.initialType == "bump" ? "initial.amplitude" : "initial.type";
      issues.push_back({at(id), fmt::format("initial density is invalid: {}", e.what())});
    }
  }
  return issues;
}

std::string format_issue(const std::string& source, const Issue& issue) {
  if (issue.line > 0) return fmt::format("{}:{}: {}", source, issue.line, issue.message);
  return fmt::format("{}: {}", source, issue.message);
}

json config_to_json(const ExperimentConfig& config) {
  json out = json::object();
  for (const auto& spec : key_table()) out[spec.section][spec.key] = spec.get(config);
  return out;
}

ExperimentConfig config_from_json(const json& j) {
  ExperimentConfig config;
  for (auto sec = j.begin(); sec != j.end(); ++sec) {
    for (auto it = sec.value().begin(); it != sec.value().end(); ++it) {
      const KeySpec* spec = find_key(sec.key(), it.key());
      if (!spec) throw std::invalid_argument(fmt::format("unknown key '{}' in [{}]", it.key(), sec.key()));
      spec->set(config, it.value());
    }
  }
  return config;
}

std::string config_to_ini(const ExperimentConfig& config) {
  std::string out;
  std::string section;
  for (const auto& spec : key_table()) {
    if (spec.section != section) {
      section = spec.section;
      out += fmt::format("{}[{}]\n", out.empty() ? "" : "\n", section);
    }
    const json v = spec.get(config);
    if (spec.type == ValueType::RealList && v.empty()) continue;
    out += fmt::format("{} = {}\n", spec.key, format_value(spec, v));
  }
  return out;
}

}  // namespace bdex::cli
