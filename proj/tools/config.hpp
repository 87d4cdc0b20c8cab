#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "bdex/lattice.hpp"
#include "bdex/pde.hpp"

namespace bdex::cli {

inline const std::vector<std::string> kKinds{"hydrostatics",    "hydrodynamics",   "rate-functional",
                                             "quasipotential",  "oracle-validate", "lemma-suite"};

struct ExperimentConfig {
  // [experiment]
  std::string kind;
  std::uint64_t seed = 1;
  std::string output = "out";
  // [model]
  double a = 0.0;
  int d = 1;
  int N = 16;
  // [boundary]
  std::string boundaryType = "constant";
  double boundaryValue = 0.5;
  double boundaryLeft = 0.5;
  double boundaryRight = 0.5;
  std::vector<double> boundaryLeftValues;
  std::vector<double> boundaryRightValues;
  // [mesh]
  int M1 = 64;
  int Mt = 1;
  // [time]
  double T = 1.0;
  double dt = 0.0;  // 0 selects cflFraction * cfl_bound
  double cflFraction = 1.0;
  int saveEvery = 100;
  // [kmc]
  int replicas = 4;
  int cells = 8;
  int samples = 200;
  double spacing = 0.05;
  int batches = 20;
  double burnIn = 1.0;
  std::int64_t events = 1000000;
  std::int64_t transientReplicas = 20000;
  double transientTime = 0.1;
  int snapshots = 4;
  // [functional]
  double perturbation = 0.0;
  int mode = 1;
  int trajectories = 5;
  int dictionary = 50;
  // [quasipotential]
  std::string method = "best-of";
  std::string family = "power";
  int frames = 64;
  double qpT = 0.0;
  double tolerance = 1e-3;
  double maxT = 16.0;
  double qpCflFraction = 0.25;
  int sweep = 0;
  // [initial]
  std::string initialType = "stationary";
  double initialValue = 0.5;
  double amplitude = 0.1;
  std::uint64_t stream = 0;

  bool operator==(const ExperimentConfig&) const = default;

  ModelParams model() const { return {a, d, N}; }
  pde::Mesh mesh() const { return {d, M1, d > 1 ? Mt : 1}; }
  BoundaryProfile boundary() const;
  // Explicit step in use: dt, or cflFraction * cfl_bound when dt = 0.
  double time_step() const;
  pde::DensityField initial_field() const;
};

struct Issue {
  int line = 0;  // 0 when not tied to a line
  std::string message;
};

struct ParsedConfig {
  ExperimentConfig config;
  std::map<std::string, int> lines;  // "section.key" -> line
  std::vector<Issue> issues;
  bool empty = true;  // no key = value line at all
};

// Flat INI text: [section] headers, key = value lines, '#' or ';' comments.
ParsedConfig parse_config(const std::string& text);

// Semantic checks that need no simulation; issues carry the line of the
// offending key when it was set explicitly.
std::vector<Issue> validate(const ExperimentConfig& config, const std::map<std::string, int>& lines = {});

std::string format_issue(const std::string& source, const Issue& issue);

// Section -> key -> value, with every key of the grammar present.
nlohmann::json config_to_json(const ExperimentConfig& config);
ExperimentConfig config_from_json(const nlohmann::json& j);

// Canonical INI text of a configuration.
std::string config_to_ini(const ExperimentConfig& config);

}  // namespace bdex::cli
