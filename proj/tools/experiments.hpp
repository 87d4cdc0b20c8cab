#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "config.hpp"

#ifndef BDEX_VERSION
#define BDEX_VERSION "0.0.0"
#endif

namespace bdex::cli {

struct RunContext {
  std::filesystem::path out;
  int jobs = 1;
  std::ostream* log = nullptr;
};

struct RunResult {
  std::vector<std::string> outputs;  // file names relative to the output directory
  nlohmann::json summary;
};

// Runs the experiment of config.kind, writing its files into ctx.out.
RunResult run_experiment(const ExperimentConfig& config, const RunContext& ctx);

struct SuiteCheck {
  std::string name;
  double value = 0.0;
  std::string requirement;  // e.g. "<= 1e-08"
  bool pass = false;
};

// Config echo, versions, seed and stream layout, outputs and summary. Holds
// nothing that varies between identical runs.
nlohmann::json manifest_json(const ExperimentConfig& config, const RunResult& result);

std::vector<SuiteCheck> lemma_suite(const ExperimentConfig& config, int jobs);

void write_text(const std::filesystem::path& path, const std::string& text);
void write_json(const std::filesystem::path& path, const nlohmann::json& j);

}  // namespace bdex::cli
