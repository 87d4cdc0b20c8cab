#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "config.hpp"
#include "experiments.hpp"

namespace fs = std::filesystem;
using namespace bdex::cli;

namespace {

enum Exit { kOk = 0, kUsage = 1, kInvalid = 2, kRuntime = 3 };

struct Loaded {
  ParsedConfig parsed;
  int status = kOk;
};

Loaded load(const std::string& path) {
  Loaded out;
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    std::cerr << fmt::format("error: cannot open config '{}'\n", path);
    out.status = kUsage;
    return out;
  }
  std::ostringstream text;
  text << in.rdbuf();
  out.parsed = parse_config(text.str());
  if (out.parsed.empty && out.parsed.issues.empty()) {
    std::cerr << fmt::format("error: config '{}' is empty; see configs/ for examples\n", path);
    out.status = kUsage;
    return out;
  }
  auto issues = out.parsed.issues;
  if (issues.empty()) issues = validate(out.parsed.config, out.parsed.lines);
  for (const auto& issue : issues) std::cerr << format_issue(path, issue) << '\n';
  if (!issues.empty()) out.status = kInvalid;
  return out;
}

int run(const std::string& path, const std::string& outOverride, int jobs) {
  auto loaded = load(path);
  if (loaded.status != kOk) return loaded.status;
  const ExperimentConfig& config = loaded.parsed.config;
  const fs::path out = outOverride.empty() ? fs::path(config.output) : fs::path(outOverride);
  try {
    fs::create_directories(out);
    const auto start = std::chrono::steady_clock::now();
    const auto result = run_experiment(config, RunContext{out, jobs, &std::cout});
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    write_json(out / "manifest.json", manifest_json(config, result));
    write_json(out / "timing.json", {{"wallSeconds", wall}, {"jobs", jobs}});
    std::cout << fmt::format("wrote {} files to {} in {:.2f} s\n", result.outputs.size() + 2, out.string(), wall);
    if (config.kind == "lemma-suite" && !result.summary.at("allPass").get<bool>()) {
      std::cerr << "error: some lemma-suite checks failed\n";
      return kRuntime;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntime;
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Boundary-driven exclusion experiments"};
  app.set_version_flag("--version", BDEX_VERSION);
  int jobs = 1;
  std::string out;
  app.add_option("--jobs,-j", jobs, "Worker threads for replica-level work")->check(CLI::PositiveNumber);
  app.add_option("--out,-o", out, "Output directory (overrides [experiment] output)");

  // Global options may also follow the subcommand.
  app.fallthrough();
  std::string runPath, validatePath;
  auto* runCmd = app.add_subcommand("run", "Validate a config and run the experiment");
  runCmd->add_option("config", runPath, "Config file")->required();
  auto* validateCmd = app.add_subcommand("validate", "Validate a config without running it");
  validateCmd->add_option("config", validatePath, "Config file")->required();
  app.require_subcommand(1);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  if (*runCmd) return run(runPath, out, jobs);
  const auto loaded = load(validatePath);
  if (loaded.status == kOk) std::cout << fmt::format("{}: ok ({})\n", validatePath, loaded.parsed.config.kind);
  return loaded.status;
}
