#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "fetril/protocol.hpp"
#include "fetril/synth.hpp"

namespace fetril::cli {

/// Everything needed to reproduce a `run`; serialized flat as config.json.
struct ExperimentConfig {
  std::string manifest;
  std::string test_manifest;
  RunConfig run;
  std::optional<SynthSpec> synth;  // generate data into <out>/data when no manifest is given
  std::string out_dir = "results";
  bool save_bank = false;
};

nlohmann::ordered_json to_json(const ExperimentConfig& config);
/// Overlays keys present in `doc` onto `config`; unknown keys are a format error.
void apply_json(ExperimentConfig& config, const nlohmann::json& doc);

/// Runs the command line; returns the process exit code
/// (0 success, 1 runtime or contract failure, 2 usage error).
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace fetril::cli
