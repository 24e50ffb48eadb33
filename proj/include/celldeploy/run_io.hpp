#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "celldeploy/ddpg.hpp"

namespace celldeploy {

/// Shortest round-trip decimal form (up to 17 significant digits).
std::string format_real(double v);

struct Series {
  std::vector<int> steps;
  std::vector<double> values;
};

/// "step,reward", steps numbered from 1.
void write_train_rewards(const std::filesystem::path& path, std::span<const double> rewards);
/// "step,mean_reward", one row per evaluation window.
void write_eval_rewards(const std::filesystem::path& path, const std::vector<EvalWindow>& evals);
/// Reads a two-column CSV with header "step,<value_column>". Throws
/// SchemaError naming the file on a missing file, header mismatch or bad row.
Series read_series(const std::filesystem::path& path, const std::string& value_column);

/// Per-run settings as written to config.json.
struct RunConfig {
  TrainConfig train;
  std::string scenario_path;
  std::string variant;
  std::uint64_t seed = 0;
  std::optional<std::string> grid;
  std::optional<std::string> embed_cmd;
  int embed_dim = 0;
};

void write_run_config(const std::filesystem::path& path, const RunConfig& config);
RunConfig read_run_config(const std::filesystem::path& path);

struct RunManifest {
  std::string scenario_path;
  std::string variant;
  std::vector<std::uint64_t> seeds;
  std::string out_dir;
  std::optional<std::string> grid;
  std::string timestamp;  // ISO 8601 UTC
};

void write_manifest(const std::filesystem::path& path, const RunManifest& manifest);
std::string utc_timestamp();

}  // namespace celldeploy
