#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "celldeploy/ddpg.hpp"
#include "celldeploy/run_io.hpp"

namespace celldeploy::cli {

/// "RxC" -> (rows, cols). Throws ValidationError("grid").
std::pair<int, int> parse_grid(const std::string& text);
/// "N" -> 1..N, "a,b,c" -> that list. Throws ValidationError("seeds").
std::vector<std::uint64_t> parse_seeds(const std::string& text);

/// Loads a scenario and applies an optional "RxC" grid override.
Scenario load_with_grid(const std::filesystem::path& path, const std::optional<std::string>& grid);

struct CoverageOptions {
  std::filesystem::path scenario;
  std::optional<std::string> grid;
  std::optional<Vec3> tx;  // canonical placement when absent
  Orientation orientation;
  std::filesystem::path out;
};

/// Writes coverage.csv and coverage.pgm into out; prints per-user powers and
/// the reward. Throws ValidationError naming an out-of-range component.
void cmd_coverage(const CoverageOptions& options, std::ostream& out);

struct TrainOptions {
  std::filesystem::path scenario;
  ActorVariant variant = ActorVariant::CnnOnly;
  std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
  std::filesystem::path out;
  std::optional<std::string> grid;
  TrainConfig train;
  std::optional<std::string> embed_cmd;
  int embed_dim = 0;
  bool resume = false;
  int jobs = 1;
  bool write_checkpoints = true;
};

struct SeedResult {
  std::uint64_t seed = 0;
  bool skipped = false;  // already complete under --resume
  RunArtifacts artifacts;
};

struct TrainSummary {
  std::vector<SeedResult> runs;
};

/// One directory per seed (seed_<s>/) plus summary.csv and manifest.json.
/// Refuses a non-empty output directory unless resume is set; on resume,
/// seeds whose outputs are complete for the same config are kept.
TrainSummary cmd_train(const TrainOptions& options, std::ostream& log);

/// Train/eval series of one seed directory. Throws SchemaError.
struct SeedSeries {
  Series train;
  Series eval;
};
SeedSeries read_seed_dir(const std::filesystem::path& dir);

struct PlotOptions {
  std::vector<std::filesystem::path> runs;  // cmd_train output directories
  std::filesystem::path out;
  int window = 50;
};

struct PlotResult {
  std::vector<std::filesystem::path> figures;
  std::filesystem::path comparison;
};

/// One SVG per scenario with one band per variant, plus comparison.csv
/// holding final eval statistics and the convergence step per variant.
PlotResult cmd_plot(const PlotOptions& options);

/// Entry point of the command-line tool; returns the process exit code.
int run(int argc, char** argv);

}  // namespace celldeploy::cli
