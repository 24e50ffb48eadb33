#include "celldeploy/run_io.hpp"

#include <charconv>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "celldeploy/errors.hpp"

namespace celldeploy {

using nlohmann::json;

namespace {

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error("cannot write " + path.string());
  f << text;
  if (!f) throw Error("failed writing " + path.string());
}

json train_json(const TrainConfig& c) {
  return {{"total_steps", c.total_steps},
          {"eval_every", c.eval_every},
          {"eval_steps", c.eval_steps},
          {"batch_size", c.batch_size},
          {"lr_actor", c.lr_actor},
          {"lr_critic", c.lr_critic},
          {"tau", c.tau},
          {"gamma", c.gamma},
          {"seeds", c.seeds},
          {"ou", {{"theta", c.ou.theta}, {"mu", c.ou.mu}, {"sigma", c.ou.sigma}, {"dt", c.ou.dt}}},
          {"warmup_steps", c.warmup_steps},
          {"replay_capacity", c.replay_capacity}};
}

TrainConfig train_from_json(const json& j) {
  TrainConfig c;
  c.total_steps = j.at("total_steps").get<int>();
  c.eval_every = j.at("eval_every").get<int>();
  c.eval_steps = j.at("eval_steps").get<int>();
  c.batch_size = j.at("batch_size").get<int>();
  c.lr_actor = j.at("lr_actor").get<double>();
  c.lr_critic = j.at("lr_critic").get<double>();
  c.tau = j.at("tau").get<double>();
  c.gamma = j.at("gamma").get<double>();
  c.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
  const json& ou = j.at("ou");
  c.ou = {ou.at("theta").get<double>(), ou.at("mu").get<double>(), ou.at("sigma").get<double>(), ou.at("dt").get<double>()};
  c.warmup_steps = j.at("warmup_steps").get<int>();
  c.replay_capacity = j.at("replay_capacity").get<int>();
  return c;
}

}  // namespace

std::string format_real(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

void write_train_rewards(const std::filesystem::path& path, std::span<const double> rewards) {
  std::string out = "step,reward\n";
  for (std::size_t i = 0; i < rewards.size(); ++i) out += std::to_string(i + 1) + "," + format_real(rewards[i]) + "\n";
  write_text(path, out);
}

void write_eval_rewards(const std::filesystem::path& path, const std::vector<EvalWindow>& evals) {
  std::string out = "step,mean_reward\n";
  for (const EvalWindow& w : evals) out += std::to_string(w.step) + "," + format_real(w.mean_reward) + "\n";
  write_text(path, out);
}

Series read_series(const std::filesystem::path& path, const std::string& value_column) {
  std::ifstream f(path);
  if (!f) throw SchemaError(path.string() + ": file missing");
  std::string line;
  if (!std::getline(f, line) || line != "step," + value_column)
    throw SchemaError(path.string() + ": expected header 'step," + value_column + "'");
  Series s;
  int lineno = 1;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto comma = line.find(',');
    int step = 0;
    double value = 0.0;
    const char* b = line.data();
    const char* e = b + line.size();
    if (comma == std::string::npos || std::from_chars(b, b + comma, step).ptr != b + comma ||
        std::from_chars(b + comma + 1, e, value).ptr != e)
      throw SchemaError(path.string() + ": malformed row " + std::to_string(lineno));
    s.steps.push_back(step);
    s.values.push_back(value);
  }
  return s;
}

void write_run_config(const std::filesystem::path& path, const RunConfig& c) {
  json j = {{"train", train_json(c.train)},
            {"scenario_path", c.scenario_path},
            {"variant", c.variant},
            {"seed", c.seed},
            {"grid", c.grid ? json(*c.grid) : json(nullptr)},
            {"embed_cmd", c.embed_cmd ? json(*c.embed_cmd) : json(nullptr)},
            {"embed_dim", c.embed_dim}};
  write_text(path, j.dump(2) + "\n");
}

RunConfig read_run_config(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw SchemaError(path.string() + ": file missing");
  try {
    const json j = json::parse(f);
    RunConfig c;
    c.train = train_from_json(j.at("train"));
    c.scenario_path = j.at("scenario_path").get<std::string>();
    c.variant = j.at("variant").get<std::string>();
    c.seed = j.at("seed").get<std::uint64_t>();
    if (!j.at("grid").is_null()) c.grid = j.at("grid").get<std::string>();
    if (!j.at("embed_cmd").is_null()) c.embed_cmd = j.at("embed_cmd").get<std::string>();
    c.embed_dim = j.at("embed_dim").get<int>();
    return c;
  } catch (const json::exception& e) {
    throw SchemaError(path.string() + ": " + e.what());
  }
}

void write_manifest(const std::filesystem::path& path, const RunManifest& m) {
  json j = {{"scenario_path", m.scenario_path},
            {"variant", m.variant},
            {"seeds", m.seeds},
            {"out_dir", m.out_dir},
            {"grid", m.grid ? json(*m.grid) : json(nullptr)},
            {"timestamp", m.timestamp}};
  write_text(path, j.dump(2) + "\n");
}

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace celldeploy
