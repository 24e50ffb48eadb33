#include "celldeploy/cli.hpp"

#include <atomic>
#include <cstdio>
#include <fstream>
#include <iostream>
#if defined(__GLIBC__)
#include <malloc.h>
#endif
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "celldeploy/report.hpp"
#include "celldeploy/run_io.hpp"

namespace celldeploy::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Attention buffers are a few MB and reallocated every step. Keeping them on
// the heap instead of fresh mmaps avoids page-fault churn (~2x on training).
void keep_large_blocks_on_heap() {
#if defined(__GLIBC__)
  static std::once_flag once;
  std::call_once(once, [] {
    mallopt(M_MMAP_THRESHOLD, 64 << 20);
    mallopt(M_TRIM_THRESHOLD, 256 << 20);
  });
#endif
}

constexpr const char* kActionNames[kActionDim] = {"x", "y", "z", "alpha", "theta", "phi"};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error("cannot write " + path.string());
  f << text;
}

fs::path seed_dir(const fs::path& out, std::uint64_t seed) { return out / ("seed_" + std::to_string(seed)); }

std::string step_name(int step) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "step_%04d.ckpt", step);
  return buf;
}

bool dir_non_empty(const fs::path& p) { return fs::exists(p) && fs::is_directory(p) && !fs::is_empty(p); }

bool seed_complete(const fs::path& dir, const RunConfig& expected) {
  try {
    const RunConfig got = read_run_config(dir / "config.json");
    if (got.scenario_path != expected.scenario_path || got.variant != expected.variant || got.seed != expected.seed ||
        got.grid != expected.grid || got.embed_cmd != expected.embed_cmd || got.embed_dim != expected.embed_dim)
      return false;
    const TrainConfig& g = got.train;
    const TrainConfig& e = expected.train;
    if (g.total_steps != e.total_steps || g.eval_every != e.eval_every || g.eval_steps != e.eval_steps ||
        g.batch_size != e.batch_size || g.lr_actor != e.lr_actor || g.lr_critic != e.lr_critic || g.tau != e.tau ||
        g.gamma != e.gamma || g.warmup_steps != e.warmup_steps || g.replay_capacity != e.replay_capacity)
      return false;
    const Series tr = read_series(dir / "train_rewards.csv", "reward");
    const Series ev = read_series(dir / "eval_rewards.csv", "mean_reward");
    return static_cast<int>(tr.values.size()) == e.total_steps &&
           static_cast<int>(ev.values.size()) == e.total_steps / e.eval_every;
  } catch (const Error&) {
    return false;
  }
}

void write_summary(const fs::path& path, const std::vector<SeedSeries>& runs, int window) {
  std::string out = "series,step,mean,std\n";
  const auto emit = [&](const char* name, const std::vector<int>& steps, const std::vector<std::vector<double>>& vals) {
    const MeanStd ms = mean_std(vals);
    for (std::size_t i = 0; i < steps.size(); ++i)
      out += std::string(name) + "," + std::to_string(steps[i]) + "," + format_real(ms.mean[i]) + "," +
             format_real(ms.std[i]) + "\n";
  };
  std::vector<std::vector<double>> train, smooth, eval;
  for (const SeedSeries& s : runs) {
    train.push_back(s.train.values);
    smooth.push_back(moving_average(s.train.values, window));
    eval.push_back(s.eval.values);
  }
  emit("train", runs.front().train.steps, train);
  emit("train_smoothed", runs.front().train.steps, smooth);
  emit("eval", runs.front().eval.steps, eval);
  write_text(path, out);
}

}  // namespace

std::pair<int, int> parse_grid(const std::string& text) {
  const auto x = text.find_first_of("xX");
  int r = 0, c = 0;
  try {
    if (x == std::string::npos) throw std::invalid_argument(text);
    std::size_t used = 0;
    r = std::stoi(text.substr(0, x), &used);
    if (used != x) throw std::invalid_argument(text);
    c = std::stoi(text.substr(x + 1), &used);
    if (used != text.size() - x - 1) throw std::invalid_argument(text);
  } catch (const std::exception&) {
    throw ValidationError("grid", "expected ROWSxCOLS, got '" + text + "'");
  }
  if (r < 1 || c < 1) throw ValidationError("grid", "rows and cols must be >= 1");
  return {r, c};
}

std::vector<std::uint64_t> parse_seeds(const std::string& text) {
  std::vector<std::uint64_t> seeds;
  try {
    if (text.find(',') == std::string::npos) {
      std::size_t used = 0;
      const long n = std::stol(text, &used);
      if (used != text.size() || n < 1) throw std::invalid_argument(text);
      for (long i = 1; i <= n; ++i) seeds.push_back(static_cast<std::uint64_t>(i));
    } else {
      std::stringstream ss(text);
      std::string item;
      while (std::getline(ss, item, ',')) {
        std::size_t used = 0;
        const unsigned long long v = std::stoull(item, &used);
        if (used != item.size()) throw std::invalid_argument(item);
        seeds.push_back(v);
      }
    }
  } catch (const std::exception&) {
    throw ValidationError("seeds", "expected a count N or a comma-separated list, got '" + text + "'");
  }
  std::vector<std::uint64_t> sorted = seeds;
  std::sort(sorted.begin(), sorted.end());
  if (seeds.empty() || std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
    throw ValidationError("seeds", "seeds must be non-empty and distinct");
  return seeds;
}

Scenario load_with_grid(const fs::path& path, const std::optional<std::string>& grid) {
  Scenario s = load_scenario(path);
  if (grid) {
    const auto [r, c] = parse_grid(*grid);
    s = with_grid(s, r, c);
  }
  return s;
}

// ---- coverage ---------------------------------------------------------------

void cmd_coverage(const CoverageOptions& o, std::ostream& out) {
  const Scenario scenario = load_with_grid(o.scenario, o.grid);
  Action a = canonical_action(scenario);
  if (o.tx) {
    a.x = o.tx->x;
    a.y = o.tx->y;
    a.z = o.tx->z;
  }
  a.alpha = o.orientation.yaw;
  a.theta = o.orientation.pitch;
  a.phi = o.orientation.roll;
  const double v[kActionDim] = {a.x, a.y, a.z, a.alpha, a.theta, a.phi};
  const ActionBounds& b = action_bounds();
  for (int k = 0; k < kActionDim; ++k)
    if (!(v[k] >= b.lo[k] && v[k] <= b.hi[k]))
      throw ValidationError(std::string("tx.") + kActionNames[k], fmt("%g", v[k]) + " outside [" + fmt("%g", b.lo[k]) +
                                                                       ", " + fmt("%g", b.hi[k]) + "]");
  if (!scenario.scene.bounds.contains({a.x, a.y})) throw ValidationError("tx", "position outside the scene bounds");

  const StepResult r = step(reset(scenario, 0), a, scenario);
  fs::create_directories(o.out);
  write_coverage_csv(*r.next_state.map, o.out / "coverage.csv");
  write_coverage_pgm(*r.next_state.map, o.out / "coverage.pgm");
  for (std::size_t i = 0; i < scenario.users.size(); ++i)
    out << "user " << scenario.users[i].id << ": " << fmt("%.3f", r.next_state.user_powers[i]) << " dBm\n";
  out << "reward: " << fmt("%.6f", r.reward) << "\n";
}

// ---- train ------------------------------------------------------------------

TrainSummary cmd_train(const TrainOptions& o, std::ostream& log) {
  keep_large_blocks_on_heap();
  o.train.validate();
  if (o.jobs < 1) throw ValidationError("jobs", "must be >= 1");
  if (o.seeds.empty()) throw ValidationError("seeds", "need at least one seed");
  if (o.embed_cmd && o.embed_dim < 1) throw ValidationError("embed_dim", "required with --embed-cmd");
  if (dir_non_empty(o.out) && !o.resume)
    throw ValidationError("out", o.out.string() + " is not empty; pass --resume or choose a new directory");
  fs::create_directories(o.out);

  const auto scenario = std::make_shared<const Scenario>(load_with_grid(o.scenario, o.grid));
  const PlacementEnv env(scenario);
  AgentConfig agent_config;
  std::shared_ptr<ExternalEncoder> external;
  if (o.embed_cmd && o.variant != ActorVariant::CnnOnly) {
    external = std::make_shared<ExternalEncoder>(*o.embed_cmd, o.embed_dim);
    agent_config.external_dim = o.embed_dim;
  }

  TrainConfig train = o.train;
  train.seeds = o.seeds;
  RunManifest manifest{o.scenario.string(), std::string(variant_name(o.variant)), o.seeds, o.out.string(), o.grid,
                       utc_timestamp()};
  write_manifest(o.out / "manifest.json", manifest);

  TrainSummary summary;
  summary.runs.resize(o.seeds.size());
  std::vector<std::string> errors(o.seeds.size());
  std::mutex log_mutex;
  std::atomic<std::size_t> next{0};

  const auto run_one = [&](std::size_t idx) {
    const std::uint64_t seed = o.seeds[idx];
    SeedResult& res = summary.runs[idx];
    res.seed = seed;
    const fs::path dir = seed_dir(o.out, seed);
    RunConfig rc{train, o.scenario.string(), std::string(variant_name(o.variant)), seed, o.grid, o.embed_cmd,
                 o.embed_cmd ? o.embed_dim : 0};
    if (o.resume && seed_complete(dir, rc)) {
      res.skipped = true;
      std::lock_guard<std::mutex> lock(log_mutex);
      log << "[seed " << seed << "] complete, skipped\n";
      return;
    }
    fs::remove_all(dir);
    fs::create_directories(dir / "checkpoints");
    write_run_config(dir / "config.json", rc);

    PromptContext prompts;
    prompts.external = external.get();
    PlacementAgent agent = make_placement_agent(o.variant, seed, train, agent_config, prompts);
    TrainHooks<PlacementModel> hooks;
    hooks.on_eval = [&](const EvalWindow& w, const PlacementAgent& a) {
      if (o.write_checkpoints) save_agent(dir / "checkpoints" / step_name(w.step), agent_nets(a));
      std::lock_guard<std::mutex> lock(log_mutex);
      log << "[seed " << seed << "] step " << w.step << " eval " << fmt("%.4f", w.mean_reward) << "\n";
    };
    hooks.on_abort = [&](int step, const PlacementAgent& a, const char* what) {
      save_agent(dir / "abort.ckpt", agent_nets(a));
      write_text(dir / "abort.json", json{{"step", step}, {"error", what}}.dump(2) + "\n");
    };
    res.artifacts = train_run(env, agent, train, seed, hooks);
    write_train_rewards(dir / "train_rewards.csv", res.artifacts.train_rewards);
    write_eval_rewards(dir / "eval_rewards.csv", res.artifacts.evals);
  };

  const auto worker = [&] {
    for (std::size_t i = next++; i < o.seeds.size(); i = next++) {
      try {
        run_one(i);
      } catch (const std::exception& e) {
        errors[i] = e.what();
      }
    }
  };
  const int n_threads = std::min<int>(o.jobs, static_cast<int>(o.seeds.size()));
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  std::string failed;
  std::vector<SeedSeries> done;
  for (std::size_t i = 0; i < o.seeds.size(); ++i) {
    if (!errors[i].empty()) {
      failed += "seed " + std::to_string(o.seeds[i]) + ": " + errors[i] + "; ";
      continue;
    }
    done.push_back(read_seed_dir(seed_dir(o.out, o.seeds[i])));
  }
  if (!done.empty()) write_summary(o.out / "summary.csv", done, 50);
  if (!failed.empty()) throw Error("training failed for " + failed + "completed seeds are kept in " + o.out.string());
  return summary;
}

SeedSeries read_seed_dir(const fs::path& dir) {
  return {read_series(dir / "train_rewards.csv", "reward"), read_series(dir / "eval_rewards.csv", "mean_reward")};
}

// ---- plot -------------------------------------------------------------------

PlotResult cmd_plot(const PlotOptions& o) {
  if (o.runs.empty()) throw ValidationError("runs", "need at least one run directory");
  struct VariantData {
    std::string variant;
    std::vector<SeedSeries> seeds;
  };
  std::map<std::string, std::vector<VariantData>> by_scenario;
  for (const fs::path& run : o.runs) {
    const fs::path mpath = run / "manifest.json";
    std::ifstream f(mpath);
    if (!f) throw SchemaError(mpath.string() + ": file missing");
    json m;
    try {
      m = json::parse(f);
    } catch (const json::exception& e) {
      throw SchemaError(mpath.string() + ": " + e.what());
    }
    if (!m.contains("scenario_path") || !m.contains("variant") || !m.contains("seeds"))
      throw SchemaError(mpath.string() + ": missing scenario_path, variant or seeds");
    VariantData vd;
    vd.variant = m["variant"].get<std::string>();
    for (const auto& s : m["seeds"]) vd.seeds.push_back(read_seed_dir(seed_dir(run, s.get<std::uint64_t>())));
    by_scenario[fs::path(m["scenario_path"].get<std::string>()).stem().string()].push_back(std::move(vd));
  }

  fs::create_directories(o.out);
  PlotResult result;
  std::string comparison = "scenario,variant,seeds,final_eval_mean,final_eval_std,convergence_step\n";
  for (const auto& [scenario, variants] : by_scenario) {
    PlotPanel train{"training reward (moving average, window " + std::to_string(o.window) + ")", "step", "reward", {}};
    PlotPanel eval{"evaluation reward (mean of evaluation window)", "step", "reward", {}};
    for (const VariantData& vd : variants) {
      std::vector<std::vector<double>> smooth, ev;
      for (const SeedSeries& s : vd.seeds) {
        smooth.push_back(moving_average(s.train.values, o.window));
        ev.push_back(s.eval.values);
      }
      const MeanStd ts = mean_std(smooth);
      const MeanStd es = mean_std(ev);
      const auto& tsteps = vd.seeds.front().train.steps;
      const auto& esteps = vd.seeds.front().eval.steps;
      train.series.push_back({vd.variant, std::vector<double>(tsteps.begin(), tsteps.end()), ts.mean, ts.std});
      eval.series.push_back({vd.variant, std::vector<double>(esteps.begin(), esteps.end()), es.mean, es.std});
      const auto conv = convergence_step(esteps, es.mean);
      comparison += scenario + "," + vd.variant + "," + std::to_string(vd.seeds.size()) + "," +
                    format_real(es.mean.back()) + "," + format_real(es.std.back()) + "," +
                    (conv ? std::to_string(*conv) : std::string("")) + "\n";
    }
    const fs::path fig = o.out / (scenario + ".svg");
    write_text(fig, render_svg(scenario + ": reward across seeds (mean +- 1 std)", {train, eval}));
    result.figures.push_back(fig);
  }
  result.comparison = o.out / "comparison.csv";
  write_text(result.comparison, comparison);
  return result;
}

// ---- entry point ------------------------------------------------------------

int run(int argc, char** argv) {
  keep_large_blocks_on_heap();
  CLI::App app{"Base-station placement with DDPG over a simplified urban coverage simulator"};
  app.require_subcommand(1);

  // coverage
  auto* cov = app.add_subcommand("coverage", "Compute a coverage map for one transmitter placement");
  std::string cov_scenario, cov_out;
  std::optional<std::string> cov_grid;
  std::vector<double> cov_tx, cov_orient;
  cov->add_option("--scenario", cov_scenario, "Scenario file")->required();
  cov->add_option("--grid", cov_grid, "Grid override ROWSxCOLS");
  cov->add_option("--tx", cov_tx, "Transmitter position x,y,z in meters")->delimiter(',')->expected(3);
  cov->add_option("--orient", cov_orient, "Orientation yaw,pitch,roll in radians")->delimiter(',')->expected(3);
  cov->add_option("--out", cov_out, "Output directory")->required();

  // train
  auto* tr = app.add_subcommand("train", "Train one actor variant over several seeds");
  TrainOptions topt;
  std::string t_scenario, t_variant = "cnn", t_seeds = "5", t_out;
  tr->add_option("--scenario", t_scenario, "Scenario file")->required();
  tr->add_option("--variant", t_variant, "cnn, prompt or combined")->check(CLI::IsMember({"cnn", "prompt", "combined"}));
  tr->add_option("--seeds", t_seeds, "Seed count N (seeds 1..N) or a comma-separated list");
  tr->add_option("--out", t_out, "Output directory")->required();
  tr->add_option("--grid", topt.grid, "Grid override ROWSxCOLS");
  tr->add_option("--steps", topt.train.total_steps, "Training steps");
  tr->add_option("--eval-every", topt.train.eval_every, "Steps between evaluations");
  tr->add_option("--eval-steps", topt.train.eval_steps, "Steps per evaluation window");
  tr->add_option("--batch", topt.train.batch_size, "Minibatch size");
  tr->add_option("--gamma", topt.train.gamma, "Discount factor");
  tr->add_option("--tau", topt.train.tau, "Target update rate");
  tr->add_option("--lr-actor", topt.train.lr_actor, "Actor learning rate");
  tr->add_option("--lr-critic", topt.train.lr_critic, "Critic learning rate");
  tr->add_option("--embed-cmd", topt.embed_cmd, "External embedding command");
  tr->add_option("--embed-dim", topt.embed_dim, "External embedding dimension");
  tr->add_flag("--resume", topt.resume, "Reuse a non-empty output directory, keeping complete seeds");
  tr->add_option("--jobs", topt.jobs, "Parallel seed workers");
  tr->add_flag("--no-checkpoints", [&](std::int64_t) { topt.write_checkpoints = false; }, "Skip per-eval checkpoints");

  // plot
  auto* pl = app.add_subcommand("plot", "Aggregate training runs into SVG figures and a comparison table");
  PlotOptions popt;
  std::vector<std::string> p_runs;
  std::string p_out;
  pl->add_option("--runs", p_runs, "Output directories of train")->required();
  pl->add_option("--out", p_out, "Figure directory")->required();
  pl->add_option("--window", popt.window, "Smoothing window");

  // evaluate
  auto* ev = app.add_subcommand("evaluate", "Evaluate a checkpoint from the reset state");
  std::string e_ckpt, e_scenario;
  std::optional<std::string> e_grid, e_embed_cmd;
  int e_steps = 20, e_embed_dim = 0;
  ev->add_option("--checkpoint", e_ckpt, "Checkpoint file")->required();
  ev->add_option("--scenario", e_scenario, "Scenario file")->required();
  ev->add_option("--grid", e_grid, "Grid override ROWSxCOLS");
  ev->add_option("--eval-steps", e_steps, "Evaluation steps");
  ev->add_option("--embed-cmd", e_embed_cmd, "External embedding command");
  ev->add_option("--embed-dim", e_embed_dim, "External embedding dimension");

  // baseline
  auto* bl = app.add_subcommand("baseline", "Reward statistics of uniformly random placements");
  std::string b_scenario;
  std::optional<std::string> b_grid;
  int b_samples = 100;
  std::uint64_t b_seed = 0;
  bl->add_option("--scenario", b_scenario, "Scenario file")->required();
  bl->add_option("--grid", b_grid, "Grid override ROWSxCOLS");
  bl->add_option("--samples", b_samples, "Number of random placements");
  bl->add_option("--seed", b_seed, "Sampling seed");

  // generate-city
  auto* gc = app.add_subcommand("generate-city", "Write a scenario over a synthetic city");
  int g_buildings = 40, g_users = 16;
  double g_cell = 10.0;
  std::vector<double> g_bounds{-500, -500, 500, 500};
  std::uint64_t g_seed = 0;
  std::string g_out;
  gc->add_option("--buildings", g_buildings, "Number of buildings");
  gc->add_option("--users", g_users, "Number of street-level users");
  gc->add_option("--bounds", g_bounds, "min_x,min_y,max_x,max_y")->delimiter(',')->expected(4);
  gc->add_option("--cell-size", g_cell, "Grid cell size in meters");
  gc->add_option("--seed", g_seed, "Generator seed");
  gc->add_option("--out", g_out, "Scenario file to write")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*cov) {
      CoverageOptions o;
      o.scenario = cov_scenario;
      o.grid = cov_grid;
      if (!cov_tx.empty()) o.tx = Vec3{cov_tx[0], cov_tx[1], cov_tx[2]};
      if (!cov_orient.empty()) o.orientation = {cov_orient[0], cov_orient[1], cov_orient[2]};
      o.out = cov_out;
      cmd_coverage(o, std::cout);
    } else if (*tr) {
      topt.scenario = t_scenario;
      topt.variant = parse_variant(t_variant);
      topt.seeds = parse_seeds(t_seeds);
      topt.out = t_out;
      cmd_train(topt, std::cerr);
      std::cout << "wrote " << topt.out.string() << "\n";
    } else if (*pl) {
      for (const auto& r : p_runs) popt.runs.emplace_back(r);
      popt.out = p_out;
      const PlotResult r = cmd_plot(popt);
      for (const auto& f : r.figures) std::cout << "wrote " << f.string() << "\n";
      std::cout << "wrote " << r.comparison.string() << "\n";
    } else if (*ev) {
      const auto scenario = std::make_shared<const Scenario>(load_with_grid(e_scenario, e_grid));
      AgentConfig ac;
      std::unique_ptr<ExternalEncoder> ext;
      if (e_embed_cmd) {
        ac.external_dim = e_embed_dim;
        ext = std::make_unique<ExternalEncoder>(*e_embed_cmd, e_embed_dim);
      }
      TrainConfig cfg;
      PromptContext prompts;
      prompts.external = ext.get();
      const PlacementAgent agent = make_placement_agent(load_agent(e_ckpt, ac), cfg, prompts);
      const PlacementEnv env(scenario);
      const EvalWindow w = evaluate_policy(agent, env, env.reset(), e_steps);
      RawAction raw{};
      std::copy(w.actions.front().begin(), w.actions.front().end(), raw.begin());
      const Action a = scale_action(raw);
      std::cout << "action: x=" << fmt("%.2f", a.x) << " y=" << fmt("%.2f", a.y) << " z=" << fmt("%.2f", a.z)
                << " alpha=" << fmt("%.4f", a.alpha) << " theta=" << fmt("%.4f", a.theta)
                << " phi=" << fmt("%.4f", a.phi) << "\n";
      std::cout << "mean reward: " << fmt("%.6f", w.mean_reward) << "\n";
    } else if (*bl) {
      const Scenario scenario = load_with_grid(b_scenario, b_grid);
      const auto rewards = random_placement_rewards(scenario, b_samples, b_seed);
      const SampleStats s = sample_stats(rewards);
      std::cout << "samples: " << rewards.size() << "\nmean: " << fmt("%.6f", s.mean) << "\nstd: " << fmt("%.6f", s.std)
                << "\nse: " << fmt("%.6f", s.se) << "\n";
    } else if (*gc) {
      const Rect bounds{g_bounds[0], g_bounds[1], g_bounds[2], g_bounds[3]};
      Scenario s;
      s.scene = generate_synthetic_city(g_buildings, bounds, g_seed);
      const double cols = bounds.width() / g_cell, rows = bounds.height() / g_cell;
      if (!(g_cell > 0) || cols != std::round(cols) || rows != std::round(rows))
        throw ValidationError("cell_size", "must divide the bounds width and height");
      s.grid = {{bounds.min_x, bounds.min_y}, g_cell, static_cast<int>(rows), static_cast<int>(cols)};
      s.env_seed = g_seed;
      Rng rng(derive_seed(g_seed, "users"));
      for (int i = 0, tries = 0; i < g_users; ++tries) {
        if (tries > 1000 * std::max(1, g_users)) throw GeometryError("no free space left for users");
        const Vec2 p{std::round(rng.uniform(bounds.min_x, bounds.max_x) * 10) / 10,
                     std::round(rng.uniform(bounds.min_y, bounds.max_y) * 10) / 10};
        if (point_in_building(s.scene, p)) continue;
        s.users.push_back({i + 1, {p.x, p.y, kReceiverHeight}, 1.0 / (g_users * 40.0)});
        ++i;
      }
      save_scenario(s, g_out);
      std::cout << "wrote " << g_out << "\n";
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace celldeploy::cli
