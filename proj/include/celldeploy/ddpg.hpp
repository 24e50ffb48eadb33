#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <numeric>
#include <span>
#include <vector>

#include "celldeploy/agents.hpp"
#include "celldeploy/errors.hpp"
#include "celldeploy/nn/adam.hpp"
#include "celldeploy/nn/ops.hpp"
#include "celldeploy/rng.hpp"

namespace celldeploy {

struct OUParams {
  double theta = 0.15;
  double mu = 0.0;
  double sigma = 0.2;
  double dt = 1.0;
  void validate() const;
};

/// Euler step x + theta*(mu - x)*dt + sigma*sqrt(dt)*g with g ~ N(0, 1).
double ou_next(double x_prev, const OUParams& p, Rng& rng);

/// Per-dimension OU process on its own random stream, started at mu.
class OUNoise {
 public:
  OUNoise(int dim, OUParams params, std::uint64_t seed);
  const std::vector<double>& next();
  const std::vector<double>& value() const { return x_; }

 private:
  OUParams params_;
  Rng rng_;
  std::vector<double> x_;
};

/// raw + noise, clamped to [-1, 1]. Throws LengthMismatch.
std::vector<double> perturb_action(std::span<const double> raw, std::span<const double> noise);

/// target <- tau*source + (1 - tau)*target. Throws ShapeError.
void soft_update(nn::ParamList<float>& target, const nn::ParamList<float>& source, double tau);

template <class S>
struct Transition {
  S state;
  std::vector<double> action;
  double reward = 0.0;
  S next_state;
};

/// FIFO ring. Index 0 is the oldest stored item.
template <class Item>
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
    if (capacity == 0) throw ValidationError("replay_capacity", "must be >= 1");
    items_.reserve(std::min<std::size_t>(capacity, 1024));
  }

  void push(Item item) {
    if (items_.size() < capacity_) {
      items_.push_back(std::move(item));
    } else {
      items_[head_] = std::move(item);
      head_ = (head_ + 1) % capacity_;
    }
  }
  std::size_t size() const { return items_.size(); }
  std::size_t capacity() const { return capacity_; }
  const Item& operator[](std::size_t i) const { return items_[(head_ + i) % items_.size()]; }

  /// n distinct items, uniformly at random (partial Fisher-Yates).
  std::vector<const Item*> sample(std::size_t n, Rng& rng) const {
    if (n > items_.size())
      throw ValidationError("batch_size", "cannot sample " + std::to_string(n) + " from " + std::to_string(items_.size()));
    std::vector<std::size_t> idx(items_.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::vector<const Item*> out;
    out.reserve(n);
    for (std::size_t k = 0; k < n; ++k) {
      const std::size_t j = k + static_cast<std::size_t>(rng.uniform_index(idx.size() - k));
      std::swap(idx[k], idx[j]);
      out.push_back(&(*this)[idx[k]]);
    }
    return out;
  }

 private:
  std::size_t capacity_;
  std::size_t head_ = 0;
  std::vector<Item> items_;
};

struct TrainConfig {
  int total_steps = 1000;
  int eval_every = 100;
  int eval_steps = 20;
  int batch_size = 8;
  double lr_actor = 5e-4;
  double lr_critic = 5e-3;
  double tau = 1e-3;
  double gamma = 0.99;
  std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
  OUParams ou;
  int warmup_steps = 8;
  int replay_capacity = 10000;

  /// Throws ValidationError naming the field.
  void validate() const;
};

/// Network pair driver. Model supplies the architecture:
///   using State = ...;
///   nn::Var actor(nn::Binder<float>&, std::span<const State* const>) const;   // [B, A]
///   nn::Var critic(nn::Binder<float>&, std::span<const State* const>, nn::Var actions) const;  // [B, 1]
template <class Model>
class Ddpg {
 public:
  using StateT = typename Model::State;
  using TransitionT = Transition<StateT>;
  using Batch = std::vector<const TransitionT*>;

  Ddpg(Model model, nn::ParamList<float> actor, nn::ParamList<float> critic, const TrainConfig& config)
      : model_(std::move(model)),
        actor_(std::move(actor)),
        critic_(std::move(critic)),
        target_actor_(actor_),
        target_critic_(critic_),
        actor_opt_(actor_, {config.lr_actor}),
        critic_opt_(critic_, {config.lr_critic}),
        gamma_(config.gamma) {}

  Ddpg(Model model, nn::ParamList<float> actor, nn::ParamList<float> critic, nn::ParamList<float> target_actor,
       nn::ParamList<float> target_critic, const TrainConfig& config)
      : Ddpg(std::move(model), std::move(actor), std::move(critic), config) {
    target_actor_ = std::move(target_actor);
    target_critic_ = std::move(target_critic);
  }

  /// Deterministic policy output, no gradient tracking.
  std::vector<double> act(const StateT& state) const {
    nn::Tape<float> tape(false);
    nn::Binder<float> bind(tape, actor_);
    const StateT* s = &state;
    const auto& v = tape.value(model_.actor(bind, std::span<const StateT* const>(&s, 1)));
    return {v.values().begin(), v.values().end()};
  }

  /// y_i = r_i + gamma * Qbar(s'_i, mu'(s'_i)), evaluated on gradient-free tapes.
  std::vector<double> compute_target_y(const Batch& batch, double gamma) const {
    if (batch.empty()) throw ValidationError("batch", "must be non-empty");
    std::vector<const StateT*> next;
    for (const auto* t : batch) next.push_back(&t->next_state);
    nn::Tape<float> tape(false);
    nn::Binder<float> ab(tape, target_actor_);
    nn::Binder<float> cb(tape, target_critic_);
    const nn::Var a = model_.actor(ab, next);
    const auto& q = tape.value(model_.critic(cb, next, a));
    std::vector<double> y(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) y[i] = batch[i]->reward + gamma * static_cast<double>(q[i]);
    return y;
  }

  /// One Adam step on mean (Q(s, a) - y)^2; returns the pre-step loss.
  double critic_update(const Batch& batch) { return critic_update(batch, compute_target_y(batch, gamma_)); }

  double critic_update(const Batch& batch, const std::vector<double>& y) {
    return guarded([&] {
      const int B = static_cast<int>(batch.size());
      std::vector<const StateT*> states;
      for (const auto* t : batch) states.push_back(&t->state);
      const int A = static_cast<int>(batch.front()->action.size());
      nn::Tensor<float> act({B, A}), yt({B, 1});
      for (int i = 0; i < B; ++i) {
        for (int k = 0; k < A; ++k) act[static_cast<std::size_t>(i * A + k)] = static_cast<float>(batch[i]->action[k]);
        yt[static_cast<std::size_t>(i)] = static_cast<float>(y[static_cast<std::size_t>(i)]);
      }
      critic_.zero_grad();
      nn::Tape<float> tape;
      nn::Binder<float> cb(tape, critic_, true);
      const nn::Var q = model_.critic(cb, states, tape.constant(std::move(act)));
      const nn::Var loss = nn::mean(tape, nn::square(tape, nn::sub(tape, q, tape.constant(std::move(yt)))));
      const double value = tape.value(loss)[0];
      if (!std::isfinite(value)) throw NonFiniteLoss("critic loss is not finite");
      tape.backward(loss);
      critic_opt_.step(critic_);
      return value;
    });
  }

  /// One Adam step on -mean Q(s, mu(s)) w.r.t. actor parameters only;
  /// returns the pre-step mean Q.
  double actor_update(const Batch& batch) {
    return guarded([&] {
      std::vector<const StateT*> states;
      for (const auto* t : batch) states.push_back(&t->state);
      actor_.zero_grad();
      nn::Tape<float> tape;
      nn::Binder<float> ab(tape, actor_, true);
      nn::Binder<float> cb(tape, static_cast<const nn::ParamList<float>&>(critic_));
      const nn::Var a = model_.actor(ab, states);
      const nn::Var q = nn::mean(tape, model_.critic(cb, states, a));
      const double value = tape.value(q)[0];
      if (!std::isfinite(value)) throw NonFiniteLoss("actor objective is not finite");
      tape.backward(nn::scale(tape, q, -1.0f));
      actor_opt_.step(actor_);
      return value;
    });
  }

  void soft_update_targets(double tau) {
    soft_update(target_actor_, actor_, tau);
    soft_update(target_critic_, critic_, tau);
  }

  const Model& model() const { return model_; }
  const nn::ParamList<float>& actor() const { return actor_; }
  const nn::ParamList<float>& critic() const { return critic_; }
  const nn::ParamList<float>& target_actor() const { return target_actor_; }
  const nn::ParamList<float>& target_critic() const { return target_critic_; }
  nn::ParamList<float>& mutable_actor() { return actor_; }
  nn::ParamList<float>& mutable_critic() { return critic_; }
  nn::ParamList<float>& mutable_target_critic() { return target_critic_; }

 private:
  template <class F>
  static double guarded(F&& f) {
    try {
      return f();
    } catch (const NonFiniteError& e) {
      throw NonFiniteLoss(e.what());
    }
  }

  Model model_;
  nn::ParamList<float> actor_, critic_, target_actor_, target_critic_;
  nn::Adam<float> actor_opt_, critic_opt_;
  double gamma_;
};

struct EvalWindow {
  int step = 0;
  std::vector<std::vector<double>> actions;
  std::vector<double> rewards;
  double mean_reward = 0.0;
  /// All four parameter sets bit-identical before and after the window.
  bool params_frozen = false;
};

struct RunArtifacts {
  std::vector<double> train_rewards;
  std::vector<EvalWindow> evals;
  std::vector<double> critic_losses;
  std::vector<double> actor_objectives;
  int first_update_step = 0;
};

template <class Model>
struct TrainHooks {
  std::function<void(int step, double reward)> on_step;
  std::function<void(const EvalWindow&, const Ddpg<Model>&)> on_eval;
  /// Called with the failing step before NonFiniteLoss propagates.
  std::function<void(int step, const Ddpg<Model>&, const char* what)> on_abort;
};

/// Evaluation probes: n noise-free actions taken from the same snapshot
/// state, so the training trajectory is untouched. Returns the window with
/// its actions, rewards and mean.
template <class Env, class Model>
EvalWindow evaluate_policy(const Ddpg<Model>& agent, const Env& env, const typename Model::State& snapshot, int n_steps,
                           int step = 0) {
  if (n_steps < 1) throw ValidationError("eval_steps", "must be >= 1");
  const nn::ParamList<float> a0 = agent.actor(), c0 = agent.critic(), ta0 = agent.target_actor(),
                             tc0 = agent.target_critic();
  EvalWindow w;
  w.step = step;
  double sum = 0.0;
  for (int i = 0; i < n_steps; ++i) {
    auto action = agent.act(snapshot);
    const auto result = env.step(snapshot, action);
    w.actions.push_back(std::move(action));
    w.rewards.push_back(result.reward);
    sum += result.reward;
  }
  w.mean_reward = sum / n_steps;
  w.params_frozen = agent.actor() == a0 && agent.critic() == c0 && agent.target_actor() == ta0 &&
                    agent.target_critic() == tc0;
  return w;
}

/// Step loop: act -> OU perturb -> env.step -> store -> (after warmup)
/// critic, actor and target updates. Evaluates every eval_every steps.
template <class Env, class Model>
RunArtifacts train_run(const Env& env, Ddpg<Model>& agent, const TrainConfig& config, std::uint64_t seed,
                       const TrainHooks<Model>& hooks = {}) {
  config.validate();
  using S = typename Model::State;
  RunArtifacts out;
  OUNoise noise(Env::action_dim, config.ou, derive_seed(seed, "ou"));
  Rng replay_rng(derive_seed(seed, "replay"));
  ReplayBuffer<Transition<S>> replay(static_cast<std::size_t>(config.replay_capacity));
  const std::size_t ready = static_cast<std::size_t>(std::max(config.warmup_steps, config.batch_size));

  S state = env.reset();
  for (int t = 1; t <= config.total_steps; ++t) {
    try {
      const auto raw = perturb_action(agent.act(state), noise.next());
      auto result = env.step(state, raw);
      replay.push(Transition<S>{state, raw, result.reward, result.next_state});
      if (replay.size() >= ready) {
        if (out.first_update_step == 0) out.first_update_step = t;
        const auto batch = replay.sample(static_cast<std::size_t>(config.batch_size), replay_rng);
        out.critic_losses.push_back(agent.critic_update(batch));
        out.actor_objectives.push_back(agent.actor_update(batch));
        agent.soft_update_targets(config.tau);
      }
      out.train_rewards.push_back(result.reward);
      if (hooks.on_step) hooks.on_step(t, result.reward);
      state = std::move(result.next_state);
    } catch (const NonFiniteLoss& e) {
      if (hooks.on_abort) hooks.on_abort(t, agent, e.what());
      throw;
    }
    if (t % config.eval_every == 0) {
      out.evals.push_back(evaluate_policy(agent, env, state, config.eval_steps, t));
      if (hooks.on_eval) hooks.on_eval(out.evals.back(), agent);
    }
  }
  return out;
}

// ---- base-station placement -------------------------------------------------

/// Architecture glue between the agents module and the trainer.
class PlacementModel {
 public:
  using State = celldeploy::State;

  PlacementModel(ActorLayout actor, CriticLayout critic, PromptContext prompts = {})
      : actor_(std::move(actor)), critic_(std::move(critic)), prompts_(prompts) {}

  nn::Var actor(nn::Binder<float>& bind, std::span<const State* const> states) const;
  nn::Var critic(nn::Binder<float>& bind, std::span<const State* const> states, nn::Var actions) const;

  const ActorLayout& actor_layout() const { return actor_; }
  const CriticLayout& critic_layout() const { return critic_; }

 private:
  ActorLayout actor_;
  CriticLayout critic_;
  PromptContext prompts_;
};

using PlacementAgent = Ddpg<PlacementModel>;

PlacementAgent make_placement_agent(ActorVariant variant, std::uint64_t seed, const TrainConfig& config,
                                    const AgentConfig& agent_config = {}, PromptContext prompts = {});
PlacementAgent make_placement_agent(AgentNets<float> nets, const TrainConfig& config, PromptContext prompts = {});
AgentNets<float> agent_nets(const PlacementAgent& agent);

// ---- analytic toy problem ---------------------------------------------------

/// Stateless 1-D placement with reward -(a - u)^2 for hidden u.
struct ToyEnv {
  struct State {
    double obs = 1.0;
  };
  struct StepResult {
    State next_state;
    double reward = 0.0;
  };
  static constexpr int action_dim = 1;

  double u = 0.0;

  State reset() const { return {}; }
  StepResult step(const State& s, std::span<const double> raw) const {
    const double d = raw[0] - u;
    return {s, -d * d};
  }
};

/// Small MLPs: actor obs -> 32 -> 1 (tanh), critic [obs, a] -> 64 -> 64 -> 1.
class ToyModel {
 public:
  using State = ToyEnv::State;
  nn::Var actor(nn::Binder<float>& bind, std::span<const State* const> states) const;
  nn::Var critic(nn::Binder<float>& bind, std::span<const State* const> states, nn::Var actions) const;
};

Ddpg<ToyModel> make_toy_agent(std::uint64_t seed, const TrainConfig& config);

}  // namespace celldeploy
