#include "celldeploy/ddpg.hpp"

#include <cmath>

#include "celldeploy/nn/init.hpp"

namespace celldeploy {

using nn::Var;

void OUParams::validate() const {
  if (!(theta >= 0.0)) throw ValidationError("ou.theta", "must be >= 0");
  if (!(sigma >= 0.0)) throw ValidationError("ou.sigma", "must be >= 0");
  if (!(dt > 0.0)) throw ValidationError("ou.dt", "must be > 0");
  if (!std::isfinite(mu)) throw ValidationError("ou.mu", "must be finite");
}

double ou_next(double x_prev, const OUParams& p, Rng& rng) {
  return x_prev + p.theta * (p.mu - x_prev) * p.dt + p.sigma * std::sqrt(p.dt) * rng.normal();
}

OUNoise::OUNoise(int dim, OUParams params, std::uint64_t seed)
    : params_(params), rng_(seed), x_(static_cast<std::size_t>(dim), params.mu) {
  params_.validate();
}

const std::vector<double>& OUNoise::next() {
  for (double& x : x_) x = ou_next(x, params_, rng_);
  return x_;
}

std::vector<double> perturb_action(std::span<const double> raw, std::span<const double> noise) {
  if (raw.size() != noise.size())
    throw LengthMismatch("perturb_action: action has " + std::to_string(raw.size()) + " components, noise " +
                         std::to_string(noise.size()));
  std::vector<double> out(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) out[i] = std::clamp(raw[i] + noise[i], -1.0, 1.0);
  return out;
}

void soft_update(nn::ParamList<float>& target, const nn::ParamList<float>& source, double tau) {
  if (target.size() != source.size())
    throw ShapeError("soft_update: " + std::to_string(target.size()) + " vs " + std::to_string(source.size()) +
                     " parameters");
  for (std::size_t k = 0; k < target.size(); ++k) {
    auto& t = target[static_cast<int>(k)].value;
    const auto& s = source[static_cast<int>(k)].value;
    if (t.shape() != s.shape())
      throw ShapeError("soft_update: " + target[static_cast<int>(k)].name + " " + nn::shape_str(t.shape()) + " vs " +
                       nn::shape_str(s.shape()));
    for (std::size_t i = 0; i < t.size(); ++i)
      t[i] = static_cast<float>(tau * static_cast<double>(s[i]) + (1.0 - tau) * static_cast<double>(t[i]));
  }
}

void TrainConfig::validate() const {
  if (total_steps < 1) throw ValidationError("steps", "must be >= 1");
  if (eval_every < 1 || total_steps % eval_every != 0) throw ValidationError("eval_every", "must divide steps");
  if (eval_steps < 1) throw ValidationError("eval_steps", "must be >= 1");
  if (batch_size < 1) throw ValidationError("batch", "must be >= 1");
  if (replay_capacity < batch_size) throw ValidationError("batch", "must not exceed replay capacity");
  if (warmup_steps < 0) throw ValidationError("warmup_steps", "must be >= 0");
  if (!(lr_actor > 0.0)) throw ValidationError("lr_actor", "must be > 0");
  if (!(lr_critic > 0.0)) throw ValidationError("lr_critic", "must be > 0");
  if (!(tau >= 0.0 && tau <= 1.0)) throw ValidationError("tau", "must be in [0, 1]");
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw ValidationError("gamma", "must be in [0, 1]");
  if (seeds.empty()) throw ValidationError("seeds", "need at least one seed");
  ou.validate();
}

// ---- placement ------------------------------------------------------------

Var PlacementModel::actor(nn::Binder<float>& bind, std::span<const State* const> states) const {
  return actor_forward(bind, actor_, states, prompts_);
}

Var PlacementModel::critic(nn::Binder<float>& bind, std::span<const State* const> states, Var actions) const {
  const Var maps = bind.tape().constant(map_batch<float>(states));
  return critic_forward(bind, critic_, maps, actions);
}

PlacementAgent make_placement_agent(AgentNets<float> nets, const TrainConfig& config, PromptContext prompts) {
  PlacementModel model(nets.actor.layout, nets.critic.layout, prompts);
  return PlacementAgent(std::move(model), std::move(nets.actor.params), std::move(nets.critic.params),
                        std::move(nets.target_actor.params), std::move(nets.target_critic.params), config);
}

PlacementAgent make_placement_agent(ActorVariant variant, std::uint64_t seed, const TrainConfig& config,
                                    const AgentConfig& agent_config, PromptContext prompts) {
  return make_placement_agent(init_agent<float>(variant, seed, agent_config), config, prompts);
}

AgentNets<float> agent_nets(const PlacementAgent& agent) {
  const PlacementModel& m = agent.model();
  return {{m.actor_layout(), agent.actor()},
          {m.actor_layout(), agent.target_actor()},
          {m.critic_layout(), agent.critic()},
          {m.critic_layout(), agent.target_critic()}};
}

// ---- toy ------------------------------------------------------------------

namespace {

constexpr int kToyActorHidden = 32;
constexpr int kToyCriticHidden = 64;

// Parameter order is fixed: actor {h.w, h.b, out.w, out.b},
// critic {h1.w, h1.b, h2.w, h2.b, out.w, out.b}.

Var toy_obs(nn::Tape<float>& t, std::span<const ToyEnv::State* const> states) {
  nn::Tensor<float> x({static_cast<int>(states.size()), 1});
  for (std::size_t i = 0; i < states.size(); ++i) x[i] = static_cast<float>(states[i]->obs);
  return t.constant(std::move(x));
}

void init_layer(nn::ParamList<float>& p, int w, int b, int fan_in, Rng& rng) {
  nn::fan_in_uniform(p[w].value, fan_in, rng);
  nn::fan_in_uniform(p[b].value, fan_in, rng);
}

}  // namespace

Var ToyModel::actor(nn::Binder<float>& bind, std::span<const State* const> states) const {
  nn::Tape<float>& t = bind.tape();
  Var h = nn::relu(t, nn::dense(t, toy_obs(t, states), bind(0), bind(1)));
  return nn::tanh(t, nn::dense(t, h, bind(2), bind(3)));
}

Var ToyModel::critic(nn::Binder<float>& bind, std::span<const State* const> states, Var actions) const {
  nn::Tape<float>& t = bind.tape();
  Var x = nn::concat_cols(t, toy_obs(t, states), actions);
  Var h = nn::relu(t, nn::dense(t, x, bind(0), bind(1)));
  h = nn::relu(t, nn::dense(t, h, bind(2), bind(3)));
  return nn::dense(t, h, bind(4), bind(5));
}

Ddpg<ToyModel> make_toy_agent(std::uint64_t seed, const TrainConfig& config) {
  nn::ParamList<float> actor, critic;
  actor.add("h.w", {kToyActorHidden, 1});
  actor.add("h.b", {kToyActorHidden});
  actor.add("out.w", {1, kToyActorHidden});
  actor.add("out.b", {1});
  critic.add("h1.w", {kToyCriticHidden, 2});
  critic.add("h1.b", {kToyCriticHidden});
  critic.add("h2.w", {kToyCriticHidden, kToyCriticHidden});
  critic.add("h2.b", {kToyCriticHidden});
  critic.add("out.w", {1, kToyCriticHidden});
  critic.add("out.b", {1});
  Rng ar(derive_seed(seed, "init.actor"));
  Rng cr(derive_seed(seed, "init.critic"));
  init_layer(actor, 0, 1, 1, ar);
  nn::uniform_fill(actor[2].value, 1e-3, ar);
  nn::uniform_fill(actor[3].value, 1e-3, ar);
  init_layer(critic, 0, 1, 2, cr);
  init_layer(critic, 2, 3, kToyCriticHidden, cr);
  init_layer(critic, 4, 5, kToyCriticHidden, cr);
  return Ddpg<ToyModel>(ToyModel{}, std::move(actor), std::move(critic), config);
}

}  // namespace celldeploy
