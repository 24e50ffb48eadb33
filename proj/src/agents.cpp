#include "celldeploy/agents.hpp"

#include <algorithm>

#include "celldeploy/errors.hpp"
#include "celldeploy/nn/init.hpp"
#include "celldeploy/nn/ops.hpp"

namespace celldeploy {

using nn::Var;

namespace {

constexpr int kConv1Filters = 8, kConv1Kernel = 5, kConv1Stride = 4, kConv1Pad = 2;
constexpr int kConv2Filters = 4, kConv2Kernel = 3, kConv2Stride = 4, kConv2Pad = 1;
constexpr int kFlatSize = kConv2Filters * kPoolSize * kPoolSize;
constexpr double kActorOutputInit = 1e-3;

template <typename T>
ConvBranchLayout add_conv_branch(nn::ParamList<T>& params, const std::string& prefix) {
  ConvBranchLayout l{};
  l.c1_w = params.add(prefix + "conv1.w", {kConv1Filters, 1, kConv1Kernel, kConv1Kernel});
  l.c1_b = params.add(prefix + "conv1.b", {kConv1Filters});
  l.c2_w = params.add(prefix + "conv2.w", {kConv2Filters, kConv1Filters, kConv2Kernel, kConv2Kernel});
  l.c2_b = params.add(prefix + "conv2.b", {kConv2Filters});
  l.fc_w = params.add(prefix + "fc.w", {kHiddenSize, kFlatSize});
  l.fc_b = params.add(prefix + "fc.b", {kHiddenSize});
  return l;
}

template <typename T>
void init_dense(nn::ParamList<T>& params, int w, int b, Rng& rng) {
  const int fan_in = static_cast<int>(params[w].value.size() / static_cast<std::size_t>(params[w].value.dim(0)));
  nn::fan_in_uniform(params[w].value, fan_in, rng);
  nn::fan_in_uniform(params[b].value, fan_in, rng);
}

template <typename T>
void init_conv_branch(nn::ParamList<T>& params, const ConvBranchLayout& l, Rng& rng) {
  init_dense(params, l.c1_w, l.c1_b, rng);
  init_dense(params, l.c2_w, l.c2_b, rng);
  init_dense(params, l.fc_w, l.fc_b, rng);
}

/// Conv branch up to the dense(256) pre-activation.
template <typename T>
Var conv_branch(nn::Binder<T>& bind, const ConvBranchLayout& l, Var maps) {
  nn::Tape<T>& t = bind.tape();
  Var h = nn::relu(t, nn::conv2d(t, maps, bind(l.c1_w), bind(l.c1_b), kConv1Stride, kConv1Pad));
  h = nn::relu(t, nn::conv2d(t, h, bind(l.c2_w), bind(l.c2_b), kConv2Stride, kConv2Pad));
  h = nn::flatten(t, nn::adaptive_avg_pool2d(t, h, kPoolSize, kPoolSize));
  return nn::dense(t, h, bind(l.fc_w), bind(l.fc_b));
}

template <typename T>
Var prompt_features(nn::Binder<T>& bind, const ActorLayout& layout, std::span<const State* const> states,
                    const PromptContext& prompts) {
  nn::Tape<T>& t = bind.tape();
  if (layout.external_dim > 0) {
    if (!prompts.external) throw ProviderUnavailable("actor expects external prompt embeddings but none configured");
    const int E = layout.external_dim;
    nn::Tensor<T> feats({static_cast<int>(states.size()), E});
    for (std::size_t i = 0; i < states.size(); ++i) {
      const auto v = prompts.external->encode(states[i]->prompt);
      if (static_cast<int>(v.size()) != E)
        throw DimensionMismatch("external embedding has " + std::to_string(v.size()) + " values, actor expects " +
                                std::to_string(E));
      for (int k = 0; k < E; ++k) feats[i * static_cast<std::size_t>(E) + static_cast<std::size_t>(k)] = static_cast<T>(v[static_cast<std::size_t>(k)]);
    }
    return t.constant(std::move(feats));
  }
  std::vector<Var> rows;
  rows.reserve(states.size());
  for (const State* s : states) {
    const auto ids = prompts.tokenizer->tokenize(s->prompt, layout.encoder->config.max_seq_len);
    rows.push_back(encode(bind, *layout.encoder, ids));
  }
  return rows.size() == 1 ? rows[0] : nn::stack_rows(t, rows);
}

}  // namespace

std::string_view variant_name(ActorVariant v) {
  switch (v) {
    case ActorVariant::CnnOnly: return "cnn";
    case ActorVariant::PromptOnly: return "prompt";
    case ActorVariant::Combined: return "combined";
  }
  return "?";
}

ActorVariant parse_variant(std::string_view name) {
  for (ActorVariant v : {ActorVariant::CnnOnly, ActorVariant::PromptOnly, ActorVariant::Combined})
    if (variant_name(v) == name) return v;
  throw ValidationError("variant", "unknown actor variant '" + std::string(name) + "' (cnn, prompt, combined)");
}

std::uint32_t variant_tag(ActorVariant v) { return static_cast<std::uint32_t>(v) + 1; }

ActorVariant checkpoint_variant(const nn::Checkpoint& ckpt) {
  if (ckpt.tag < 1 || ckpt.tag > 3) throw ParseError("checkpoint tag " + std::to_string(ckpt.tag) + " is not an actor variant");
  return static_cast<ActorVariant>(ckpt.tag - 1);
}

template <typename T>
ActorNet<T> make_actor(ActorVariant variant, const AgentConfig& config) {
  ActorNet<T> a;
  ActorLayout& l = a.layout;
  l.variant = variant;
  int in = 0;
  if (variant != ActorVariant::PromptOnly) {
    l.cnn = add_conv_branch(a.params, "actor.map.");
    in += kHiddenSize;
  }
  if (variant != ActorVariant::CnnOnly) {
    if (config.external_dim > 0) {
      l.external_dim = config.external_dim;
      in += config.external_dim;
    } else {
      l.encoder = add_encoder_params(a.params, "actor.encoder.", config.encoder);
      in += config.encoder.model_dim;
    }
  }
  if (variant == ActorVariant::CnnOnly) {
    // The conv branch's dense(256) is the hidden layer.
    l.out_w = a.params.add("actor.out.w", {kActionDim, kHiddenSize});
    l.out_b = a.params.add("actor.out.b", {kActionDim});
  } else {
    l.h_w = a.params.add("actor.hidden.w", {kHiddenSize, in});
    l.h_b = a.params.add("actor.hidden.b", {kHiddenSize});
    l.out_w = a.params.add("actor.out.w", {kActionDim, kHiddenSize});
    l.out_b = a.params.add("actor.out.b", {kActionDim});
  }
  return a;
}

template <typename T>
CriticNet<T> make_critic() {
  CriticNet<T> c;
  CriticLayout& l = c.layout;
  l.map = add_conv_branch(c.params, "critic.map.");
  l.act_w = c.params.add("critic.action.w", {kHiddenSize, kActionDim});
  l.act_b = c.params.add("critic.action.b", {kHiddenSize});
  l.out_w = c.params.add("critic.out.w", {1, kHiddenSize});
  l.out_b = c.params.add("critic.out.b", {1});
  return c;
}

template <typename T>
void init_actor(ActorNet<T>& actor, Rng& rng) {
  const ActorLayout& l = actor.layout;
  if (l.cnn) init_conv_branch(actor.params, *l.cnn, rng);
  if (l.encoder) init_encoder(actor.params, *l.encoder, rng);
  if (l.h_w >= 0) init_dense(actor.params, l.h_w, l.h_b, rng);
  nn::uniform_fill(actor.params[l.out_w].value, kActorOutputInit, rng);
  nn::uniform_fill(actor.params[l.out_b].value, kActorOutputInit, rng);
}

template <typename T>
void init_critic(CriticNet<T>& critic, Rng& rng) {
  const CriticLayout& l = critic.layout;
  init_conv_branch(critic.params, l.map, rng);
  init_dense(critic.params, l.act_w, l.act_b, rng);
  init_dense(critic.params, l.out_w, l.out_b, rng);
}

template <typename T>
AgentNets<T> init_agent(ActorVariant variant, std::uint64_t seed, const AgentConfig& config) {
  AgentNets<T> n{make_actor<T>(variant, config), {}, make_critic<T>(), {}};
  Rng actor_rng(derive_seed(seed, "init.actor"));
  Rng critic_rng(derive_seed(seed, "init.critic"));
  init_actor(n.actor, actor_rng);
  init_critic(n.critic, critic_rng);
  n.target_actor = n.actor;
  n.target_critic = n.critic;
  return n;
}

template <typename T>
nn::Tensor<T> map_batch(std::span<const State* const> states) {
  if (states.empty()) throw ShapeError("map_batch: empty batch");
  if (!states[0]->map) throw ShapeError("map_batch: state has no coverage map");
  const GridSpec& g = states[0]->map->grid;
  const int H = g.n_rows, W = g.n_cols;
  nn::Tensor<T> out({static_cast<int>(states.size()), 1, H, W});
  const std::size_t cells = g.cell_count();
  for (std::size_t i = 0; i < states.size(); ++i) {
    const CoverageMap* m = states[i]->map.get();
    if (!m) throw ShapeError("map_batch: state has no coverage map");
    if (m->grid.n_rows != H || m->grid.n_cols != W)
      throw ShapeError("map_batch: map " + nn::shape_str({m->grid.n_rows, m->grid.n_cols}) + " vs " +
                       nn::shape_str({H, W}));
    T* dst = out.data() + i * cells;
    for (std::size_t k = 0; k < cells; ++k) dst[k] = static_cast<T>(normalize_dbm(m->values[k]));
  }
  return out;
}

template <typename T>
Var actor_forward(nn::Binder<T>& bind, const ActorLayout& layout, Var maps, std::span<const State* const> states,
                  const PromptContext& prompts) {
  nn::Tape<T>& t = bind.tape();
  Var feats;
  if (layout.cnn) {
    if (!maps.valid()) maps = t.constant(map_batch<T>(states));
    feats = nn::relu(t, conv_branch(bind, *layout.cnn, maps));
  }
  if (layout.uses_prompt()) {
    Var p = prompt_features(bind, layout, states, prompts);
    feats = feats.valid() ? nn::concat_cols(t, feats, p) : p;
  }
  if (layout.h_w >= 0) feats = nn::relu(t, nn::dense(t, feats, bind(layout.h_w), bind(layout.h_b)));
  return nn::tanh(t, nn::dense(t, feats, bind(layout.out_w), bind(layout.out_b)));
}

template <typename T>
Var actor_forward(nn::Binder<T>& bind, const ActorLayout& layout, std::span<const State* const> states,
                  const PromptContext& prompts) {
  return actor_forward(bind, layout, Var{}, states, prompts);
}

template <typename T>
Var critic_forward(nn::Binder<T>& bind, const CriticLayout& layout, Var maps, Var actions) {
  nn::Tape<T>& t = bind.tape();
  Var m = conv_branch(bind, layout.map, maps);
  Var a = nn::dense(t, actions, bind(layout.act_w), bind(layout.act_b));
  return nn::dense(t, nn::relu(t, nn::add(t, m, a)), bind(layout.out_w), bind(layout.out_b));
}

RawAction actor_act(const ActorNet<float>& actor, const State& state, const PromptContext& prompts) {
  nn::Tape<float> tape(false);
  nn::Binder<float> bind(tape, actor.params);
  const State* s = &state;
  const auto& v = tape.value(actor_forward(bind, actor.layout, std::span<const State* const>(&s, 1), prompts));
  RawAction a{};
  for (int k = 0; k < kActionDim; ++k) a[static_cast<std::size_t>(k)] = v[static_cast<std::size_t>(k)];
  return a;
}

double critic_value(const CriticNet<float>& critic, const State& state, const RawAction& action) {
  nn::Tape<float> tape(false);
  nn::Binder<float> bind(tape, critic.params);
  const State* s = &state;
  Var maps = tape.constant(map_batch<float>(std::span<const State* const>(&s, 1)));
  nn::Tensor<float> a({1, kActionDim});
  for (int k = 0; k < kActionDim; ++k) a[static_cast<std::size_t>(k)] = static_cast<float>(action[static_cast<std::size_t>(k)]);
  return tape.value(critic_forward(bind, critic.layout, maps, tape.constant(std::move(a))))[0];
}

void save_agent(const std::filesystem::path& path, const AgentNets<float>& nets) {
  nn::Checkpoint ckpt;
  ckpt.tag = variant_tag(nets.actor.layout.variant);
  nn::append_params(ckpt, "", nets.actor.params);
  nn::append_params(ckpt, "target.", nets.target_actor.params);
  nn::append_params(ckpt, "", nets.critic.params);
  nn::append_params(ckpt, "target.", nets.target_critic.params);
  nn::write_checkpoint(path, ckpt);
}

AgentNets<float> load_agent(const std::filesystem::path& path, const AgentConfig& config) {
  const nn::Checkpoint ckpt = nn::read_checkpoint(path);
  AgentNets<float> n{make_actor<float>(checkpoint_variant(ckpt), config), {}, make_critic<float>(), {}};
  n.target_actor = n.actor;
  n.target_critic = n.critic;
  nn::restore_params(ckpt, "", n.actor.params);
  nn::restore_params(ckpt, "target.", n.target_actor.params);
  nn::restore_params(ckpt, "", n.critic.params);
  nn::restore_params(ckpt, "target.", n.target_critic.params);
  return n;
}

#define CELLDEPLOY_INSTANTIATE_AGENTS(T)                                                                   \
  template ActorNet<T> make_actor<T>(ActorVariant, const AgentConfig&);                                   \
  template CriticNet<T> make_critic<T>();                                                                 \
  template void init_actor<T>(ActorNet<T>&, Rng&);                                                        \
  template void init_critic<T>(CriticNet<T>&, Rng&);                                                      \
  template AgentNets<T> init_agent<T>(ActorVariant, std::uint64_t, const AgentConfig&);                   \
  template nn::Tensor<T> map_batch<T>(std::span<const State* const>);                                     \
  template Var actor_forward<T>(nn::Binder<T>&, const ActorLayout&, std::span<const State* const>,        \
                                const PromptContext&);                                                    \
  template Var actor_forward<T>(nn::Binder<T>&, const ActorLayout&, Var, std::span<const State* const>,   \
                                const PromptContext&);                                                    \
  template Var critic_forward<T>(nn::Binder<T>&, const CriticLayout&, Var, Var);

CELLDEPLOY_INSTANTIATE_AGENTS(float)
CELLDEPLOY_INSTANTIATE_AGENTS(double)

}  // namespace celldeploy
