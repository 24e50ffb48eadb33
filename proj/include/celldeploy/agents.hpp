#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string_view>

#include "celldeploy/encoder.hpp"
#include "celldeploy/env.hpp"
#include "celldeploy/external_encoder.hpp"
#include "celldeploy/nn/checkpoint.hpp"

namespace celldeploy {

enum class ActorVariant { CnnOnly, PromptOnly, Combined };

/// "cnn", "prompt", "combined".
std::string_view variant_name(ActorVariant v);
/// Throws ValidationError("variant").
ActorVariant parse_variant(std::string_view name);
/// Value stored in the checkpoint header.
std::uint32_t variant_tag(ActorVariant v);

inline constexpr int kHiddenSize = 256;
inline constexpr int kPoolSize = 8;

/// conv(8, 5x5, s4) -> relu -> conv(4, 3x3, s4) -> relu -> pool 8x8 -> dense(256).
struct ConvBranchLayout {
  int c1_w, c1_b, c2_w, c2_b, fc_w, fc_b;
};

struct AgentConfig {
  EncoderConfig encoder;
  /// When > 0, prompt features come from an external provider of this
  /// dimension instead of the trainable encoder.
  int external_dim = 0;
};

struct ActorLayout {
  ActorVariant variant = ActorVariant::CnnOnly;
  std::optional<ConvBranchLayout> cnn;
  std::optional<EncoderLayout> encoder;
  int external_dim = 0;
  int h_w = -1, h_b = -1, out_w = -1, out_b = -1;

  bool uses_map() const { return cnn.has_value(); }
  bool uses_prompt() const { return variant != ActorVariant::CnnOnly; }
};

struct CriticLayout {
  ConvBranchLayout map;
  int act_w = -1, act_b = -1, out_w = -1, out_b = -1;
};

template <typename T>
struct ActorNet {
  ActorLayout layout;
  nn::ParamList<T> params;
};

template <typename T>
struct CriticNet {
  CriticLayout layout;
  nn::ParamList<T> params;
};

/// Networks with zero-valued parameters of the right shapes.
template <typename T>
ActorNet<T> make_actor(ActorVariant variant, const AgentConfig& config);
template <typename T>
CriticNet<T> make_critic();

/// Fan-in uniform init; the actor output layer uses +-1e-3.
template <typename T>
void init_actor(ActorNet<T>& actor, Rng& rng);
template <typename T>
void init_critic(CriticNet<T>& critic, Rng& rng);

template <typename T>
struct AgentNets {
  ActorNet<T> actor, target_actor;
  CriticNet<T> critic, target_critic;
};

/// Actor and critic draw from separate streams derived from seed, so the
/// critic does not depend on the actor variant. Targets are exact copies.
template <typename T>
AgentNets<T> init_agent(ActorVariant variant, std::uint64_t seed, const AgentConfig& config = {});

/// (dBm + 200) / 200, the network-side view of a coverage map.
inline double normalize_dbm(double dbm) { return (dbm + 200.0) / 200.0; }

/// Normalized maps stacked as [B, 1, rows, cols]. Throws ShapeError on
/// missing or differently sized maps.
template <typename T>
nn::Tensor<T> map_batch(std::span<const State* const> states);

struct PromptContext {
  const Tokenizer* tokenizer = &Tokenizer::standard();
  ExternalEncoder* external = nullptr;
};

/// Raw actions [B, 6] in (-1, 1).
template <typename T>
nn::Var actor_forward(nn::Binder<T>& bind, const ActorLayout& layout, std::span<const State* const> states,
                      const PromptContext& prompts);
/// Variant that reuses an already recorded map batch (may be invalid for prompt-only actors).
template <typename T>
nn::Var actor_forward(nn::Binder<T>& bind, const ActorLayout& layout, nn::Var maps,
                      std::span<const State* const> states, const PromptContext& prompts);

/// Q values [B, 1]; maps [B, 1, H, W], actions [B, 6].
template <typename T>
nn::Var critic_forward(nn::Binder<T>& bind, const CriticLayout& layout, nn::Var maps, nn::Var actions);

/// Single-state helpers without gradient tracking.
RawAction actor_act(const ActorNet<float>& actor, const State& state, const PromptContext& prompts = {});
double critic_value(const CriticNet<float>& critic, const State& state, const RawAction& action);

/// One file holding actor, critic and both targets; the variant is the header tag.
void save_agent(const std::filesystem::path& path, const AgentNets<float>& nets);
AgentNets<float> load_agent(const std::filesystem::path& path, const AgentConfig& config = {});
ActorVariant checkpoint_variant(const nn::Checkpoint& ckpt);

}  // namespace celldeploy
