#include "celldeploy/encoder.hpp"

#include <algorithm>
#include <cmath>

#include "celldeploy/errors.hpp"
#include "celldeploy/nn/init.hpp"

namespace celldeploy {

using nn::Var;

void EncoderConfig::validate() const {
  if (layers < 1) throw ValidationError("encoder.layers", "must be >= 1");
  if (heads < 1) throw ValidationError("encoder.heads", "must be >= 1");
  if (model_dim < 1 || model_dim % heads != 0)
    throw ValidationError("encoder.model_dim", "must be a positive multiple of heads");
  if (ffn_dim < 1) throw ValidationError("encoder.ffn_dim", "must be >= 1");
  if (max_seq_len < 1) throw ValidationError("encoder.max_seq_len", "must be >= 1");
  if (vocab_size < 1) throw ValidationError("encoder.vocab_size", "must be >= 1");
}

template <typename T>
EncoderLayout add_encoder_params(nn::ParamList<T>& params, const std::string& prefix, const EncoderConfig& config) {
  config.validate();
  const int D = config.model_dim, F = config.ffn_dim;
  EncoderLayout layout;
  layout.config = config;
  layout.embed = params.add(prefix + "embed", {config.vocab_size, D});
  for (int l = 0; l < config.layers; ++l) {
    const std::string p = prefix + "block" + std::to_string(l) + ".";
    EncoderLayout::Block b{};
    b.wq = params.add(p + "attn.wq", {D, D});
    b.bq = params.add(p + "attn.bq", {D});
    b.wk = params.add(p + "attn.wk", {D, D});
    b.bk = params.add(p + "attn.bk", {D});
    b.wv = params.add(p + "attn.wv", {D, D});
    b.bv = params.add(p + "attn.bv", {D});
    b.wo = params.add(p + "attn.wo", {D, D});
    b.bo = params.add(p + "attn.bo", {D});
    b.ln1_g = params.add(p + "ln1.gamma", {D});
    b.ln1_b = params.add(p + "ln1.beta", {D});
    b.ff1_w = params.add(p + "ff1.w", {F, D});
    b.ff1_b = params.add(p + "ff1.b", {F});
    b.ff2_w = params.add(p + "ff2.w", {D, F});
    b.ff2_b = params.add(p + "ff2.b", {D});
    b.ln2_g = params.add(p + "ln2.gamma", {D});
    b.ln2_b = params.add(p + "ln2.beta", {D});
    layout.blocks.push_back(b);
  }
  return layout;
}

template <typename T>
void init_encoder(nn::ParamList<T>& params, const EncoderLayout& layout, Rng& rng) {
  const int D = layout.config.model_dim, F = layout.config.ffn_dim;
  nn::uniform_fill(params[layout.embed].value, 1.0, rng);
  for (const auto& b : layout.blocks) {
    for (int w : {b.wq, b.wk, b.wv, b.wo}) nn::fan_in_uniform(params[w].value, D, rng);
    for (int bias : {b.bq, b.bk, b.bv, b.bo}) nn::fan_in_uniform(params[bias].value, D, rng);
    nn::fan_in_uniform(params[b.ff1_w].value, D, rng);
    nn::fan_in_uniform(params[b.ff1_b].value, D, rng);
    nn::fan_in_uniform(params[b.ff2_w].value, F, rng);
    nn::fan_in_uniform(params[b.ff2_b].value, F, rng);
    params[b.ln1_g].value.fill(T(1));
    params[b.ln1_b].value.fill(T(0));
    params[b.ln2_g].value.fill(T(1));
    params[b.ln2_b].value.fill(T(0));
  }
}

template <typename T>
nn::Tensor<T> sinusoidal_positions(int len, int dim) {
  nn::Tensor<T> pe({len, dim});
  for (int pos = 0; pos < len; ++pos)
    for (int i = 0; i < dim; ++i) {
      const double rate = std::pow(10000.0, -static_cast<double>(i - i % 2) / dim);
      const double a = pos * rate;
      pe[static_cast<std::size_t>(pos) * dim + i] = static_cast<T>(i % 2 == 0 ? std::sin(a) : std::cos(a));
    }
  return pe;
}

template <typename T>
Var encode(nn::Binder<T>& bind, const EncoderLayout& layout, std::span<const int> tokens) {
  const EncoderConfig& cfg = layout.config;
  const int L = static_cast<int>(tokens.size());
  if (L < 1) throw ShapeError("encode: empty token sequence");
  if (L > cfg.max_seq_len)
    throw SequenceTooLong("encode: " + std::to_string(L) + " tokens exceed limit " + std::to_string(cfg.max_seq_len));
  nn::Tape<T>& tape = bind.tape();

  static thread_local nn::Tensor<T> pe_cache;
  if (pe_cache.rank() != 2 || pe_cache.dim(0) < L || pe_cache.dim(1) != cfg.model_dim)
    pe_cache = sinusoidal_positions<T>(std::max(L, cfg.max_seq_len), cfg.model_dim);
  nn::Tensor<T> pe({L, cfg.model_dim});
  std::copy_n(pe_cache.data(), pe.size(), pe.data());

  Var x = nn::add(tape, nn::embedding(tape, bind(layout.embed), tokens), tape.constant(std::move(pe)));
  for (std::size_t l = 0; l < layout.blocks.size(); ++l) {
    const auto& b = layout.blocks[l];
    const bool last = l + 1 == layout.blocks.size();
    const int nq = last ? 1 : L;
    const nn::AttentionParams ap{bind(b.wq), bind(b.bq), bind(b.wk), bind(b.bk),
                                 bind(b.wv), bind(b.bv), bind(b.wo), bind(b.bo)};
    Var attn = nn::multihead_attention(tape, x, ap, cfg.heads, nq);
    Var resid = last ? nn::slice_rows(tape, x, 0, 1) : x;
    Var h = nn::layernorm(tape, nn::add(tape, resid, attn), bind(b.ln1_g), bind(b.ln1_b));
    Var ff = nn::dense(tape, nn::relu(tape, nn::dense(tape, h, bind(b.ff1_w), bind(b.ff1_b))), bind(b.ff2_w), bind(b.ff2_b));
    x = nn::layernorm(tape, nn::add(tape, h, ff), bind(b.ln2_g), bind(b.ln2_b));
  }
  return x;
}

template <typename T>
std::vector<T> encode_vector(const nn::ParamList<T>& params, const EncoderLayout& layout, std::span<const int> tokens) {
  nn::Tape<T> tape(false);
  nn::Binder<T> bind(tape, params);
  const auto& v = tape.value(encode(bind, layout, tokens));
  return {v.values().begin(), v.values().end()};
}

#define CELLDEPLOY_INSTANTIATE_ENCODER(T)                                                               \
  template EncoderLayout add_encoder_params<T>(nn::ParamList<T>&, const std::string&, const EncoderConfig&); \
  template void init_encoder<T>(nn::ParamList<T>&, const EncoderLayout&, Rng&);                        \
  template Var encode<T>(nn::Binder<T>&, const EncoderLayout&, std::span<const int>);                  \
  template std::vector<T> encode_vector<T>(const nn::ParamList<T>&, const EncoderLayout&, std::span<const int>); \
  template nn::Tensor<T> sinusoidal_positions<T>(int, int);

CELLDEPLOY_INSTANTIATE_ENCODER(float)
CELLDEPLOY_INSTANTIATE_ENCODER(double)

}  // namespace celldeploy
