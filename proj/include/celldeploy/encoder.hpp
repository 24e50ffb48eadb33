#pragma once

#include <span>
#include <string>
#include <vector>

#include "celldeploy/nn/binder.hpp"
#include "celldeploy/nn/ops.hpp"
#include "celldeploy/prompt.hpp"
#include "celldeploy/rng.hpp"

namespace celldeploy {

struct EncoderConfig {
  int layers = 2;
  int heads = 2;
  int model_dim = 32;
  int ffn_dim = 64;
  int max_seq_len = kDefaultMaxSeqLen;
  int vocab_size = Tokenizer::standard().vocab_size();

  /// Throws ValidationError naming the offending field.
  void validate() const;
};

/// Parameter indices of an encoder inside a larger ParamList.
struct EncoderLayout {
  struct Block {
    int wq, bq, wk, bk, wv, bv, wo, bo;
    int ln1_g, ln1_b, ff1_w, ff1_b, ff2_w, ff2_b, ln2_g, ln2_b;
  };
  EncoderConfig config;
  int embed = -1;
  std::vector<Block> blocks;
};

/// Appends the encoder parameters (names prefixed) to params.
template <typename T>
EncoderLayout add_encoder_params(nn::ParamList<T>& params, const std::string& prefix, const EncoderConfig& config);

/// Embedding uniform in +-1, projections fan-in uniform, layernorm (1, 0).
template <typename T>
void init_encoder(nn::ParamList<T>& params, const EncoderLayout& layout, Rng& rng);

/// Transformer encoder with sinusoidal positions and post-norm blocks.
/// Returns the final hidden vector at the start-token position, shape [1, D].
/// The last block computes only that row.
template <typename T>
nn::Var encode(nn::Binder<T>& binder, const EncoderLayout& layout, std::span<const int> tokens);

/// Convenience wrapper: forward pass without gradients.
template <typename T>
std::vector<T> encode_vector(const nn::ParamList<T>& params, const EncoderLayout& layout, std::span<const int> tokens);

/// Standard sinusoidal table [len, dim].
template <typename T>
nn::Tensor<T> sinusoidal_positions(int len, int dim);

}  // namespace celldeploy
