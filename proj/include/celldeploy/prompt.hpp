#pragma once

#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "celldeploy/scene.hpp"

namespace celldeploy {

/// One decimal place, no thousands separators; negative zero prints as 0.0.
std::string format_number(double v);

/// Fixed task template with one "User i at position (x,y,z) gets k dB"
/// clause per user, numbered from 1 in list order. Throws LengthMismatch.
std::string render_prompt(std::span<const UserSpec> users, std::span<const double> powers_dbm);

/// Long enough for 16 users at maximal numeric width.
inline constexpr int kDefaultMaxSeqLen = 640;

/// Closed-vocabulary tokenizer for rendered prompts: template words,
/// punctuation, a sign token, one token per digit and a decimal-point token
/// distinct from the sentence period. Every sequence starts with <start>.
class Tokenizer {
 public:
  Tokenizer();
  static const Tokenizer& standard();

  int vocab_size() const { return static_cast<int>(vocab_.size()); }
  int start_id() const { return 0; }
  int id(std::string_view token) const;
  const std::string& token(int id) const;

  /// Throws UnknownToken for text outside the vocabulary and SequenceTooLong
  /// when the result (start token included) exceeds max_seq_len.
  std::vector<int> tokenize(std::string_view text, int max_seq_len = kDefaultMaxSeqLen) const;
  /// Exact inverse of tokenize on rendered prompts.
  std::string detokenize(std::span<const int> ids) const;

 private:
  std::vector<std::string> vocab_;
  std::unordered_map<std::string, int> index_;
};

}  // namespace celldeploy
