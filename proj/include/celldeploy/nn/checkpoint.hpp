#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "celldeploy/nn/tape.hpp"

namespace celldeploy::nn {

// Binary layout, all integers u32 little-endian:
//   "CDCK" | version | tag | count
//   count x ( name_len | name bytes | ndim | dims... | f32 values... )
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  std::uint32_t tag = 0;
  std::vector<std::pair<std::string, Tensor<float>>> entries;
};

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
/// Throws ParseError on a truncated or foreign file.
Checkpoint read_checkpoint(const std::filesystem::path& path);

/// Appends every parameter as prefix + name.
void append_params(Checkpoint& ckpt, const std::string& prefix, const ParamList<float>& params);
/// Copies values back by name; ShapeError when a name is missing or a shape differs.
void restore_params(const Checkpoint& ckpt, const std::string& prefix, ParamList<float>& params);

}  // namespace celldeploy::nn
