#pragma once

#include <cmath>

#include "celldeploy/nn/tensor.hpp"
#include "celldeploy/rng.hpp"

namespace celldeploy::nn {

template <typename T>
void uniform_fill(Tensor<T>& t, double bound, Rng& rng) {
  for (T& v : t.values()) v = static_cast<T>(rng.uniform(-bound, bound));
}

/// Uniform in +-1/sqrt(fan_in).
template <typename T>
void fan_in_uniform(Tensor<T>& t, int fan_in, Rng& rng) {
  uniform_fill(t, 1.0 / std::sqrt(static_cast<double>(fan_in)), rng);
}

}  // namespace celldeploy::nn
