#pragma once

#include <cstdint>
#include <vector>

#include "celldeploy/nn/tape.hpp"

namespace celldeploy::nn {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Bias-corrected Adam over one ParamList. Moment buffers are indexed like
/// the list, so the list layout must not change after construction.
template <typename T>
class Adam {
 public:
  Adam(const ParamList<T>& params, AdamConfig config);

  /// Applies one update from the accumulated gradients; gradients are left
  /// untouched (call zero_grad before the next accumulation).
  void step(ParamList<T>& params);

  std::int64_t steps() const { return t_; }
  const AdamConfig& config() const { return config_; }

 private:
  AdamConfig config_;
  std::vector<Tensor<T>> m_;
  std::vector<Tensor<T>> v_;
  std::int64_t t_ = 0;
};

extern template class Adam<float>;
extern template class Adam<double>;

}  // namespace celldeploy::nn
