#include "celldeploy/nn/adam.hpp"

#include <cmath>

#include "celldeploy/errors.hpp"

namespace celldeploy::nn {

template <typename T>
Adam<T>::Adam(const ParamList<T>& params, AdamConfig config) : config_(config) {
  m_.reserve(params.size());
  v_.reserve(params.size());
  for (const auto& p : params) {
    m_.emplace_back(p.value.shape());
    v_.emplace_back(p.value.shape());
  }
}

template <typename T>
void Adam<T>::step(ParamList<T>& params) {
  if (params.size() != m_.size()) throw ShapeError("adam: parameter list changed since construction");
  ++t_;
  const double b1 = config_.beta1, b2 = config_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  for (std::size_t k = 0; k < params.size(); ++k) {
    Parameter<T>& p = params[static_cast<int>(k)];
    if (p.value.shape() != m_[k].shape()) throw ShapeError("adam: shape of " + p.name + " changed");
    T* w = p.value.data();
    const T* g = p.grad.data();
    T* m = m_[k].data();
    T* v = v_[k].data();
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double gi = static_cast<double>(g[i]);
      const double mi = b1 * static_cast<double>(m[i]) + (1.0 - b1) * gi;
      const double vi = b2 * static_cast<double>(v[i]) + (1.0 - b2) * gi * gi;
      m[i] = static_cast<T>(mi);
      v[i] = static_cast<T>(vi);
      const double update = config_.lr * (mi / c1) / (std::sqrt(vi / c2) + config_.eps);
      w[i] = static_cast<T>(static_cast<double>(w[i]) - update);
    }
  }
}

template class Adam<float>;
template class Adam<double>;

}  // namespace celldeploy::nn
