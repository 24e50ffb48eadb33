#include "celldeploy/nn/tape.hpp"

#include "celldeploy/errors.hpp"

namespace celldeploy::nn {

template <typename T>
Var Tape<T>::push(Node n) {
  nodes_.push_back(std::move(n));
  return {static_cast<int>(nodes_.size()) - 1};
}

template <typename T>
const typename Tape<T>::Node& Tape<T>::node(Var v) const {
  if (v.id < 0 || static_cast<std::size_t>(v.id) >= nodes_.size())
    throw GraphError("variable " + std::to_string(v.id) + " is not on this tape");
  return nodes_[static_cast<std::size_t>(v.id)];
}

template <typename T>
Var Tape<T>::constant(Tensor<T> value) {
  if (!value.all_finite()) throw NonFiniteError("non-finite leaf " + shape_str(value.shape()));
  Node n;
  n.value = std::move(value);
  return push(std::move(n));
}

template <typename T>
Var Tape<T>::variable(Tensor<T> value) {
  if (!value.all_finite()) throw NonFiniteError("non-finite leaf " + shape_str(value.shape()));
  Node n;
  n.value = std::move(value);
  n.requires_grad = grad_enabled_;
  return push(std::move(n));
}

template <typename T>
Var Tape<T>::parameter(Parameter<T>& p, bool trainable) {
  Node n;
  n.value = p.value;
  n.requires_grad = grad_enabled_ && trainable;
  if (n.requires_grad) n.param = &p;
  return push(std::move(n));
}

template <typename T>
Var Tape<T>::parameter(const Parameter<T>& p) {
  Node n;
  n.value = p.value;
  return push(std::move(n));
}

template <typename T>
const Tensor<T>& Tape<T>::value(Var v) const {
  return node(v).value;
}

template <typename T>
Tensor<T> Tape<T>::grad(Var v) const {
  const Node& n = node(v);
  if (!n.requires_grad) throw GraphError("variable " + std::to_string(v.id) + " does not require grad");
  if (!consumed_) throw GraphError("gradient requested before backward");
  if (n.grad.empty()) return Tensor<T>(n.value.shape());
  return n.grad;
}

template <typename T>
bool Tape<T>::requires_grad(Var v) const {
  return node(v).requires_grad;
}

template <typename T>
Var Tape<T>::record(Tensor<T> value, std::initializer_list<Var> inputs, BackwardFn fn, const char* op) {
  return record(std::move(value), std::vector<Var>(inputs), std::move(fn), op);
}

template <typename T>
Var Tape<T>::record(Tensor<T> value, const std::vector<Var>& inputs, BackwardFn fn, const char* op) {
  if (consumed_) throw GraphError(std::string(op) + ": tape already consumed by backward");
  if (!value.all_finite()) throw NonFiniteError(std::string(op) + ": non-finite value in output " + shape_str(value.shape()));
  Node n;
  n.value = std::move(value);
  if (grad_enabled_) {
    for (Var in : inputs)
      if (in.valid() && node(in).requires_grad) n.requires_grad = true;
  }
  if (n.requires_grad) n.backward = std::move(fn);
  return push(std::move(n));
}

template <typename T>
Tensor<T>& Tape<T>::grad_buffer(int id) {
  Node& n = nodes_[static_cast<std::size_t>(id)];
  if (n.grad.empty() && !n.value.empty()) n.grad = Tensor<T>(n.value.shape());
  return n.grad;
}

template <typename T>
void Tape<T>::backward(Var out) {
  const Node& n = node(out);
  if (n.value.size() != 1)
    throw GraphError("backward without a seed needs a single-element output, got " + shape_str(n.value.shape()));
  backward(out, Tensor<T>(n.value.shape(), T(1)));
}

template <typename T>
void Tape<T>::backward(Var out, const Tensor<T>& seed) {
  if (consumed_) throw GraphError("backward called twice on the same tape");
  const Node& o = node(out);
  if (seed.shape() != o.value.shape())
    throw GraphError("seed shape " + shape_str(seed.shape()) + " does not match output " + shape_str(o.value.shape()));
  consumed_ = true;
  if (!o.requires_grad) return;
  grad_buffer(out.id) = seed;
  for (int id = out.id; id >= 0; --id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (!n.requires_grad || n.grad.empty()) continue;
    if (n.backward) n.backward(*this, id);
    if (n.param) {
      T* g = n.param->grad.data();
      const T* src = n.grad.data();
      for (std::size_t i = 0; i < n.grad.size(); ++i) g[i] += src[i];
    }
  }
}

template class Tape<float>;
template class Tape<double>;

}  // namespace celldeploy::nn
