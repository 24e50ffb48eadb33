#pragma once

#include <functional>
#include <string>
#include <vector>

#include "celldeploy/nn/tensor.hpp"

namespace celldeploy::nn {

template <typename T>
struct Parameter {
  std::string name;
  Tensor<T> value;
  Tensor<T> grad;

  Parameter() = default;
  Parameter(std::string n, Tensor<T> v) : name(std::move(n)), value(std::move(v)), grad(value.shape()) {}
  void zero_grad() { grad.fill(T(0)); }
};

/// Owning, index-addressed parameter collection of one network.
template <typename T>
class ParamList {
 public:
  int add(std::string name, Shape shape) {
    items_.emplace_back(std::move(name), Tensor<T>(std::move(shape)));
    return static_cast<int>(items_.size()) - 1;
  }
  Parameter<T>& operator[](int i) { return items_.at(static_cast<std::size_t>(i)); }
  const Parameter<T>& operator[](int i) const { return items_.at(static_cast<std::size_t>(i)); }
  std::size_t size() const { return items_.size(); }
  auto begin() { return items_.begin(); }
  auto end() { return items_.end(); }
  auto begin() const { return items_.begin(); }
  auto end() const { return items_.end(); }
  std::size_t scalar_count() const {
    std::size_t n = 0;
    for (const auto& p : items_) n += p.value.size();
    return n;
  }
  void zero_grad() {
    for (auto& p : items_) p.zero_grad();
  }
  bool operator==(const ParamList& o) const {
    if (items_.size() != o.items_.size()) return false;
    for (std::size_t i = 0; i < items_.size(); ++i)
      if (items_[i].name != o.items_[i].name || !(items_[i].value == o.items_[i].value)) return false;
    return true;
  }

 private:
  std::vector<Parameter<T>> items_;
};

/// Handle to a node on a Tape.
struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

/// Records one forward pass. Nodes are appended in evaluation order, so the
/// reverse index order is a topological order for backward.
template <typename T>
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, int self)>;

  explicit Tape(bool grad_enabled = true) : grad_enabled_(grad_enabled) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool grad_enabled() const { return grad_enabled_; }

  Var constant(Tensor<T> value);
  /// Leaf whose gradient can be read back with grad() after backward.
  Var variable(Tensor<T> value);
  /// Leaf bound to a parameter. When trainable, backward adds into p.grad.
  Var parameter(Parameter<T>& p, bool trainable);
  Var parameter(const Parameter<T>& p);

  const Tensor<T>& value(Var v) const;
  /// Gradient accumulated by backward; zeros if the node was not reached.
  Tensor<T> grad(Var v) const;
  bool requires_grad(Var v) const;
  std::size_t size() const { return nodes_.size(); }

  /// Appends an op result. fn is kept only if some input requires grad.
  Var record(Tensor<T> value, std::initializer_list<Var> inputs, BackwardFn fn, const char* op);
  Var record(Tensor<T> value, const std::vector<Var>& inputs, BackwardFn fn, const char* op);

  /// Gradient buffer of node id, allocated on first use. For backward fns.
  Tensor<T>& grad_buffer(int id);
  bool requires_grad(int id) const { return nodes_[static_cast<std::size_t>(id)].requires_grad; }
  const Tensor<T>& value(int id) const { return nodes_[static_cast<std::size_t>(id)].value; }

  /// Seeds d(out)/d(out) = 1 for a single-element output.
  void backward(Var out);
  void backward(Var out, const Tensor<T>& seed);

 private:
  struct Node {
    Tensor<T> value;
    Tensor<T> grad;
    BackwardFn backward;
    Parameter<T>* param = nullptr;
    bool requires_grad = false;
  };

  const Node& node(Var v) const;
  Var push(Node n);

  std::vector<Node> nodes_;
  bool grad_enabled_;
  bool consumed_ = false;
};

extern template class Tape<float>;
extern template class Tape<double>;

}  // namespace celldeploy::nn
