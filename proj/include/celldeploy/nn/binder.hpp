#pragma once

#include <vector>

#include "celldeploy/nn/tape.hpp"

namespace celldeploy::nn {

/// Puts parameters of one ParamList on a tape on first use and returns the
/// same Var for later uses, so shared weights accumulate into one gradient.
template <typename T>
class Binder {
 public:
  Binder(Tape<T>& tape, ParamList<T>& params, bool trainable)
      : tape_(tape), mutable_(&params), const_(&params), trainable_(trainable), vars_(params.size()) {}
  /// Read-only binding: values only, never accumulates gradients.
  Binder(Tape<T>& tape, const ParamList<T>& params) : tape_(tape), const_(&params), vars_(params.size()) {}

  Var operator()(int index) {
    Var& v = vars_.at(static_cast<std::size_t>(index));
    if (!v.valid())
      v = (mutable_ && trainable_) ? tape_.parameter((*mutable_)[index], true) : tape_.parameter((*const_)[index]);
    return v;
  }

  Tape<T>& tape() { return tape_; }
  const ParamList<T>& params() const { return *const_; }

 private:
  Tape<T>& tape_;
  ParamList<T>* mutable_ = nullptr;
  const ParamList<T>* const_;
  bool trainable_ = false;
  std::vector<Var> vars_;
};

}  // namespace celldeploy::nn
