#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "celldeploy/nn/binder.hpp"
#include "celldeploy/nn/tape.hpp"
#include "celldeploy/rng.hpp"

namespace celldeploy::testing {

using nn::Tape;
using nn::Tensor;
using nn::Var;

// Builds a scalar from the inputs on a fresh tape.
using ScalarFn = std::function<Var(Tape<double>&, const std::vector<Var>&)>;

inline Tensor<double> random_tensor(nn::Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor<double> t(std::move(shape));
  for (double& v : t.values()) v = rng.uniform(lo, hi);
  return t;
}

inline double evaluate(const ScalarFn& f, const std::vector<Tensor<double>>& inputs) {
  Tape<double> tape(false);
  std::vector<Var> vars;
  for (const auto& t : inputs) vars.push_back(tape.constant(t));
  return tape.value(f(tape, vars))[0];
}

/// Normwise relative error ||a - n|| / max(||a|| + ||n||, floor) per input,
/// comparing reverse-mode gradients with central differences. The floor
/// keeps identically-zero gradients from dividing difference noise by noise.
inline std::vector<double> gradient_errors(const ScalarFn& f, std::vector<Tensor<double>> inputs, double h = 1e-6,
                                           double floor = 1e-5) {
  Tape<double> tape;
  std::vector<Var> vars;
  for (const auto& t : inputs) vars.push_back(tape.variable(t));
  const Var out = f(tape, vars);
  tape.backward(out);
  std::vector<double> errors;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    const Tensor<double> analytic = tape.grad(vars[k]);
    double diff = 0.0, na = 0.0, nn = 0.0;
    for (std::size_t i = 0; i < inputs[k].size(); ++i) {
      const double saved = inputs[k][i];
      inputs[k][i] = saved + h;
      const double up = evaluate(f, inputs);
      inputs[k][i] = saved - h;
      const double down = evaluate(f, inputs);
      inputs[k][i] = saved;
      const double numeric = (up - down) / (2.0 * h);
      diff += (analytic[i] - numeric) * (analytic[i] - numeric);
      na += analytic[i] * analytic[i];
      nn += numeric * numeric;
    }
    errors.push_back(std::sqrt(diff) / std::max(std::sqrt(na) + std::sqrt(nn), floor));
  }
  return errors;
}

/// Largest per-input error.
inline double gradient_error(const ScalarFn& f, std::vector<Tensor<double>> inputs, double h = 1e-6,
                             double floor = 1e-5) {
  const auto e = gradient_errors(f, std::move(inputs), h, floor);
  return e.empty() ? 0.0 : *std::max_element(e.begin(), e.end());
}

using ParamFn = std::function<Var(nn::Binder<double>&)>;

/// Same error measure for parameter gradients accumulated through a Binder.
/// At most `per_param` coordinates of each parameter are probed.
inline double param_gradient_error(nn::ParamList<double>& params, const ParamFn& f, int per_param, Rng& rng,
                                   double h = 1e-6, double floor = 1e-5) {
  params.zero_grad();
  {
    Tape<double> tape;
    nn::Binder<double> bind(tape, params, true);
    tape.backward(f(bind));
  }
  const auto eval = [&] {
    Tape<double> tape(false);
    nn::Binder<double> bind(tape, static_cast<const nn::ParamList<double>&>(params));
    return tape.value(f(bind))[0];
  };
  double worst = 0.0;
  for (auto& p : params) {
    const std::size_t n = p.value.size();
    std::vector<std::size_t> idx;
    if (static_cast<int>(n) <= per_param) {
      for (std::size_t i = 0; i < n; ++i) idx.push_back(i);
    } else {
      for (int k = 0; k < per_param; ++k) idx.push_back(static_cast<std::size_t>(rng.uniform_index(n)));
    }
    double diff = 0.0, na = 0.0, nn = 0.0;
    for (std::size_t i : idx) {
      const double saved = p.value[i];
      p.value[i] = saved + h;
      const double up = eval();
      p.value[i] = saved - h;
      const double down = eval();
      p.value[i] = saved;
      const double numeric = (up - down) / (2.0 * h);
      diff += (p.grad[i] - numeric) * (p.grad[i] - numeric);
      na += p.grad[i] * p.grad[i];
      nn += numeric * numeric;
    }
    worst = std::max(worst, std::sqrt(diff) / std::max(std::sqrt(na) + std::sqrt(nn), floor));
  }
  return worst;
}

}  // namespace celldeploy::testing
