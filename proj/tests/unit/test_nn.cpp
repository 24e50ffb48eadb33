#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "../support/gradcheck.hpp"
#include "celldeploy/errors.hpp"
#include "celldeploy/nn/adam.hpp"
#include "celldeploy/nn/checkpoint.hpp"
#include "celldeploy/nn/ops.hpp"

using namespace celldeploy;
using namespace celldeploy::nn;
using celldeploy::testing::gradient_error;
using celldeploy::testing::random_tensor;

namespace {

constexpr double kTol = 1e-4;

// Scalar probe sum(y * W) with W fixed by the shape of y.
Var probe(Tape<double>& tape, Var y) {
  Rng r(99);
  return sum(tape, mul(tape, y, tape.constant(random_tensor(tape.value(y).shape(), r))));
}

int pick(Rng& rng, int lo, int hi) { return lo + static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(hi - lo + 1))); }

// Values bounded away from zero so relu kinks stay out of the difference stencil.
Tensor<double> away_from_zero(Shape s, Rng& rng) {
  Tensor<double> t = random_tensor(std::move(s), rng, 0.05, 1.0);
  for (double& v : t.values())
    if (rng.uniform() < 0.5) v = -v;
  return t;
}

}  // namespace

TEST_CASE("gradient check: dense") {
  Rng rng(1);
  for (int trial = 0; trial < 3; ++trial) {
    const int B = pick(rng, 1, 4), in = pick(rng, 1, 7), out = pick(rng, 1, 6);
    const auto f = [](Tape<double>& t, const std::vector<Var>& v) { return probe(t, dense(t, v[0], v[1], v[2])); };
    CHECK(gradient_error(f, {random_tensor({B, in}, rng), random_tensor({out, in}, rng), random_tensor({out}, rng)}) <
          kTol);
    const auto g = [](Tape<double>& t, const std::vector<Var>& v) { return probe(t, dense(t, v[0], v[1], Var{})); };
    CHECK(gradient_error(g, {random_tensor({B, in}, rng), random_tensor({out, in}, rng)}) < kTol);
  }
}

TEST_CASE("gradient check: conv2d") {
  Rng rng(2);
  const int configs[3][8] = {{1, 1, 6, 7, 2, 3, 1, 1}, {2, 2, 9, 8, 3, 3, 2, 1}, {1, 3, 13, 11, 2, 5, 4, 2}};
  for (const auto& c : configs) {
    const int N = c[0], C = c[1], H = c[2], W = c[3], F = c[4], k = c[5], stride = c[6], pad = c[7];
    const auto f = [=](Tape<double>& t, const std::vector<Var>& v) {
      return probe(t, conv2d(t, v[0], v[1], v[2], stride, pad));
    };
    CHECK(gradient_error(f, {random_tensor({N, C, H, W}, rng), random_tensor({F, C, k, k}, rng),
                             random_tensor({F}, rng)}) < kTol);
  }
}

TEST_CASE("conv2d output shape and value") {
  Tape<double> tape(false);
  const Var x = tape.constant(Tensor<double>({1, 1, 3, 3}, {1, 2, 3, 4, 5, 6, 7, 8, 9}));
  const Var w = tape.constant(Tensor<double>({1, 1, 3, 3}, std::vector<double>(9, 1.0)));
  const Var b = tape.constant(Tensor<double>({1}, {0.5}));
  const auto& y = tape.value(conv2d(tape, x, w, b, 1, 1));
  CHECK(y.shape() == Shape{1, 1, 3, 3});
  CHECK(y[4] == doctest::Approx(45.5));
  CHECK(y[0] == doctest::Approx(1 + 2 + 4 + 5 + 0.5));
  CHECK_THROWS_AS(conv2d(tape, x, tape.constant(Tensor<double>({1, 2, 3, 3})), b, 1, 1), ShapeError);
}

TEST_CASE("gradient check: adaptive average pooling") {
  Rng rng(3);
  const int configs[3][4] = {{5, 7, 2, 3}, {8, 8, 8, 8}, {11, 6, 4, 4}};
  for (const auto& c : configs) {
    const int oh = c[2], ow = c[3];
    const auto f = [=](Tape<double>& t, const std::vector<Var>& v) {
      return probe(t, adaptive_avg_pool2d(t, v[0], oh, ow));
    };
    CHECK(gradient_error(f, {random_tensor({2, 2, c[0], c[1]}, rng)}) < kTol);
  }
  Tape<double> tape(false);
  const auto& y = tape.value(adaptive_avg_pool2d(tape, tape.constant(Tensor<double>({1, 1, 1, 3}, {1, 2, 4})), 1, 2));
  // windows [0, 2) and [1, 3)
  CHECK(y[0] == doctest::Approx(1.5));
  CHECK(y[1] == doctest::Approx(3.0));
}

TEST_CASE("gradient check: elementwise ops") {
  Rng rng(4);
  for (int trial = 0; trial < 3; ++trial) {
    const Shape s{pick(rng, 1, 4), pick(rng, 1, 5)};
    using F = std::function<Var(Tape<double>&, const std::vector<Var>&)>;
    const std::vector<std::pair<const char*, F>> unary = {
        {"relu", [](Tape<double>& t, const std::vector<Var>& v) { return probe(t, relu(t, v[0])); }},
        {"tanh", [](Tape<double>& t, const std::vector<Var>& v) { return probe(t, nn::tanh(t, v[0])); }},
        {"square", [](Tape<double>& t, const std::vector<Var>& v) { return probe(t, square(t, v[0])); }},
        {"scale", [](Tape<double>& t, const std::vector<Var>& v) { return probe(t, scale(t, v[0], -1.7)); }},
        {"sum", [](Tape<double>& t, const std::vector<Var>& v) { return scale(t, sum(t, v[0]), 0.3); }},
        {"mean", [](Tape<double>& t, const std::vector<Var>& v) { return mean(t, square(t, v[0])); }},
        {"flatten", [](Tape<double>& t, const std::vector<Var>& v) { return probe(t, flatten(t, v[0])); }},
        {"reshape", [](Tape<double>& t, const std::vector<Var>& v) {
           return probe(t, reshape(t, v[0], Shape{static_cast<int>(t.value(v[0]).size())}));
         }}};
    for (const auto& [name, f] : unary) {
      INFO(name);
      CHECK(gradient_error(f, {away_from_zero(s, rng)}) < kTol);
    }
    const std::vector<std::pair<const char*, F>> binary = {
        {"add", [](Tape<double>& t, const std::vector<Var>& v) { return probe(t, add(t, v[0], v[1])); }},
        {"sub", [](Tape<double>& t, const std::vector<Var>& v) { return probe(t, sub(t, v[0], v[1])); }},
        {"mul", [](Tape<double>& t, const std::vector<Var>& v) { return probe(t, mul(t, v[0], v[1])); }}};
    for (const auto& [name, f] : binary) {
      INFO(name);
      CHECK(gradient_error(f, {random_tensor(s, rng), random_tensor(s, rng)}) < kTol);
    }
  }
}

TEST_CASE("gradient check: structural ops") {
  Rng rng(5);
  for (int trial = 0; trial < 3; ++trial) {
    const int B = pick(rng, 1, 4), m = pick(rng, 1, 4), n = pick(rng, 1, 4);
    const auto cat = [](Tape<double>& t, const std::vector<Var>& v) { return probe(t, concat_cols(t, v[0], v[1])); };
    CHECK(gradient_error(cat, {random_tensor({B, m}, rng), random_tensor({B, n}, rng)}) < kTol);

    const auto stack = [](Tape<double>& t, const std::vector<Var>& v) { return probe(t, stack_rows(t, v)); };
    CHECK(gradient_error(stack, {random_tensor({1, n}, rng), random_tensor({n}, rng), random_tensor({1, n}, rng)}) <
          kTol);

    const int rows = pick(rng, 2, 6), start = pick(rng, 0, rows - 1), count = pick(rng, 1, rows - start);
    const auto slice = [=](Tape<double>& t, const std::vector<Var>& v) {
      return probe(t, slice_rows(t, v[0], start, count));
    };
    CHECK(gradient_error(slice, {random_tensor({rows, n}, rng)}) < kTol);

    const int V = pick(rng, 2, 9);
    std::vector<int> ids;
    for (int i = 0; i < 7; ++i) ids.push_back(pick(rng, 0, V - 1));
    ids.push_back(ids.front());  // repeated id accumulates
    const auto emb = [ids](Tape<double>& t, const std::vector<Var>& v) { return probe(t, embedding(t, v[0], ids)); };
    CHECK(gradient_error(emb, {random_tensor({V, n}, rng)}) < kTol);
  }
  Tape<double> tape(false);
  const Var table = tape.constant(Tensor<double>({3, 2}));
  const std::vector<int> bad{3};
  CHECK_THROWS_AS(embedding(tape, table, bad), ShapeError);
  CHECK_THROWS_AS(concat_cols(tape, tape.constant(Tensor<double>({2, 1})), tape.constant(Tensor<double>({3, 1}))),
                  ShapeError);
  CHECK_THROWS_AS(add(tape, tape.constant(Tensor<double>({2, 1})), tape.constant(Tensor<double>({1, 2}))), ShapeError);
}

TEST_CASE("gradient check: layernorm") {
  Rng rng(6);
  for (int trial = 0; trial < 3; ++trial) {
    const int R = pick(rng, 1, 5), D = pick(rng, 2, 9);
    const auto f = [](Tape<double>& t, const std::vector<Var>& v) { return probe(t, layernorm(t, v[0], v[1], v[2])); };
    CHECK(gradient_error(f, {random_tensor({R, D}, rng, -2, 2), random_tensor({D}, rng), random_tensor({D}, rng)}) <
          kTol);
  }
}

TEST_CASE("layernorm normalizes each row") {
  Rng rng(7);
  const int R = 6, D = 40;
  Tape<double> tape(false);
  const Var x = tape.constant(random_tensor({R, D}, rng, -30, 50));
  const auto& y = tape.value(layernorm(tape, x, tape.constant(Tensor<double>({D}, 1.0)), tape.constant(Tensor<double>({D})), 0.0));
  for (int r = 0; r < R; ++r) {
    double mu = 0, var = 0;
    for (int d = 0; d < D; ++d) mu += y[r * D + d];
    mu /= D;
    for (int d = 0; d < D; ++d) var += (y[r * D + d] - mu) * (y[r * D + d] - mu);
    var /= D;
    CHECK(std::abs(mu) < 1e-6);
    CHECK(std::abs(var - 1.0) < 1e-6);
  }
}

TEST_CASE("gradient check: multi-head attention") {
  Rng rng(8);
  const int configs[3][4] = {{3, 4, 1, 3}, {5, 6, 2, 1}, {4, 8, 4, 2}};  // L, D, heads, n_query
  for (const auto& c : configs) {
    const int L = c[0], D = c[1], H = c[2], nq = c[3];
    const auto f = [=](Tape<double>& t, const std::vector<Var>& v) {
      const AttentionParams p{v[1], v[2], v[3], v[4], v[5], v[6], v[7], v[8]};
      return probe(t, multihead_attention(t, v[0], p, H, nq));
    };
    std::vector<Tensor<double>> in{random_tensor({L, D}, rng)};
    for (int k = 0; k < 4; ++k) {
      in.push_back(random_tensor({D, D}, rng, -0.7, 0.7));
      in.push_back(random_tensor({D}, rng, -0.3, 0.3));
    }
    const auto errs = celldeploy::testing::gradient_errors(f, in);
    for (std::size_t k = 0; k < errs.size(); ++k) {
      INFO("input " << k);
      CHECK(errs[k] < kTol);
    }
  }
}

TEST_CASE("attention rows are probability distributions") {
  Rng rng(9);
  const int L = 12, D = 8, H = 2;
  const auto probs = attention_probabilities(random_tensor({L, D}, rng, -3, 3), random_tensor({D, D}, rng),
                                             random_tensor({D}, rng), random_tensor({D, D}, rng),
                                             random_tensor({D}, rng), H, L);
  REQUIRE(probs.shape() == Shape{H, L, L});
  for (int h = 0; h < H; ++h)
    for (int q = 0; q < L; ++q) {
      double s = 0;
      for (int k = 0; k < L; ++k) {
        const double p = probs[(static_cast<std::size_t>(h) * L + q) * L + k];
        CHECK(p >= 0.0);
        s += p;
      }
      CHECK(std::abs(s - 1.0) < 1e-6);
    }
}

TEST_CASE("non-finite values fail fast") {
  Tape<double> tape;
  const Var x = tape.variable(Tensor<double>({1, 2}, {1e300, 1.0}));
  CHECK_THROWS_AS(square(tape, x), NonFiniteError);
  CHECK_THROWS_AS(tape.constant(Tensor<double>({1}, {NAN})), NonFiniteError);
}

TEST_CASE("tape misuse raises GraphError") {
  Tape<double> tape;
  const Var x = tape.variable(Tensor<double>({2}, {1.0, 2.0}));
  const Var s = sum(tape, x);
  CHECK_THROWS_AS(tape.grad(x), GraphError);
  CHECK_THROWS_AS(tape.backward(x), GraphError);
  tape.backward(s);
  CHECK(tape.grad(x)[1] == 1.0);
  CHECK_THROWS_AS(tape.backward(s), GraphError);
  CHECK_THROWS_AS(sum(tape, x), GraphError);
  Tape<double> other;
  CHECK_THROWS_AS(other.value(Var{5}), GraphError);
}

TEST_CASE("shared parameters accumulate into one gradient") {
  Parameter<double> w("w", Tensor<double>({1}, {3.0}));
  Tape<double> tape;
  const Var a = tape.parameter(w, true);
  const Var y = mul(tape, a, a);  // d/dw w^2 = 2w
  tape.backward(sum(tape, y));
  CHECK(w.grad[0] == doctest::Approx(6.0));
  Tape<double> frozen;
  const Var b = frozen.parameter(static_cast<const Parameter<double>&>(w));
  CHECK_FALSE(frozen.requires_grad(b));
}

TEST_CASE("adam matches the bias-corrected update") {
  ParamList<double> params;
  params.add("x", {2});
  params[0].value = Tensor<double>({2}, {1.0, -2.0});
  Adam<double> opt(params, {0.1});
  // Minimize x^2 by hand-fed gradients.
  double m[2] = {0, 0}, v[2] = {0, 0}, ref[2] = {1.0, -2.0};
  for (int t = 1; t <= 5; ++t) {
    params.zero_grad();
    for (int i = 0; i < 2; ++i) params[0].grad[i] = 2 * params[0].value[i];
    opt.step(params);
    for (int i = 0; i < 2; ++i) {
      const double g = 2 * ref[i];
      m[i] = 0.9 * m[i] + 0.1 * g;
      v[i] = 0.999 * v[i] + 0.001 * g * g;
      const double mh = m[i] / (1 - std::pow(0.9, t)), vh = v[i] / (1 - std::pow(0.999, t));
      ref[i] -= 0.1 * mh / (std::sqrt(vh) + 1e-8);
      CHECK(params[0].value[i] == doctest::Approx(ref[i]).epsilon(1e-12));
    }
  }
  CHECK(opt.steps() == 5);
  // First step moves each coordinate by lr regardless of gradient scale.
  ParamList<double> p2;
  p2.add("y", {1});
  Adam<double> o2(p2, {0.01});
  p2[0].grad[0] = 1234.0;
  o2.step(p2);
  CHECK(p2[0].value[0] == doctest::Approx(-0.01).epsilon(1e-6));
  p2.add("z", {1});
  CHECK_THROWS_AS(o2.step(p2), ShapeError);
}

TEST_CASE("checkpoint round trip and corruption") {
  ParamList<float> params;
  params.add("w", {2, 3});
  params.add("b", {3});
  Rng rng(3);
  for (auto& p : params)
    for (float& v : p.value.values()) v = static_cast<float>(rng.uniform(-1, 1));
  Checkpoint ck;
  ck.tag = 7;
  append_params(ck, "net.", params);
  const auto dir = std::filesystem::temp_directory_path() / "celldeploy_ckpt";
  std::filesystem::create_directories(dir);
  write_checkpoint(dir / "a.ckpt", ck);
  const Checkpoint back = read_checkpoint(dir / "a.ckpt");
  CHECK(back.tag == 7);
  REQUIRE(back.entries.size() == 2);
  CHECK(back.entries[0].first == "net.w");

  ParamList<float> restored;
  restored.add("w", {2, 3});
  restored.add("b", {3});
  restore_params(back, "net.", restored);
  CHECK(restored == params);

  ParamList<float> wrong;
  wrong.add("w", {3, 2});
  CHECK_THROWS_AS(restore_params(back, "net.", wrong), ShapeError);
  ParamList<float> missing;
  missing.add("q", {1});
  CHECK_THROWS_AS(restore_params(back, "net.", missing), ShapeError);

  std::ifstream in(dir / "a.ckpt", std::ios::binary);
  std::string bytes((std::istreambuf_iterator<char>(in)), {});
  CHECK(bytes.substr(0, 4) == "CDCK");
  std::ofstream(dir / "short.ckpt", std::ios::binary) << bytes.substr(0, bytes.size() - 3);
  CHECK_THROWS_AS(read_checkpoint(dir / "short.ckpt"), ParseError);
  std::ofstream(dir / "magic.ckpt", std::ios::binary) << "XXXX" << bytes.substr(4);
  CHECK_THROWS_AS(read_checkpoint(dir / "magic.ckpt"), ParseError);
  std::ofstream(dir / "tail.ckpt", std::ios::binary) << bytes << "!";
  CHECK_THROWS_AS(read_checkpoint(dir / "tail.ckpt"), ParseError);
  std::filesystem::remove_all(dir);
}
