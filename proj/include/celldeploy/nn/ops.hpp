#pragma once

#include <span>
#include <vector>

#include "celldeploy/nn/tape.hpp"

namespace celldeploy::nn {

// Every op validates shapes (ShapeError names the shapes involved), records
// its result on the tape and raises NonFiniteError on NaN/Inf output.

/// x [B, in], w [out, in], b [out] (optional) -> [B, out]
template <typename T>
Var dense(Tape<T>& tape, Var x, Var w, Var b);

/// x [N, C, H, W], w [F, C, kh, kw], b [F]; zero padding on all sides.
template <typename T>
Var conv2d(Tape<T>& tape, Var x, Var w, Var b, int stride, int padding);

/// Window i spans [floor(i*H/out), ceil((i+1)*H/out)) in each spatial axis.
template <typename T>
Var adaptive_avg_pool2d(Tape<T>& tape, Var x, int out_h, int out_w);

template <typename T>
Var relu(Tape<T>& tape, Var x);
template <typename T>
Var tanh(Tape<T>& tape, Var x);

template <typename T>
Var add(Tape<T>& tape, Var a, Var b);
template <typename T>
Var sub(Tape<T>& tape, Var a, Var b);
template <typename T>
Var mul(Tape<T>& tape, Var a, Var b);
template <typename T>
Var scale(Tape<T>& tape, Var a, T factor);
template <typename T>
Var square(Tape<T>& tape, Var a);
/// Sum of all elements, shape [1].
template <typename T>
Var sum(Tape<T>& tape, Var a);
template <typename T>
Var mean(Tape<T>& tape, Var a);

template <typename T>
Var reshape(Tape<T>& tape, Var a, Shape shape);
/// [N, ...] -> [N, rest]
template <typename T>
Var flatten(Tape<T>& tape, Var a);
/// [B, m] ++ [B, n] -> [B, m + n]
template <typename T>
Var concat_cols(Tape<T>& tape, Var a, Var b);
/// Each input [1, D] or [D]; result [rows, D].
template <typename T>
Var stack_rows(Tape<T>& tape, const std::vector<Var>& rows);
template <typename T>
Var slice_rows(Tape<T>& tape, Var x, int start, int count);

/// table [V, D], ids in [0, V) -> [len(ids), D]
template <typename T>
Var embedding(Tape<T>& tape, Var table, std::span<const int> ids);

/// Normalizes each row of x [R, D] over D, then applies gamma/beta [D].
template <typename T>
Var layernorm(Tape<T>& tape, Var x, Var gamma, Var beta, T eps = T(1e-5));

struct AttentionParams {
  Var wq, bq, wk, bk, wv, bv, wo, bo;  // w* [D, D], b* [D]
};

/// Scaled dot-product self attention over x [L, D] with `heads` heads.
/// Only the first n_query rows are used as queries; result [n_query, D].
template <typename T>
Var multihead_attention(Tape<T>& tape, Var x, const AttentionParams& p, int heads, int n_query);

/// Attention probabilities [heads, n_query, L] for the same inputs; the op
/// above uses the identical computation.
template <typename T>
Tensor<T> attention_probabilities(const Tensor<T>& x, const Tensor<T>& wq, const Tensor<T>& bq,
                                  const Tensor<T>& wk, const Tensor<T>& bk, int heads, int n_query);

}  // namespace celldeploy::nn
