#include "celldeploy/nn/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>

#include <Eigen/Dense>

#include "celldeploy/errors.hpp"

namespace celldeploy::nn {

namespace {

template <typename T>
using MatR = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapR = Eigen::Map<MatR<T>>;
template <typename T>
using CMapR = Eigen::Map<const MatR<T>>;
template <typename T>
using VecMap = Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, 1>>;
template <typename T>
using CVecMap = Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>>;

template <typename T>
CMapR<T> cmat(const Tensor<T>& t, int rows, int cols) {
  return CMapR<T>(t.data(), rows, cols);
}
template <typename T>
MapR<T> mat(Tensor<T>& t, int rows, int cols) {
  return MapR<T>(t.data(), rows, cols);
}

[[noreturn]] void shape_fail(const char* op, const std::string& what) { throw ShapeError(std::string(op) + ": " + what); }

std::string two(const Shape& a, const Shape& b) { return shape_str(a) + " vs " + shape_str(b); }

template <typename T>
void add_into(Tensor<T>& dst, const Tensor<T>& src) {
  T* d = dst.data();
  const T* s = src.data();
  for (std::size_t i = 0; i < dst.size(); ++i) d[i] += s[i];
}

template <typename T>
Var elementwise_unary(Tape<T>& tape, Var x, const char* op, T (*fwd)(T), T (*dfdy)(T, T)) {
  const Tensor<T>& xv = tape.value(x);
  Tensor<T> y(xv.shape());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = fwd(xv[i]);
  return tape.record(std::move(y), {x},
                     [x, dfdy](Tape<T>& t, int self) {
                       if (!t.requires_grad(x.id)) return;
                       const Tensor<T>& g = t.grad_buffer(self);
                       const Tensor<T>& xin = t.value(x.id);
                       const Tensor<T>& yout = t.value(self);
                       Tensor<T>& dx = t.grad_buffer(x.id);
                       for (std::size_t i = 0; i < g.size(); ++i) dx[i] += g[i] * dfdy(xin[i], yout[i]);
                     },
                     op);
}

template <typename T>
struct AttentionCache {
  // Per head, contiguous: scaled queries [nq, dh], keys and values [L, dh],
  // probabilities [nq, L].
  std::vector<MatR<T>> q, k, v, p;
  MatR<T> o;  // concatenated head outputs [nq, D]
};

template <typename T>
void attention_core(const Tensor<T>& x, const Tensor<T>& wq, const Tensor<T>& bq, const Tensor<T>& wk,
                    const Tensor<T>& bk, const Tensor<T>* wv, const Tensor<T>* bv, int heads, int nq,
                    AttentionCache<T>& c) {
  const int L = x.dim(0);
  const int D = x.dim(1);
  const int dh = D / heads;
  const auto X = cmat(x, L, D);
  const T inv_sqrt = T(1) / std::sqrt(static_cast<T>(dh));
  MatR<T> q = X.topRows(nq) * cmat(wq, D, D).transpose();
  q.rowwise() += CVecMap<T>(bq.data(), D).transpose();
  MatR<T> k = X * cmat(wk, D, D).transpose();
  k.rowwise() += CVecMap<T>(bk.data(), D).transpose();
  MatR<T> v;
  if (wv) {
    v = X * cmat(*wv, D, D).transpose();
    v.rowwise() += CVecMap<T>(bv->data(), D).transpose();
    c.o.resize(nq, D);
  }
  const auto n = static_cast<std::size_t>(heads);
  c.q.resize(n);
  c.k.resize(n);
  c.v.resize(n);
  c.p.resize(n);
  for (std::size_t h = 0; h < n; ++h) {
    const int col = static_cast<int>(h) * dh;
    c.q[h] = q.middleCols(col, dh) * inv_sqrt;
    c.k[h] = k.middleCols(col, dh);
    MatR<T>& s = c.p[h];
    s.noalias() = c.q[h] * c.k[h].transpose();
    for (int r = 0; r < nq; ++r) {
      auto row = s.row(r);
      const T m = row.maxCoeff();
      row = (row.array() - m).exp();
      row /= row.sum();
    }
    if (wv) {
      c.v[h] = v.middleCols(col, dh);
      c.o.middleCols(col, dh).noalias() = s * c.v[h];
    }
  }
}

}  // namespace

// ---- dense ----------------------------------------------------------------

template <typename T>
Var dense(Tape<T>& tape, Var x, Var w, Var b) {
  const Tensor<T>& xv = tape.value(x);
  const Tensor<T>& wv = tape.value(w);
  if (xv.rank() != 2 || wv.rank() != 2 || xv.dim(1) != wv.dim(1))
    shape_fail("dense", "input " + shape_str(xv.shape()) + " incompatible with weight " + shape_str(wv.shape()));
  const int B = xv.dim(0), in = xv.dim(1), out = wv.dim(0);
  if (b.valid() && tape.value(b).shape() != Shape{out})
    shape_fail("dense", "bias " + shape_str(tape.value(b).shape()) + " for weight " + shape_str(wv.shape()));

  Tensor<T> y({B, out});
  auto Y = mat(y, B, out);
  Y.noalias() = cmat(xv, B, in) * cmat(wv, out, in).transpose();
  if (b.valid()) Y.rowwise() += CVecMap<T>(tape.value(b).data(), out).transpose();

  return tape.record(std::move(y), {x, w, b},
                     [x, w, b, B, in, out](Tape<T>& t, int self) {
                       const auto G = cmat(t.grad_buffer(self), B, out);
                       if (t.requires_grad(x.id))
                         mat(t.grad_buffer(x.id), B, in).noalias() += G * cmat(t.value(w.id), out, in);
                       if (t.requires_grad(w.id))
                         mat(t.grad_buffer(w.id), out, in).noalias() += G.transpose() * cmat(t.value(x.id), B, in);
                       if (b.valid() && t.requires_grad(b.id))
                         VecMap<T>(t.grad_buffer(b.id).data(), out) += G.colwise().sum().transpose();
                     },
                     "dense");
}

// ---- conv2d ---------------------------------------------------------------

template <typename T>
Var conv2d(Tape<T>& tape, Var x, Var w, Var b, int stride, int padding) {
  const Tensor<T>& xv = tape.value(x);
  const Tensor<T>& wv = tape.value(w);
  if (xv.rank() != 4 || wv.rank() != 4 || xv.dim(1) != wv.dim(1))
    shape_fail("conv2d", "input " + shape_str(xv.shape()) + " incompatible with kernel " + shape_str(wv.shape()));
  if (stride < 1 || padding < 0) shape_fail("conv2d", "stride must be >= 1 and padding >= 0");
  const int N = xv.dim(0), C = xv.dim(1), H = xv.dim(2), W = xv.dim(3);
  const int F = wv.dim(0), KH = wv.dim(2), KW = wv.dim(3);
  const int Ho = (H + 2 * padding - KH) / stride + 1;
  const int Wo = (W + 2 * padding - KW) / stride + 1;
  if (H + 2 * padding < KH || W + 2 * padding < KW || Ho < 1 || Wo < 1)
    shape_fail("conv2d", "kernel " + shape_str(wv.shape()) + " larger than padded input " + shape_str(xv.shape()));
  if (b.valid() && tape.value(b).shape() != Shape{F})
    shape_fail("conv2d", "bias " + shape_str(tape.value(b).shape()) + " for kernel " + shape_str(wv.shape()));

  const int K = C * KH * KW;
  const int P = Ho * Wo;
  auto cols = std::make_shared<AlignedVector<T>>(static_cast<std::size_t>(N) * K * P, T(0));
  for (int n = 0; n < N; ++n) {
    T* cn = cols->data() + static_cast<std::size_t>(n) * K * P;
    const T* xn = xv.data() + static_cast<std::size_t>(n) * C * H * W;
    for (int c = 0; c < C; ++c)
      for (int i = 0; i < KH; ++i)
        for (int j = 0; j < KW; ++j) {
          T* row = cn + static_cast<std::size_t>((c * KH + i) * KW + j) * P;
          for (int oh = 0; oh < Ho; ++oh) {
            const int ih = oh * stride - padding + i;
            if (ih < 0 || ih >= H) continue;
            const T* xrow = xn + (static_cast<std::size_t>(c) * H + ih) * W;
            for (int ow = 0; ow < Wo; ++ow) {
              const int iw = ow * stride - padding + j;
              if (iw >= 0 && iw < W) row[oh * Wo + ow] = xrow[iw];
            }
          }
        }
  }

  Tensor<T> y({N, F, Ho, Wo});
  const auto Wm = cmat(wv, F, K);
  for (int n = 0; n < N; ++n) {
    MapR<T> Yn(y.data() + static_cast<std::size_t>(n) * F * P, F, P);
    Yn.noalias() = Wm * CMapR<T>(cols->data() + static_cast<std::size_t>(n) * K * P, K, P);
    if (b.valid()) Yn.colwise() += CVecMap<T>(tape.value(b).data(), F);
  }

  return tape.record(
      std::move(y), {x, w, b},
      [=](Tape<T>& t, int self) {
        const Tensor<T>& g = t.grad_buffer(self);
        const auto Wm2 = cmat(t.value(w.id), F, K);
        const bool need_x = t.requires_grad(x.id);
        MatR<T> dcols;
        for (int n = 0; n < N; ++n) {
          CMapR<T> Gn(g.data() + static_cast<std::size_t>(n) * F * P, F, P);
          CMapR<T> Cn(cols->data() + static_cast<std::size_t>(n) * K * P, K, P);
          if (t.requires_grad(w.id)) mat(t.grad_buffer(w.id), F, K).noalias() += Gn * Cn.transpose();
          if (b.valid() && t.requires_grad(b.id)) VecMap<T>(t.grad_buffer(b.id).data(), F) += Gn.rowwise().sum();
          if (!need_x) continue;
          dcols.noalias() = Wm2.transpose() * Gn;
          T* dxn = t.grad_buffer(x.id).data() + static_cast<std::size_t>(n) * C * H * W;
          for (int c = 0; c < C; ++c)
            for (int i = 0; i < KH; ++i)
              for (int j = 0; j < KW; ++j) {
                const T* row = dcols.data() + static_cast<std::size_t>((c * KH + i) * KW + j) * P;
                for (int oh = 0; oh < Ho; ++oh) {
                  const int ih = oh * stride - padding + i;
                  if (ih < 0 || ih >= H) continue;
                  T* dxrow = dxn + (static_cast<std::size_t>(c) * H + ih) * W;
                  for (int ow = 0; ow < Wo; ++ow) {
                    const int iw = ow * stride - padding + j;
                    if (iw >= 0 && iw < W) dxrow[iw] += row[oh * Wo + ow];
                  }
                }
              }
        }
      },
      "conv2d");
}

// ---- adaptive average pooling ---------------------------------------------

template <typename T>
Var adaptive_avg_pool2d(Tape<T>& tape, Var x, int out_h, int out_w) {
  const Tensor<T>& xv = tape.value(x);
  if (xv.rank() != 4 || out_h < 1 || out_w < 1)
    shape_fail("adaptive_avg_pool2d", "input " + shape_str(xv.shape()) + " with target " + shape_str({out_h, out_w}));
  const int N = xv.dim(0), C = xv.dim(1), H = xv.dim(2), W = xv.dim(3);
  const auto lo = [](int i, int in, int out) { return (i * in) / out; };
  const auto hi = [](int i, int in, int out) { return ((i + 1) * in + out - 1) / out; };

  Tensor<T> y({N, C, out_h, out_w});
  for (int nc = 0; nc < N * C; ++nc) {
    const T* xp = xv.data() + static_cast<std::size_t>(nc) * H * W;
    T* yp = y.data() + static_cast<std::size_t>(nc) * out_h * out_w;
    for (int i = 0; i < out_h; ++i)
      for (int j = 0; j < out_w; ++j) {
        const int h0 = lo(i, H, out_h), h1 = hi(i, H, out_h), w0 = lo(j, W, out_w), w1 = hi(j, W, out_w);
        T acc = 0;
        for (int h = h0; h < h1; ++h)
          for (int ww = w0; ww < w1; ++ww) acc += xp[h * W + ww];
        yp[i * out_w + j] = acc / static_cast<T>((h1 - h0) * (w1 - w0));
      }
  }
  return tape.record(std::move(y), {x},
                     [=](Tape<T>& t, int self) {
                       if (!t.requires_grad(x.id)) return;
                       const Tensor<T>& g = t.grad_buffer(self);
                       Tensor<T>& dx = t.grad_buffer(x.id);
                       for (int nc = 0; nc < N * C; ++nc) {
                         T* dxp = dx.data() + static_cast<std::size_t>(nc) * H * W;
                         const T* gp = g.data() + static_cast<std::size_t>(nc) * out_h * out_w;
                         for (int i = 0; i < out_h; ++i)
                           for (int j = 0; j < out_w; ++j) {
                             const int h0 = lo(i, H, out_h), h1 = hi(i, H, out_h), w0 = lo(j, W, out_w),
                                       w1 = hi(j, W, out_w);
                             const T share = gp[i * out_w + j] / static_cast<T>((h1 - h0) * (w1 - w0));
                             for (int h = h0; h < h1; ++h)
                               for (int ww = w0; ww < w1; ++ww) dxp[h * W + ww] += share;
                           }
                       }
                     },
                     "adaptive_avg_pool2d");
}

// ---- elementwise ----------------------------------------------------------

template <typename T>
Var relu(Tape<T>& tape, Var x) {
  return elementwise_unary<T>(
      tape, x, "relu", +[](T v) { return v > T(0) ? v : T(0); }, +[](T v, T) { return v > T(0) ? T(1) : T(0); });
}

template <typename T>
Var tanh(Tape<T>& tape, Var x) {
  return elementwise_unary<T>(
      tape, x, "tanh",
      +[](T v) {
        // Saturation would round to +-1; stay inside the open interval.
        constexpr T kEdge = T(1) - std::numeric_limits<T>::epsilon() / 2;
        return std::clamp(std::tanh(v), -kEdge, kEdge);
      },
      +[](T, T y) { return T(1) - y * y; });
}

template <typename T>
Var square(Tape<T>& tape, Var x) {
  return elementwise_unary<T>(
      tape, x, "square", +[](T v) { return v * v; }, +[](T v, T) { return T(2) * v; });
}

template <typename T>
Var scale(Tape<T>& tape, Var a, T factor) {
  const Tensor<T>& av = tape.value(a);
  Tensor<T> y(av.shape());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = av[i] * factor;
  return tape.record(std::move(y), {a},
                     [a, factor](Tape<T>& t, int self) {
                       if (!t.requires_grad(a.id)) return;
                       const Tensor<T>& g = t.grad_buffer(self);
                       Tensor<T>& da = t.grad_buffer(a.id);
                       for (std::size_t i = 0; i < g.size(); ++i) da[i] += g[i] * factor;
                     },
                     "scale");
}

namespace {
template <typename T>
Var binary(Tape<T>& tape, Var a, Var b, const char* op, int kind) {
  const Tensor<T>& av = tape.value(a);
  const Tensor<T>& bv = tape.value(b);
  if (av.shape() != bv.shape()) shape_fail(op, two(av.shape(), bv.shape()));
  Tensor<T> y(av.shape());
  for (std::size_t i = 0; i < y.size(); ++i)
    y[i] = kind == 0 ? av[i] + bv[i] : kind == 1 ? av[i] - bv[i] : av[i] * bv[i];
  return tape.record(std::move(y), {a, b},
                     [a, b, kind](Tape<T>& t, int self) {
                       const Tensor<T>& g = t.grad_buffer(self);
                       if (t.requires_grad(a.id)) {
                         Tensor<T>& da = t.grad_buffer(a.id);
                         const Tensor<T>& bval = t.value(b.id);
                         for (std::size_t i = 0; i < g.size(); ++i) da[i] += kind == 2 ? g[i] * bval[i] : g[i];
                       }
                       if (t.requires_grad(b.id)) {
                         Tensor<T>& db = t.grad_buffer(b.id);
                         const Tensor<T>& aval = t.value(a.id);
                         for (std::size_t i = 0; i < g.size(); ++i)
                           db[i] += kind == 0 ? g[i] : kind == 1 ? -g[i] : g[i] * aval[i];
                       }
                     },
                     op);
}
}  // namespace

template <typename T>
Var add(Tape<T>& tape, Var a, Var b) {
  return binary(tape, a, b, "add", 0);
}
template <typename T>
Var sub(Tape<T>& tape, Var a, Var b) {
  return binary(tape, a, b, "sub", 1);
}
template <typename T>
Var mul(Tape<T>& tape, Var a, Var b) {
  return binary(tape, a, b, "mul", 2);
}

template <typename T>
Var sum(Tape<T>& tape, Var a) {
  const Tensor<T>& av = tape.value(a);
  T acc = 0;
  for (T v : av.values()) acc += v;
  return tape.record(Tensor<T>({1}, acc), {a},
                     [a](Tape<T>& t, int self) {
                       if (!t.requires_grad(a.id)) return;
                       const T g = t.grad_buffer(self)[0];
                       Tensor<T>& da = t.grad_buffer(a.id);
                       for (std::size_t i = 0; i < da.size(); ++i) da[i] += g;
                     },
                     "sum");
}

template <typename T>
Var mean(Tape<T>& tape, Var a) {
  const std::size_t n = tape.value(a).size();
  if (n == 0) shape_fail("mean", "empty input");
  return scale(tape, sum(tape, a), T(1) / static_cast<T>(n));
}

// ---- shape ops ------------------------------------------------------------

template <typename T>
Var reshape(Tape<T>& tape, Var a, Shape shape) {
  Tensor<T> y = tape.value(a);
  try {
    y.reshape(shape);
  } catch (const ShapeError&) {
    shape_fail("reshape", two(tape.value(a).shape(), shape));
  }
  return tape.record(std::move(y), {a},
                     [a](Tape<T>& t, int self) {
                       if (!t.requires_grad(a.id)) return;
                       add_into(t.grad_buffer(a.id), t.grad_buffer(self));
                     },
                     "reshape");
}

template <typename T>
Var flatten(Tape<T>& tape, Var a) {
  const Tensor<T>& av = tape.value(a);
  if (av.rank() < 1) shape_fail("flatten", "scalar input " + shape_str(av.shape()));
  const int n = av.dim(0);
  return reshape(tape, a, {n, n == 0 ? 0 : static_cast<int>(av.size() / static_cast<std::size_t>(n))});
}

template <typename T>
Var concat_cols(Tape<T>& tape, Var a, Var b) {
  const Tensor<T>& av = tape.value(a);
  const Tensor<T>& bv = tape.value(b);
  if (av.rank() != 2 || bv.rank() != 2 || av.dim(0) != bv.dim(0))
    shape_fail("concat_cols", two(av.shape(), bv.shape()));
  const int B = av.dim(0), m = av.dim(1), n = bv.dim(1);
  Tensor<T> y({B, m + n});
  auto Y = mat(y, B, m + n);
  Y.leftCols(m) = cmat(av, B, m);
  Y.rightCols(n) = cmat(bv, B, n);
  return tape.record(std::move(y), {a, b},
                     [a, b, B, m, n](Tape<T>& t, int self) {
                       const auto G = cmat(t.grad_buffer(self), B, m + n);
                       if (t.requires_grad(a.id)) mat(t.grad_buffer(a.id), B, m) += G.leftCols(m);
                       if (t.requires_grad(b.id)) mat(t.grad_buffer(b.id), B, n) += G.rightCols(n);
                     },
                     "concat_cols");
}

template <typename T>
Var stack_rows(Tape<T>& tape, const std::vector<Var>& rows) {
  if (rows.empty()) shape_fail("stack_rows", "no inputs");
  const Shape first = tape.value(rows[0]).shape();
  const std::size_t D = tape.value(rows[0]).size();
  for (Var r : rows) {
    const Tensor<T>& rv = tape.value(r);
    if (rv.size() != D || rv.rank() > 2 || (rv.rank() == 2 && rv.dim(0) != 1))
      shape_fail("stack_rows", two(first, rv.shape()));
  }
  Tensor<T> y({static_cast<int>(rows.size()), static_cast<int>(D)});
  for (std::size_t i = 0; i < rows.size(); ++i)
    std::copy_n(tape.value(rows[i]).data(), D, y.data() + i * D);
  return tape.record(std::move(y), rows,
                     [rows, D](Tape<T>& t, int self) {
                       const Tensor<T>& g = t.grad_buffer(self);
                       for (std::size_t i = 0; i < rows.size(); ++i) {
                         if (!t.requires_grad(rows[i].id)) continue;
                         T* d = t.grad_buffer(rows[i].id).data();
                         for (std::size_t k = 0; k < D; ++k) d[k] += g[i * D + k];
                       }
                     },
                     "stack_rows");
}

template <typename T>
Var slice_rows(Tape<T>& tape, Var x, int start, int count) {
  const Tensor<T>& xv = tape.value(x);
  if (xv.rank() != 2 || start < 0 || count < 1 || start + count > xv.dim(0))
    shape_fail("slice_rows", "rows [" + std::to_string(start) + ", " + std::to_string(start + count) + ") of " +
                                 shape_str(xv.shape()));
  const int D = xv.dim(1);
  Tensor<T> y({count, D});
  std::copy_n(xv.data() + static_cast<std::size_t>(start) * D, static_cast<std::size_t>(count) * D, y.data());
  return tape.record(std::move(y), {x},
                     [x, start, count, D](Tape<T>& t, int self) {
                       if (!t.requires_grad(x.id)) return;
                       const Tensor<T>& g = t.grad_buffer(self);
                       T* d = t.grad_buffer(x.id).data() + static_cast<std::size_t>(start) * D;
                       for (std::size_t k = 0; k < static_cast<std::size_t>(count) * D; ++k) d[k] += g[k];
                     },
                     "slice_rows");
}

// ---- embedding ------------------------------------------------------------

template <typename T>
Var embedding(Tape<T>& tape, Var table, std::span<const int> ids) {
  const Tensor<T>& tv = tape.value(table);
  if (tv.rank() != 2) shape_fail("embedding", "table " + shape_str(tv.shape()));
  const int V = tv.dim(0), D = tv.dim(1);
  const int L = static_cast<int>(ids.size());
  Tensor<T> y({L, D});
  for (int i = 0; i < L; ++i) {
    if (ids[i] < 0 || ids[i] >= V)
      shape_fail("embedding", "id " + std::to_string(ids[i]) + " outside table " + shape_str(tv.shape()));
    std::copy_n(tv.data() + static_cast<std::size_t>(ids[i]) * D, D, y.data() + static_cast<std::size_t>(i) * D);
  }
  std::vector<int> idv(ids.begin(), ids.end());
  return tape.record(std::move(y), {table},
                     [table, idv = std::move(idv), D](Tape<T>& t, int self) {
                       if (!t.requires_grad(table.id)) return;
                       const Tensor<T>& g = t.grad_buffer(self);
                       T* d = t.grad_buffer(table.id).data();
                       for (std::size_t i = 0; i < idv.size(); ++i)
                         for (int k = 0; k < D; ++k) d[static_cast<std::size_t>(idv[i]) * D + k] += g[i * D + k];
                     },
                     "embedding");
}

// ---- layer norm -----------------------------------------------------------

template <typename T>
Var layernorm(Tape<T>& tape, Var x, Var gamma, Var beta, T eps) {
  const Tensor<T>& xv = tape.value(x);
  if (xv.rank() != 2) shape_fail("layernorm", "input " + shape_str(xv.shape()));
  const int R = xv.dim(0), D = xv.dim(1);
  if (tape.value(gamma).shape() != Shape{D} || tape.value(beta).shape() != Shape{D})
    shape_fail("layernorm", "input " + shape_str(xv.shape()) + " with gamma " + shape_str(tape.value(gamma).shape()));

  auto xhat = std::make_shared<Tensor<T>>(xv.shape());
  auto inv_std = std::make_shared<std::vector<T>>(static_cast<std::size_t>(R));
  Tensor<T> y(xv.shape());
  const Tensor<T>& g = tape.value(gamma);
  const Tensor<T>& bt = tape.value(beta);
  for (int r = 0; r < R; ++r) {
    const T* xr = xv.data() + static_cast<std::size_t>(r) * D;
    T mu = 0;
    for (int k = 0; k < D; ++k) mu += xr[k];
    mu /= D;
    T var = 0;
    for (int k = 0; k < D; ++k) var += (xr[k] - mu) * (xr[k] - mu);
    var /= D;
    const T is = T(1) / std::sqrt(var + eps);
    (*inv_std)[static_cast<std::size_t>(r)] = is;
    for (int k = 0; k < D; ++k) {
      const T h = (xr[k] - mu) * is;
      (*xhat)[static_cast<std::size_t>(r) * D + k] = h;
      y[static_cast<std::size_t>(r) * D + k] = g[static_cast<std::size_t>(k)] * h + bt[static_cast<std::size_t>(k)];
    }
  }
  return tape.record(std::move(y), {x, gamma, beta},
                     [=](Tape<T>& t, int self) {
                       const Tensor<T>& gy = t.grad_buffer(self);
                       const Tensor<T>& gam = t.value(gamma.id);
                       if (t.requires_grad(gamma.id) || t.requires_grad(beta.id)) {
                         for (int r = 0; r < R; ++r)
                           for (int k = 0; k < D; ++k) {
                             const std::size_t i = static_cast<std::size_t>(r) * D + k;
                             if (t.requires_grad(gamma.id)) t.grad_buffer(gamma.id)[k] += gy[i] * (*xhat)[i];
                             if (t.requires_grad(beta.id)) t.grad_buffer(beta.id)[k] += gy[i];
                           }
                       }
                       if (!t.requires_grad(x.id)) return;
                       Tensor<T>& dx = t.grad_buffer(x.id);
                       for (int r = 0; r < R; ++r) {
                         T m1 = 0, m2 = 0;
                         for (int k = 0; k < D; ++k) {
                           const std::size_t i = static_cast<std::size_t>(r) * D + k;
                           const T dh = gy[i] * gam[static_cast<std::size_t>(k)];
                           m1 += dh;
                           m2 += dh * (*xhat)[i];
                         }
                         m1 /= D;
                         m2 /= D;
                         const T is = (*inv_std)[static_cast<std::size_t>(r)];
                         for (int k = 0; k < D; ++k) {
                           const std::size_t i = static_cast<std::size_t>(r) * D + k;
                           const T dh = gy[i] * gam[static_cast<std::size_t>(k)];
                           dx[i] += is * (dh - m1 - (*xhat)[i] * m2);
                         }
                       }
                     },
                     "layernorm");
}

// ---- multi-head attention -------------------------------------------------

template <typename T>
Tensor<T> attention_probabilities(const Tensor<T>& x, const Tensor<T>& wq, const Tensor<T>& bq, const Tensor<T>& wk,
                                  const Tensor<T>& bk, int heads, int n_query) {
  AttentionCache<T> c;
  attention_core<T>(x, wq, bq, wk, bk, nullptr, nullptr, heads, n_query, c);
  const int L = x.dim(0);
  Tensor<T> out({heads, n_query, L});
  for (int h = 0; h < heads; ++h)
    std::copy_n(c.p[static_cast<std::size_t>(h)].data(), static_cast<std::size_t>(n_query) * L,
                out.data() + static_cast<std::size_t>(h) * n_query * L);
  return out;
}

template <typename T>
Var multihead_attention(Tape<T>& tape, Var x, const AttentionParams& p, int heads, int n_query) {
  const Tensor<T>& xv = tape.value(x);
  if (xv.rank() != 2) shape_fail("multihead_attention", "input " + shape_str(xv.shape()));
  const int L = xv.dim(0), D = xv.dim(1);
  if (heads < 1 || D % heads != 0)
    shape_fail("multihead_attention", "model dim " + std::to_string(D) + " not divisible by " + std::to_string(heads) + " heads");
  if (n_query < 1 || n_query > L) shape_fail("multihead_attention", "n_query out of range for " + shape_str(xv.shape()));
  for (Var wv : {p.wq, p.wk, p.wv, p.wo})
    if (tape.value(wv).shape() != Shape{D, D})
      shape_fail("multihead_attention", "input " + shape_str(xv.shape()) + " with projection " + shape_str(tape.value(wv).shape()));
  for (Var bv : {p.bq, p.bk, p.bv, p.bo})
    if (tape.value(bv).shape() != Shape{D})
      shape_fail("multihead_attention", "input " + shape_str(xv.shape()) + " with bias " + shape_str(tape.value(bv).shape()));

  auto c = std::make_shared<AttentionCache<T>>();
  attention_core<T>(xv, tape.value(p.wq), tape.value(p.bq), tape.value(p.wk), tape.value(p.bk), &tape.value(p.wv),
                    &tape.value(p.bv), heads, n_query, *c);
  Tensor<T> y({n_query, D});
  auto Y = mat(y, n_query, D);
  Y.noalias() = c->o * cmat(tape.value(p.wo), D, D).transpose();
  Y.rowwise() += CVecMap<T>(tape.value(p.bo).data(), D).transpose();

  const int dh = D / heads;
  return tape.record(
      std::move(y), {x, p.wq, p.bq, p.wk, p.bk, p.wv, p.bv, p.wo, p.bo},
      [=](Tape<T>& t, int self) {
        const auto G = cmat(t.grad_buffer(self), n_query, D);
        const auto X = cmat(t.value(x.id), L, D);
        const auto req = [&](Var v) { return t.requires_grad(v.id); };
        if (req(p.wo)) mat(t.grad_buffer(p.wo.id), D, D).noalias() += G.transpose() * c->o;
        if (req(p.bo)) VecMap<T>(t.grad_buffer(p.bo.id).data(), D) += G.colwise().sum().transpose();
        const MatR<T> dO = G * cmat(t.value(p.wo.id), D, D);

        MatR<T> dQ(n_query, D), dK(L, D), dV(L, D);
        const T inv_sqrt = T(1) / std::sqrt(static_cast<T>(dh));
        MatR<T> dOh, dS, tmp;
        for (int h = 0; h < heads; ++h) {
          const auto hi = static_cast<std::size_t>(h);
          const MatR<T>& P = c->p[hi];
          dOh = dO.middleCols(h * dh, dh);
          dS.noalias() = dOh * c->v[hi].transpose();
          tmp.noalias() = P.transpose() * dOh;
          dV.middleCols(h * dh, dh) = tmp;
          for (int r = 0; r < n_query; ++r) {
            auto ds = dS.row(r).array();
            const auto pr = P.row(r).array();
            const T rs = (ds * pr).sum();
            ds = pr * (ds - rs);
          }
          tmp.noalias() = dS * c->k[hi];
          dQ.middleCols(h * dh, dh) = tmp * inv_sqrt;
          tmp.noalias() = dS.transpose() * c->q[hi];
          dK.middleCols(h * dh, dh) = tmp;
        }
        if (req(p.wq)) mat(t.grad_buffer(p.wq.id), D, D).noalias() += dQ.transpose() * X.topRows(n_query);
        if (req(p.bq)) VecMap<T>(t.grad_buffer(p.bq.id).data(), D) += dQ.colwise().sum().transpose();
        if (req(p.wk)) mat(t.grad_buffer(p.wk.id), D, D).noalias() += dK.transpose() * X;
        if (req(p.bk)) VecMap<T>(t.grad_buffer(p.bk.id).data(), D) += dK.colwise().sum().transpose();
        if (req(p.wv)) mat(t.grad_buffer(p.wv.id), D, D).noalias() += dV.transpose() * X;
        if (req(p.bv)) VecMap<T>(t.grad_buffer(p.bv.id).data(), D) += dV.colwise().sum().transpose();
        if (req(x)) {
          auto dX = mat(t.grad_buffer(x.id), L, D);
          dX.noalias() += dK * cmat(t.value(p.wk.id), D, D);
          dX.noalias() += dV * cmat(t.value(p.wv.id), D, D);
          dX.topRows(n_query).noalias() += dQ * cmat(t.value(p.wq.id), D, D);
        }
      },
      "multihead_attention");
}

// ---- instantiations -------------------------------------------------------

#define CELLDEPLOY_INSTANTIATE_OPS(T)                                                                   \
  template Var dense<T>(Tape<T>&, Var, Var, Var);                                                      \
  template Var conv2d<T>(Tape<T>&, Var, Var, Var, int, int);                                           \
  template Var adaptive_avg_pool2d<T>(Tape<T>&, Var, int, int);                                        \
  template Var relu<T>(Tape<T>&, Var);                                                                 \
  template Var tanh<T>(Tape<T>&, Var);                                                                 \
  template Var add<T>(Tape<T>&, Var, Var);                                                             \
  template Var sub<T>(Tape<T>&, Var, Var);                                                             \
  template Var mul<T>(Tape<T>&, Var, Var);                                                             \
  template Var scale<T>(Tape<T>&, Var, T);                                                             \
  template Var square<T>(Tape<T>&, Var);                                                               \
  template Var sum<T>(Tape<T>&, Var);                                                                  \
  template Var mean<T>(Tape<T>&, Var);                                                                 \
  template Var reshape<T>(Tape<T>&, Var, Shape);                                                       \
  template Var flatten<T>(Tape<T>&, Var);                                                              \
  template Var concat_cols<T>(Tape<T>&, Var, Var);                                                     \
  template Var stack_rows<T>(Tape<T>&, const std::vector<Var>&);                                       \
  template Var slice_rows<T>(Tape<T>&, Var, int, int);                                                 \
  template Var embedding<T>(Tape<T>&, Var, std::span<const int>);                                      \
  template Var layernorm<T>(Tape<T>&, Var, Var, Var, T);                                               \
  template Var multihead_attention<T>(Tape<T>&, Var, const AttentionParams&, int, int);                \
  template Tensor<T> attention_probabilities<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,  \
                                                const Tensor<T>&, const Tensor<T>&, int, int);

CELLDEPLOY_INSTANTIATE_OPS(float)
CELLDEPLOY_INSTANTIATE_OPS(double)

}  // namespace celldeploy::nn
