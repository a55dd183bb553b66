#pragma once

#include "mogen/nn/ops.hpp"

namespace mogen::nn {

// 1-D convolution over the column (time) axis.
//   x : (Cin x T), W : (Cout x Cin*k), b : (Cout x 1)
// Zero padding `pad` on both sides, output length (T + 2*pad - k)/stride + 1.
template <class S>
Node<S>* conv1d(Graph<S>& g, Node<S>* x, Node<S>* W, Node<S>* b, Index k, Index stride = 1,
                Index pad = 0) {
  const Index cin = x->rows();
  const Index t = x->cols();
  require(W->cols() == cin * k, "conv1d: weight shape mismatch");
  require((t + 2 * pad - k) % stride == 0, "conv1d: length not compatible with stride");
  const Index t_out = (t + 2 * pad - k) / stride + 1;
  require(t_out >= 1, "conv1d: empty output");

  MatX<S> col = MatX<S>::Zero(cin * k, t_out);
  for (Index j = 0; j < t_out; ++j) {
    for (Index u = 0; u < k; ++u) {
      const Index src = j * stride + u - pad;
      if (src >= 0 && src < t) col.block(u * cin, j, cin, 1) = x->value.col(src);
    }
  }
  MatX<S> out = W->value * col;
  out.colwise() += VecX<S>(b->value.col(0));
  Node<S>* y = g.make(std::move(out));
  g.tape([x, W, b, y, col = std::move(col), k, stride, pad, cin, t, t_out] {
    W->g().noalias() += y->g() * col.transpose();
    b->g() += y->g().rowwise().sum();
    MatX<S> dcol = W->value.transpose() * y->g();
    for (Index j = 0; j < t_out; ++j) {
      for (Index u = 0; u < k; ++u) {
        const Index src = j * stride + u - pad;
        if (src >= 0 && src < t) x->g().col(src) += dcol.block(u * cin, j, cin, 1);
      }
    }
  });
  return y;
}

// Nearest-neighbour upsampling along time: each column repeated `factor` times.
template <class S>
Node<S>* upsample_repeat(Graph<S>& g, Node<S>* x, Index factor) {
  require(factor >= 1, "upsample_repeat: factor >= 1");
  MatX<S> out(x->rows(), x->cols() * factor);
  for (Index j = 0; j < x->cols(); ++j)
    for (Index u = 0; u < factor; ++u) out.col(j * factor + u) = x->value.col(j);
  Node<S>* y = g.make(std::move(out));
  g.tape([x, y, factor] {
    for (Index j = 0; j < x->cols(); ++j)
      for (Index u = 0; u < factor; ++u) x->g().col(j) += y->g().col(j * factor + u);
  });
  return y;
}

}  // namespace mogen::nn
