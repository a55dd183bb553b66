#pragma once

#include <cmath>
#include <vector>

#include "mogen/nn/graph.hpp"

namespace mogen::nn {

// ---- elementwise / linear algebra -----------------------------------------

template <class S>
Node<S>* add(Graph<S>& g, Node<S>* a, Node<S>* b) {
  require(a->rows() == b->rows() && a->cols() == b->cols(), "add: shape mismatch");
  Node<S>* y = g.make(a->value + b->value);
  g.tape([a, b, y] {
    a->g() += y->g();
    b->g() += y->g();
  });
  return y;
}

template <class S>
Node<S>* sub(Graph<S>& g, Node<S>* a, Node<S>* b) {
  require(a->rows() == b->rows() && a->cols() == b->cols(), "sub: shape mismatch");
  Node<S>* y = g.make(a->value - b->value);
  g.tape([a, b, y] {
    a->g() += y->g();
    b->g() -= y->g();
  });
  return y;
}

template <class S>
Node<S>* mul(Graph<S>& g, Node<S>* a, Node<S>* b) {
  require(a->rows() == b->rows() && a->cols() == b->cols(), "mul: shape mismatch");
  Node<S>* y = g.make(a->value.cwiseProduct(b->value));
  g.tape([a, b, y] {
    a->g() += y->g().cwiseProduct(b->value);
    b->g() += y->g().cwiseProduct(a->value);
  });
  return y;
}

template <class S>
Node<S>* scale(Graph<S>& g, Node<S>* a, S c) {
  Node<S>* y = g.make(a->value * c);
  g.tape([a, y, c] { a->g() += y->g() * c; });
  return y;
}

// y = a + bias (bias is d x 1, broadcast over columns)
template <class S>
Node<S>* add_bias(Graph<S>& g, Node<S>* a, Node<S>* bias) {
  require(bias->cols() == 1 && bias->rows() == a->rows(), "add_bias: bias must be (rows x 1)");
  MatX<S> v = a->value;
  v.colwise() += VecX<S>(bias->value.col(0));
  Node<S>* y = g.make(std::move(v));
  g.tape([a, bias, y] {
    a->g() += y->g();
    bias->g() += y->g().rowwise().sum();
  });
  return y;
}

// y = a scaled per-row by column vector v (d x 1)
template <class S>
Node<S>* colwise_scale(Graph<S>& g, Node<S>* a, Node<S>* v) {
  require(v->cols() == 1 && v->rows() == a->rows(), "colwise_scale: v must be (rows x 1)");
  MatX<S> out = a->value.array().colwise() * v->value.col(0).array();
  Node<S>* y = g.make(std::move(out));
  g.tape([a, v, y] {
    a->g() += (y->g().array().colwise() * v->value.col(0).array()).matrix();
    v->g() += y->g().cwiseProduct(a->value).rowwise().sum();
  });
  return y;
}

template <class S>
Node<S>* matmul(Graph<S>& g, Node<S>* a, Node<S>* b) {
  require(a->cols() == b->rows(), "matmul: inner dimensions differ");
  Node<S>* y = g.make(a->value * b->value);
  g.tape([a, b, y] {
    a->g().noalias() += y->g() * b->value.transpose();
    b->g().noalias() += a->value.transpose() * y->g();
  });
  return y;
}

// ---- activations -----------------------------------------------------------

template <class S>
Node<S>* relu(Graph<S>& g, Node<S>* a) {
  Node<S>* y = g.make(a->value.cwiseMax(S(0)));
  g.tape([a, y] {
    a->g() += (a->value.array() > S(0)).template cast<S>().matrix().cwiseProduct(y->g());
  });
  return y;
}

template <class S>
Node<S>* gelu(Graph<S>& g, Node<S>* a) {
  constexpr double kC = 0.7978845608028654;  // sqrt(2/pi)
  constexpr double kA = 0.044715;
  MatX<S> t = (S(kC) * (a->value.array() + S(kA) * a->value.array().cube())).tanh();
  MatX<S> out = S(0.5) * a->value.cwiseProduct((t.array() + S(1)).matrix());
  Node<S>* y = g.make(std::move(out));
  g.tape([a, y, t = std::move(t)] {
    auto x = a->value.array();
    auto th = t.array();
    MatX<S> d = (S(0.5) * (th + S(1)) +
                 S(0.5) * x * (S(1) - th.square()) * S(kC) * (S(1) + S(3) * S(kA) * x.square()))
                    .matrix();
    a->g() += y->g().cwiseProduct(d);
  });
  return y;
}

template <class S>
Node<S>* sigmoid(Graph<S>& g, Node<S>* a) {
  MatX<S> out = (S(1) / (S(1) + (-a->value.array()).exp())).matrix();
  Node<S>* y = g.make(std::move(out));
  g.tape([a, y] {
    a->g() += y->g().cwiseProduct(
        y->value.cwiseProduct((MatX<S>::Ones(y->rows(), y->cols()) - y->value)));
  });
  return y;
}

template <class S>
Node<S>* tanh_op(Graph<S>& g, Node<S>* a) {
  MatX<S> out = a->value.array().tanh().matrix();
  Node<S>* y = g.make(std::move(out));
  g.tape([a, y] {
    a->g() += y->g().cwiseProduct(
        (MatX<S>::Ones(y->rows(), y->cols()) - y->value.cwiseProduct(y->value)));
  });
  return y;
}

// ---- normalization ----------------------------------------------------------

// Per-column layer norm across rows; gain/bias are (d x 1).
template <class S>
Node<S>* layer_norm(Graph<S>& g, Node<S>* x, Node<S>* gain, Node<S>* bias, S eps = S(1e-5)) {
  const Index d = x->rows();
  require(gain->rows() == d && bias->rows() == d, "layer_norm: gain/bias shape");
  RowVecX<S> mean = x->value.colwise().mean();
  MatX<S> centered = x->value.rowwise() - mean;
  RowVecX<S> var = centered.array().square().colwise().mean();
  RowVecX<S> inv_std = (var.array() + eps).rsqrt();
  MatX<S> xhat = centered.array().rowwise() * inv_std.array();
  MatX<S> out = (xhat.array().colwise() * gain->value.col(0).array()).matrix();
  out.colwise() += VecX<S>(bias->value.col(0));
  Node<S>* y = g.make(std::move(out));
  g.tape([x, gain, bias, y, xhat = std::move(xhat), inv_std = std::move(inv_std)] {
    const Index d2 = x->rows();
    MatX<S> gy = y->g().array().colwise() * gain->value.col(0).array();
    RowVecX<S> mean_gy = gy.colwise().mean();
    RowVecX<S> mean_gy_xhat = gy.cwiseProduct(xhat).colwise().mean();
    MatX<S> dx = gy;
    dx.rowwise() -= mean_gy;
    dx -= (xhat.array().rowwise() * mean_gy_xhat.array()).matrix();
    dx = dx.array().rowwise() * inv_std.array();
    x->g() += dx;
    gain->g() += y->g().cwiseProduct(xhat).rowwise().sum();
    bias->g() += y->g().rowwise().sum();
    (void)d2;
  });
  return y;
}

// Normalize each column to unit L2 norm.
template <class S>
Node<S>* l2_normalize_cols(Graph<S>& g, Node<S>* x, S eps = S(1e-12)) {
  RowVecX<S> norms = (x->value.colwise().squaredNorm().array() + eps).sqrt();
  MatX<S> out = x->value.array().rowwise() / norms.array();
  Node<S>* y = g.make(std::move(out));
  g.tape([x, y, norms = std::move(norms)] {
    RowVecX<S> dots = (y->g().cwiseProduct(y->value)).colwise().sum();
    MatX<S> dx = y->g() - (y->value.array().rowwise() * dots.array()).matrix();
    x->g() += (dx.array().rowwise() / norms.array()).matrix();
  });
  return y;
}

// ---- softmax & losses -------------------------------------------------------

template <class S>
Node<S>* softmax_cols(Graph<S>& g, Node<S>* x) {
  MatX<S> out = x->value;
  for (Index c = 0; c < out.cols(); ++c) {
    VecX<S> col = out.col(c);
    const S m = col.maxCoeff();
    col = (col.array() - m).exp();
    out.col(c) = col / col.sum();
  }
  Node<S>* y = g.make(std::move(out));
  g.tape([x, y] {
    for (Index c = 0; c < y->cols(); ++c) {
      const S dot = y->g().col(c).dot(y->value.col(c));
      x->g().col(c) +=
          y->value.col(c).cwiseProduct(y->g().col(c) - VecX<S>::Constant(y->rows(), dot));
    }
  });
  return y;
}

// Weighted mean cross-entropy over columns: labels[c] indexes rows; columns
// with weight 0 are skipped. Empty effective weight returns 0.
template <class S>
Node<S>* cross_entropy_cols(Graph<S>& g, Node<S>* logits, std::vector<Index> labels,
                            std::vector<S> weights) {
  require(static_cast<Index>(labels.size()) == logits->cols(), "cross_entropy: label count");
  require(labels.size() == weights.size(), "cross_entropy: weight count");
  const Index n = logits->cols();
  S wsum = S(0);
  for (S w : weights) wsum += w;
  MatX<S> probs(logits->rows(), n);
  S loss = S(0);
  for (Index c = 0; c < n; ++c) {
    VecX<S> col = logits->value.col(c);
    const S m = col.maxCoeff();
    VecX<S> e = (col.array() - m).exp();
    const S z = e.sum();
    probs.col(c) = e / z;
    if (weights[static_cast<std::size_t>(c)] != S(0)) {
      const S logp = col(labels[static_cast<std::size_t>(c)]) - m - std::log(z);
      loss -= weights[static_cast<std::size_t>(c)] * logp;
    }
  }
  if (wsum > S(0)) loss /= wsum;
  Node<S>* y = g.make(MatX<S>::Constant(1, 1, loss));
  if (wsum > S(0)) {
    g.tape([logits, y, probs = std::move(probs), labels = std::move(labels),
            weights = std::move(weights), wsum] {
      const S dy = y->g()(0, 0);
      for (Index c = 0; c < logits->cols(); ++c) {
        const S w = weights[static_cast<std::size_t>(c)];
        if (w == S(0)) continue;
        VecX<S> dcol = probs.col(c) * (w / wsum);
        dcol(labels[static_cast<std::size_t>(c)]) -= w / wsum;
        logits->g().col(c) += dy * dcol;
      }
    });
  }
  return y;
}

// Mean binary cross-entropy on probabilities with clamping. Gradient is zero
// where the clamp is active.
template <class S>
Node<S>* bce_from_probs(Graph<S>& g, Node<S>* probs, const MatX<S>& targets,
                        S clamp_eps = S(1e-6)) {
  require(probs->rows() == targets.rows() && probs->cols() == targets.cols(),
          "bce: shape mismatch");
  const Index n = probs->value.size();
  MatX<S> p = probs->value.cwiseMax(clamp_eps).cwiseMin(S(1) - clamp_eps);
  S loss = S(0);
  for (Index c = 0; c < p.cols(); ++c)
    for (Index r = 0; r < p.rows(); ++r) {
      const S t = targets(r, c);
      loss -= t * std::log(p(r, c)) + (S(1) - t) * std::log(S(1) - p(r, c));
    }
  loss /= static_cast<S>(n);
  Node<S>* y = g.make(MatX<S>::Constant(1, 1, loss));
  g.tape([probs, y, p = std::move(p), targets, clamp_eps, n] {
    const S dy = y->g()(0, 0);
    MatX<S> dp(p.rows(), p.cols());
    for (Index c = 0; c < p.cols(); ++c)
      for (Index r = 0; r < p.rows(); ++r) {
        const S raw = probs->value(r, c);
        if (raw <= clamp_eps || raw >= S(1) - clamp_eps) {
          dp(r, c) = S(0);
        } else {
          dp(r, c) = (p(r, c) - targets(r, c)) / (p(r, c) * (S(1) - p(r, c)));
        }
      }
    probs->g() += dp * (dy / static_cast<S>(n));
  });
  return y;
}

// Mean Huber loss between two tensors.
template <class S>
Node<S>* huber(Graph<S>& g, Node<S>* pred, Node<S>* target, S delta = S(1)) {
  require(pred->rows() == target->rows() && pred->cols() == target->cols(),
          "huber: shape mismatch");
  const Index n = pred->value.size();
  MatX<S> e = pred->value - target->value;
  S loss = S(0);
  for (Index c = 0; c < e.cols(); ++c)
    for (Index r = 0; r < e.rows(); ++r) {
      const S a = std::abs(e(r, c));
      loss += a <= delta ? S(0.5) * a * a : delta * (a - S(0.5) * delta);
    }
  loss /= static_cast<S>(n);
  Node<S>* y = g.make(MatX<S>::Constant(1, 1, loss));
  g.tape([pred, target, y, e = std::move(e), delta, n] {
    const S dy = y->g()(0, 0);
    MatX<S> de(e.rows(), e.cols());
    for (Index c = 0; c < e.cols(); ++c)
      for (Index r = 0; r < e.rows(); ++r) {
        const S v = e(r, c);
        de(r, c) = std::abs(v) <= delta ? v : (v > S(0) ? delta : -delta);
      }
    de *= dy / static_cast<S>(n);
    pred->g() += de;
    target->g() -= de;
  });
  return y;
}

template <class S>
Node<S>* mse(Graph<S>& g, Node<S>* pred, Node<S>* target) {
  require(pred->rows() == target->rows() && pred->cols() == target->cols(),
          "mse: shape mismatch");
  const Index n = pred->value.size();
  MatX<S> e = pred->value - target->value;
  Node<S>* y = g.make(MatX<S>::Constant(1, 1, e.squaredNorm() / static_cast<S>(n)));
  g.tape([pred, target, y, e = std::move(e), n] {
    MatX<S> de = e * (S(2) * y->g()(0, 0) / static_cast<S>(n));
    pred->g() += de;
    target->g() -= de;
  });
  return y;
}

template <class S>
Node<S>* mean_all(Graph<S>& g, Node<S>* x) {
  const Index n = x->value.size();
  Node<S>* y = g.make(MatX<S>::Constant(1, 1, x->value.sum() / static_cast<S>(n)));
  g.tape([x, y, n] {
    x->g().array() += y->g()(0, 0) / static_cast<S>(n);
  });
  return y;
}

// y = sum_i w_i * s_i over scalar nodes
template <class S>
Node<S>* weighted_sum(Graph<S>& g, std::vector<Node<S>*> terms, std::vector<S> weights) {
  require(terms.size() == weights.size() && !terms.empty(), "weighted_sum: arity");
  S v = S(0);
  for (std::size_t i = 0; i < terms.size(); ++i) v += weights[i] * terms[i]->value(0, 0);
  Node<S>* y = g.make(MatX<S>::Constant(1, 1, v));
  g.tape([y, terms = std::move(terms), weights = std::move(weights)] {
    for (std::size_t i = 0; i < terms.size(); ++i)
      terms[i]->g()(0, 0) += weights[i] * y->g()(0, 0);
  });
  return y;
}

// ---- shape ops --------------------------------------------------------------

template <class S>
Node<S>* slice_cols(Graph<S>& g, Node<S>* x, Index start, Index n) {
  require(start >= 0 && start + n <= x->cols(), "slice_cols: out of range");
  Node<S>* y = g.make(x->value.middleCols(start, n));
  g.tape([x, y, start, n] { x->g().middleCols(start, n) += y->g(); });
  return y;
}

template <class S>
Node<S>* concat_cols(Graph<S>& g, std::vector<Node<S>*> parts) {
  require(!parts.empty(), "concat_cols: empty");
  Index total = 0;
  for (auto* p : parts) {
    require(p->rows() == parts[0]->rows(), "concat_cols: row mismatch");
    total += p->cols();
  }
  MatX<S> out(parts[0]->rows(), total);
  Index off = 0;
  for (auto* p : parts) {
    out.middleCols(off, p->cols()) = p->value;
    off += p->cols();
  }
  Node<S>* y = g.make(std::move(out));
  g.tape([y, parts = std::move(parts)] {
    Index o = 0;
    for (auto* p : parts) {
      p->g() += y->g().middleCols(o, p->cols());
      o += p->cols();
    }
  });
  return y;
}

// y.col(j) = x.col(indices[j]); duplicates accumulate in backward. This is the
// embedding lookup when x is a (d x K) table.
template <class S>
Node<S>* gather_cols(Graph<S>& g, Node<S>* x, std::vector<Index> indices) {
  MatX<S> out(x->rows(), static_cast<Index>(indices.size()));
  for (std::size_t j = 0; j < indices.size(); ++j) {
    require(indices[j] >= 0 && indices[j] < x->cols(), "gather_cols: index out of range");
    out.col(static_cast<Index>(j)) = x->value.col(indices[j]);
  }
  Node<S>* y = g.make(std::move(out));
  g.tape([x, y, indices = std::move(indices)] {
    for (std::size_t j = 0; j < indices.size(); ++j)
      x->g().col(indices[j]) += y->g().col(static_cast<Index>(j));
  });
  return y;
}

// Forwards `values` while routing the gradient unchanged into `route_to`
// (straight-through estimator for the quantization step).
template <class S>
Node<S>* straight_through(Graph<S>& g, const MatX<S>& values, Node<S>* route_to) {
  require(values.rows() == route_to->rows() && values.cols() == route_to->cols(),
          "straight_through: shape mismatch");
  Node<S>* y = g.make(values);
  g.tape([route_to, y] { route_to->g() += y->g(); });
  return y;
}

// Mean-pool consecutive groups of `group` columns.
template <class S>
Node<S>* mean_pool_cols(Graph<S>& g, Node<S>* x, Index group) {
  require(group > 0 && x->cols() % group == 0, "mean_pool_cols: cols not divisible");
  const Index out_cols = x->cols() / group;
  MatX<S> out(x->rows(), out_cols);
  for (Index j = 0; j < out_cols; ++j)
    out.col(j) = x->value.middleCols(j * group, group).rowwise().mean();
  Node<S>* y = g.make(std::move(out));
  g.tape([x, y, group, out_cols] {
    for (Index j = 0; j < out_cols; ++j)
      x->g().middleCols(j * group, group).colwise() +=
          VecX<S>(y->g().col(j) / static_cast<S>(group));
  });
  return y;
}

template <class S>
Node<S>* transpose(Graph<S>& g, Node<S>* x) {
  Node<S>* y = g.make(x->value.transpose());
  g.tape([x, y] { x->g() += y->g().transpose(); });
  return y;
}

// Running sum along columns (time axis).
template <class S>
Node<S>* cumsum_cols(Graph<S>& g, Node<S>* x) {
  MatX<S> out = x->value;
  for (Index c = 1; c < out.cols(); ++c) out.col(c) += out.col(c - 1);
  Node<S>* y = g.make(std::move(out));
  g.tape([x, y] {
    MatX<S> suffix = y->g();
    for (Index c = suffix.cols() - 2; c >= 0; --c) suffix.col(c) += suffix.col(c + 1);
    x->g() += suffix;
  });
  return y;
}

}  // namespace mogen::nn
