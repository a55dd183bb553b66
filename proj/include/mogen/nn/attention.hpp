#pragma once

#include <memory>
#include <vector>

#include "mogen/nn/ops.hpp"

namespace mogen::nn {

// One attention group: the listed query columns attend to the listed key/value
// columns. Groups express temporal attention (one group per stream), spatial
// attention (one group per timestep) and cross-attention (queries vs. a
// separate source) with a single fused kernel.
struct AttnGroup {
  std::vector<Index> q_cols;
  std::vector<Index> kv_cols;
};

// Fused multi-head attention over projected q/k/v (all d x N, d = heads * dh).
// Output has q's shape. Softmax over keys per query row.
template <class S>
Node<S>* grouped_attention(Graph<S>& g, Node<S>* q, Node<S>* k, Node<S>* v,
                           std::vector<AttnGroup> groups, Index heads) {
  const Index d = q->rows();
  require(k->rows() == d && v->rows() == d, "attention: dim mismatch");
  require(heads >= 1 && d % heads == 0, "attention: heads must divide dim");
  const Index dh = d / heads;
  const S inv_sqrt = S(1) / std::sqrt(static_cast<S>(dh));

  MatX<S> out = MatX<S>::Zero(d, q->cols());
  // softmax weights saved for backward: groups x heads
  auto saved = std::make_shared<std::vector<MatX<S>>>();
  saved->reserve(groups.size() * static_cast<std::size_t>(heads));

  for (const auto& grp : groups) {
    const Index nq = static_cast<Index>(grp.q_cols.size());
    const Index nk = static_cast<Index>(grp.kv_cols.size());
    MatX<S> qg(d, nq), kg(d, nk), vg(d, nk);
    for (Index j = 0; j < nq; ++j) qg.col(j) = q->value.col(grp.q_cols[static_cast<std::size_t>(j)]);
    for (Index j = 0; j < nk; ++j) {
      kg.col(j) = k->value.col(grp.kv_cols[static_cast<std::size_t>(j)]);
      vg.col(j) = v->value.col(grp.kv_cols[static_cast<std::size_t>(j)]);
    }
    for (Index h = 0; h < heads; ++h) {
      auto Q = qg.middleRows(h * dh, dh);
      auto K = kg.middleRows(h * dh, dh);
      auto V = vg.middleRows(h * dh, dh);
      MatX<S> scores = (Q.transpose() * K) * inv_sqrt;  // nq x nk
      for (Index r = 0; r < scores.rows(); ++r) {
        RowVecX<S> row = scores.row(r);
        const S m = row.maxCoeff();
        row = (row.array() - m).exp();
        scores.row(r) = row / row.sum();
      }
      MatX<S> o = V * scores.transpose();  // dh x nq
      for (Index j = 0; j < nq; ++j)
        out.block(h * dh, grp.q_cols[static_cast<std::size_t>(j)], dh, 1) += o.col(j);
      saved->push_back(std::move(scores));
    }
  }

  Node<S>* y = g.make(std::move(out));
  g.tape([q, k, v, y, groups = std::move(groups), saved, heads, dh, inv_sqrt] {
    std::size_t si = 0;
    for (const auto& grp : groups) {
      const Index nq = static_cast<Index>(grp.q_cols.size());
      const Index nk = static_cast<Index>(grp.kv_cols.size());
      MatX<S> qg(dh * heads, nq), kg(dh * heads, nk), vg(dh * heads, nk);
      for (Index j = 0; j < nq; ++j)
        qg.col(j) = q->value.col(grp.q_cols[static_cast<std::size_t>(j)]);
      for (Index j = 0; j < nk; ++j) {
        kg.col(j) = k->value.col(grp.kv_cols[static_cast<std::size_t>(j)]);
        vg.col(j) = v->value.col(grp.kv_cols[static_cast<std::size_t>(j)]);
      }
      for (Index h = 0; h < heads; ++h) {
        const MatX<S>& A = (*saved)[si++];  // nq x nk softmax weights
        auto Q = qg.middleRows(h * dh, dh);
        auto K = kg.middleRows(h * dh, dh);
        auto V = vg.middleRows(h * dh, dh);
        MatX<S> dO(dh, nq);
        for (Index j = 0; j < nq; ++j)
          dO.col(j) = y->g().block(h * dh, grp.q_cols[static_cast<std::size_t>(j)], dh, 1);
        MatX<S> dV = dO * A;                    // dh x nk
        MatX<S> dA = dO.transpose() * V;        // nq x nk
        MatX<S> dSc(A.rows(), A.cols());
        for (Index r = 0; r < A.rows(); ++r) {
          const S dot = dA.row(r).dot(A.row(r));
          dSc.row(r) = A.row(r).cwiseProduct(dA.row(r).array().matrix() -
                                             RowVecX<S>::Constant(A.cols(), dot));
        }
        dSc *= inv_sqrt;
        MatX<S> dQ = K * dSc.transpose();  // dh x nq
        MatX<S> dK = Q * dSc;              // dh x nk
        for (Index j = 0; j < nq; ++j)
          q->g().block(h * dh, grp.q_cols[static_cast<std::size_t>(j)], dh, 1) += dQ.col(j);
        for (Index j = 0; j < nk; ++j) {
          k->g().block(h * dh, grp.kv_cols[static_cast<std::size_t>(j)], dh, 1) += dK.col(j);
          v->g().block(h * dh, grp.kv_cols[static_cast<std::size_t>(j)], dh, 1) += dV.col(j);
        }
      }
    }
  });
  return y;
}

}  // namespace mogen::nn
