#pragma once

#include <string>
#include <vector>

#include "mogen/core/rng.hpp"
#include "mogen/nn/conv.hpp"
#include "mogen/nn/ops.hpp"

namespace mogen::eval {

struct RetrievalConfig {
  Index joint_dim = 32;
  Index width = 64;
  Index d_t = 64;       // text provider dimension
  Index d_motion = 317; // full feature width
  double temperature = 0.07;
};

// Contrastive dual encoder providing the joint embedding space for the metric
// suite. Motion: strided temporal convs, mean pool, MLP. Text: mean-pooled
// stub tokens through an MLP. Both L2-normalized.
template <class S>
class RetrievalModel {
 public:
  RetrievalModel(const RetrievalConfig& cfg, Rng& rng) : cfg_(cfg) {
    const Index w = cfg.width;
    auto P = [&](const std::string& n, Index r, Index c, double std) {
      return nn::Param<S>(n, rng.gaussian<S>(r, c, std));
    };
    auto Z = [&](const std::string& n, Index r) { return nn::Param<S>(n, MatX<S>::Zero(r, 1)); };
    m_conv1_w_ = P("ret.m.conv1.w", w, cfg.d_motion * 3, std::sqrt(2.0 / (cfg.d_motion * 3)));
    m_conv1_b_ = Z("ret.m.conv1.b", w);
    m_conv2_w_ = P("ret.m.conv2.w", w, w * 4, std::sqrt(2.0 / (w * 4)));
    m_conv2_b_ = Z("ret.m.conv2.b", w);
    m_fc1_w_ = P("ret.m.fc1.w", w, w, 0.05);
    m_fc1_b_ = Z("ret.m.fc1.b", w);
    m_fc2_w_ = P("ret.m.fc2.w", cfg.joint_dim, w, 0.05);
    m_fc2_b_ = Z("ret.m.fc2.b", cfg.joint_dim);
    t_fc1_w_ = P("ret.t.fc1.w", w, cfg.d_t, 0.05);
    t_fc1_b_ = Z("ret.t.fc1.b", w);
    t_fc2_w_ = P("ret.t.fc2.w", cfg.joint_dim, w, 0.05);
    t_fc2_b_ = Z("ret.t.fc2.b", cfg.joint_dim);
  }

  const RetrievalConfig& config() const { return cfg_; }

  // normalized motion (L x d_m) -> unit-norm joint embedding node (joint_dim x 1)
  nn::Node<S>* encode_motion(nn::Graph<S>& g, const Matd& norm_motion) {
    require(norm_motion.cols() == cfg_.d_motion, "retrieval: motion width mismatch");
    MatX<S> x = norm_motion.transpose().template cast<S>();
    if (x.cols() % 2 != 0) x.conservativeResize(Eigen::NoChange, x.cols() - 1);
    require(x.cols() >= 2, "retrieval: motion too short");
    auto* h = nn::relu(g, nn::conv1d(g, g.constant(x), g.leaf(m_conv1_w_), g.leaf(m_conv1_b_),
                                     3, 1, 1));
    // one stride-2 stage shrinks time before pooling
    h = nn::relu(g, nn::conv1d(g, h, g.leaf(m_conv2_w_), g.leaf(m_conv2_b_), 4, 2, 1));
    h = nn::mean_pool_cols(g, h, h->cols());
    h = nn::relu(g, nn::add_bias(g, nn::matmul(g, g.leaf(m_fc1_w_), h), g.leaf(m_fc1_b_)));
    h = nn::add_bias(g, nn::matmul(g, g.leaf(m_fc2_w_), h), g.leaf(m_fc2_b_));
    return nn::l2_normalize_cols(g, h);
  }

  // text tokens (n_t x d_t) -> unit-norm joint embedding node (joint_dim x 1)
  nn::Node<S>* encode_text(nn::Graph<S>& g, const Matd& text_tokens) {
    require(text_tokens.cols() == cfg_.d_t, "retrieval: text width mismatch");
    MatX<S> x = text_tokens.transpose().template cast<S>();
    auto* pooled = nn::mean_pool_cols(g, g.constant(x), x.cols());
    auto* h = nn::relu(
        g, nn::add_bias(g, nn::matmul(g, g.leaf(t_fc1_w_), pooled), g.leaf(t_fc1_b_)));
    h = nn::add_bias(g, nn::matmul(g, g.leaf(t_fc2_w_), h), g.leaf(t_fc2_b_));
    return nn::l2_normalize_cols(g, h);
  }

  RowVecX<double> embed_motion(const Matd& norm_motion) {
    nn::Graph<S> g;
    return encode_motion(g, norm_motion)->value.col(0).template cast<double>().transpose();
  }

  RowVecX<double> embed_text(const Matd& text_tokens) {
    nn::Graph<S> g;
    return encode_text(g, text_tokens)->value.col(0).template cast<double>().transpose();
  }

  std::vector<nn::Param<S>*> parameters() {
    return {&m_conv1_w_, &m_conv1_b_, &m_conv2_w_, &m_conv2_b_, &m_fc1_w_, &m_fc1_b_,
            &m_fc2_w_,   &m_fc2_b_,   &t_fc1_w_,   &t_fc1_b_,   &t_fc2_w_, &t_fc2_b_};
  }

 private:
  RetrievalConfig cfg_;
  nn::Param<S> m_conv1_w_, m_conv1_b_, m_conv2_w_, m_conv2_b_;
  nn::Param<S> m_fc1_w_, m_fc1_b_, m_fc2_w_, m_fc2_b_;
  nn::Param<S> t_fc1_w_, t_fc1_b_, t_fc2_w_, t_fc2_b_;
};

// Symmetric InfoNCE over a batch of paired embeddings (joint_dim x B each).
// Off-diagonal pairs sharing a label are masked out of the denominators so
// duplicate prompts do not fight the objective.
template <class S>
nn::Node<S>* info_nce(nn::Graph<S>& g, nn::Node<S>* motion_z, nn::Node<S>* text_z,
                      const std::vector<Index>& labels, double temperature) {
  const Index B = motion_z->cols();
  require(text_z->cols() == B, "info_nce: batch mismatch");
  require(static_cast<Index>(labels.size()) == B, "info_nce: label count");

  MatX<S> neg_mask = MatX<S>::Zero(B, B);  // rows: candidates, cols: anchors
  for (Index i = 0; i < B; ++i)
    for (Index j = 0; j < B; ++j)
      if (i != j && labels[static_cast<std::size_t>(i)] == labels[static_cast<std::size_t>(j)])
        neg_mask(i, j) = S(-1e9);

  std::vector<Index> diag(static_cast<std::size_t>(B));
  std::vector<S> w(static_cast<std::size_t>(B), S(1));
  for (Index i = 0; i < B; ++i) diag[static_cast<std::size_t>(i)] = i;

  // columns are anchors: motion anchor i scores all texts (and vice versa)
  auto* sim_mt = nn::scale(g, nn::matmul(g, nn::transpose(g, text_z), motion_z),
                           S(1.0 / temperature));
  auto* sim_tm = nn::scale(g, nn::matmul(g, nn::transpose(g, motion_z), text_z),
                           S(1.0 / temperature));
  auto* l1 = nn::cross_entropy_cols(g, nn::add(g, sim_mt, g.constant(neg_mask)), diag, w);
  auto* l2 = nn::cross_entropy_cols(g, nn::add(g, sim_tm, g.constant(neg_mask)), diag, w);
  return nn::weighted_sum<S>(g, {l1, l2}, {S(0.5), S(0.5)});
}

}  // namespace mogen::eval
