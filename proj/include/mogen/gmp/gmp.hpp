#pragma once

#include <string>
#include <vector>

#include "mogen/core/rng.hpp"
#include "mogen/motion/sequence.hpp"
#include "mogen/nn/attention.hpp"
#include "mogen/nn/ops.hpp"

namespace mogen::gmp {

struct GmpConfig {
  Index n_layers = 2;
  Index width = 64;
  Index heads = 4;
  std::string loss = "huber";  // "huber" | "mse"
  double aux_position_weight = 0.5;
  bool use_contacts = false;  // feed contact labels alongside the joints

  void validate() const {
    require(n_layers >= 1, "GmpConfig: n_layers >= 1");
    require(loss == "huber" || loss == "mse", "GmpConfig: unknown loss " + loss);
  }
};

// Root XZ velocity from local body motion. Each of the 22 body joints becomes
// a token (position + velocity features), spatial attention mixes the joints
// per frame, mean pooling and a linear head emit (r_x, r_z).
template <class S>
class GlobalMotionPredictor {
 public:
  static constexpr Index kJoints = motion::joints::kBodyCount;

  GlobalMotionPredictor(const GmpConfig& cfg, Rng& rng) : cfg_(cfg) {
    cfg_.validate();
    const Index w = cfg.width;
    const Index in_dim = cfg_.use_contacts ? 7 : 6;
    in_w_ = nn::Param<S>("gmp.in.w", rng.gaussian<S>(w, in_dim, 0.1));
    in_b_ = nn::Param<S>("gmp.in.b", MatX<S>::Zero(w, 1));
    joint_emb_ = nn::Param<S>("gmp.joint_emb", rng.gaussian<S>(w, kJoints, 0.05));
    blocks_.resize(static_cast<std::size_t>(cfg.n_layers));
    for (Index i = 0; i < cfg.n_layers; ++i) {
      Block& b = blocks_[static_cast<std::size_t>(i)];
      const std::string pre = "gmp.blk" + std::to_string(i) + ".";
      b.ln_g = nn::Param<S>(pre + "ln.g", MatX<S>::Ones(w, 1));
      b.ln_b = nn::Param<S>(pre + "ln.b", MatX<S>::Zero(w, 1));
      b.wq = nn::Param<S>(pre + "wq", rng.gaussian<S>(w, w, 0.05));
      b.wk = nn::Param<S>(pre + "wk", rng.gaussian<S>(w, w, 0.05));
      b.wv = nn::Param<S>(pre + "wv", rng.gaussian<S>(w, w, 0.05));
      b.wo = nn::Param<S>(pre + "wo", rng.gaussian<S>(w, w, 0.05));
      b.bo = nn::Param<S>(pre + "bo", MatX<S>::Zero(w, 1));
      b.ffn_ln_g = nn::Param<S>(pre + "ffn.ln.g", MatX<S>::Ones(w, 1));
      b.ffn_ln_b = nn::Param<S>(pre + "ffn.ln.b", MatX<S>::Zero(w, 1));
      b.ffn_w1 = nn::Param<S>(pre + "ffn.w1", rng.gaussian<S>(2 * w, w, 0.05));
      b.ffn_b1 = nn::Param<S>(pre + "ffn.b1", MatX<S>::Zero(2 * w, 1));
      b.ffn_w2 = nn::Param<S>(pre + "ffn.w2", rng.gaussian<S>(w, 2 * w, 0.05));
      b.ffn_b2 = nn::Param<S>(pre + "ffn.b2", MatX<S>::Zero(w, 1));
    }
    head_w_ = nn::Param<S>("gmp.head.w", rng.gaussian<S>(2, w, 0.05));
    head_b_ = nn::Param<S>("gmp.head.b", MatX<S>::Zero(2, 1));
  }

  const GmpConfig& config() const { return cfg_; }

  // j_p: (L x 21*3) root-local positions (root excluded), j_v: (L x 22*3),
  // contacts: (L x 4) when enabled. Returns a (2 x L) node.
  nn::Node<S>* forward(nn::Graph<S>& g, const Matd& j_p, const Matd& j_v,
                       const Matd& contacts = Matd()) {
    const Index L = j_p.rows();
    require(j_p.cols() == (kJoints - 1) * 3, "gmp: j_p width mismatch");
    require(j_v.rows() == L && j_v.cols() == kJoints * 3, "gmp: j_v shape mismatch");
    if (cfg_.use_contacts) require(contacts.rows() == L, "gmp: contacts length mismatch");

    const Index in_dim = cfg_.use_contacts ? 7 : 6;
    MatX<S> feat(in_dim, L * kJoints);
    for (Index i = 0; i < L; ++i) {
      for (Index j = 0; j < kJoints; ++j) {
        const Index col = i * kJoints + j;
        for (int k = 0; k < 3; ++k) {
          feat(k, col) = j == 0 ? S(0) : static_cast<S>(j_p(i, 3 * (j - 1) + k));
          feat(3 + k, col) = static_cast<S>(j_v(i, 3 * j + k));
        }
        if (cfg_.use_contacts) {
          S c = S(0);
          for (int f = 0; f < 4; ++f)
            if (motion::joints::kContactJoints[f] == j) c = static_cast<S>(contacts(i, f));
          feat(6, col) = c;
        }
      }
    }
    auto* h = nn::add_bias(g, nn::matmul(g, g.leaf(in_w_), g.constant(feat)), g.leaf(in_b_));
    // joint identity embeddings, tiled over frames
    std::vector<Index> emb_idx(static_cast<std::size_t>(L * kJoints));
    for (Index i = 0; i < L; ++i)
      for (Index j = 0; j < kJoints; ++j) emb_idx[static_cast<std::size_t>(i * kJoints + j)] = j;
    h = nn::add(g, h, nn::gather_cols(g, g.leaf(joint_emb_), emb_idx));

    std::vector<nn::AttnGroup> frames(static_cast<std::size_t>(L));
    for (Index i = 0; i < L; ++i) {
      auto& grp = frames[static_cast<std::size_t>(i)];
      for (Index j = 0; j < kJoints; ++j) grp.q_cols.push_back(i * kJoints + j);
      grp.kv_cols = grp.q_cols;
    }
    for (auto& b : blocks_) {
      auto* xn = nn::layer_norm(g, h, g.leaf(b.ln_g), g.leaf(b.ln_b));
      auto* att = nn::grouped_attention(g, nn::matmul(g, g.leaf(b.wq), xn),
                                        nn::matmul(g, g.leaf(b.wk), xn),
                                        nn::matmul(g, g.leaf(b.wv), xn), frames, cfg_.heads);
      h = nn::add(g, h, nn::add_bias(g, nn::matmul(g, g.leaf(b.wo), att), g.leaf(b.bo)));
      auto* u = nn::layer_norm(g, h, g.leaf(b.ffn_ln_g), g.leaf(b.ffn_ln_b));
      auto* f = nn::add_bias(
          g,
          nn::matmul(g, g.leaf(b.ffn_w2),
                     nn::gelu(g, nn::add_bias(g, nn::matmul(g, g.leaf(b.ffn_w1), u),
                                              g.leaf(b.ffn_b1)))),
          g.leaf(b.ffn_b2));
      h = nn::add(g, h, f);
    }
    auto* pooled = nn::mean_pool_cols(g, h, kJoints);  // width x L
    return nn::add_bias(g, nn::matmul(g, g.leaf(head_w_), pooled), g.leaf(head_b_));
  }

  // Value-only inference: (L x 2) velocities.
  Matd predict(const Matd& j_p, const Matd& j_v, const Matd& contacts = Matd()) {
    nn::Graph<S> g;
    auto* out = forward(g, j_p, j_v, contacts);
    return out->value.template cast<double>().transpose();
  }

  std::vector<nn::Param<S>*> parameters() {
    std::vector<nn::Param<S>*> ps = {&in_w_, &in_b_, &joint_emb_};
    for (auto& b : blocks_) {
      for (nn::Param<S>* p : {&b.ln_g, &b.ln_b, &b.wq, &b.wk, &b.wv, &b.wo, &b.bo,
                              &b.ffn_ln_g, &b.ffn_ln_b, &b.ffn_w1, &b.ffn_b1, &b.ffn_w2,
                              &b.ffn_b2})
        ps.push_back(p);
    }
    ps.push_back(&head_w_);
    ps.push_back(&head_b_);
    return ps;
  }

 private:
  struct Block {
    nn::Param<S> ln_g, ln_b, wq, wk, wv, wo, bo;
    nn::Param<S> ffn_ln_g, ffn_ln_b, ffn_w1, ffn_b1, ffn_w2, ffn_b2;
  };
  GmpConfig cfg_;
  nn::Param<S> in_w_, in_b_, joint_emb_;
  std::vector<Block> blocks_;
  nn::Param<S> head_w_, head_b_;
};

// Huber(pred, gt) + aux_weight * MSE(cumsum(pred), cumsum(gt)) on (2 x L).
template <class S>
nn::Node<S>* gmp_loss(nn::Graph<S>& g, nn::Node<S>* pred, const MatX<S>& gt,
                      const GmpConfig& cfg) {
  require(pred->rows() == gt.rows() && pred->cols() == gt.cols(), "gmp_loss: shape mismatch");
  auto* gtn = g.constant(gt);
  nn::Node<S>* base = cfg.loss == "mse" ? nn::mse(g, pred, gtn)
                                        : nn::huber(g, pred, gtn, S(1));
  if (cfg.aux_position_weight == 0.0) return base;
  auto* aux = nn::mse(g, nn::cumsum_cols(g, pred), nn::cumsum_cols(g, gtn));
  return nn::weighted_sum<S>(g, {base, aux}, {S(1), S(cfg.aux_position_weight)});
}

inline double gmp_loss_value(const Matd& pred, const Matd& gt, double aux_weight,
                             const std::string& loss = "huber") {
  require(pred.rows() == gt.rows() && pred.cols() == gt.cols(), "gmp_loss: shape mismatch");
  double base = 0.0;
  if (loss == "mse") {
    base = (pred - gt).squaredNorm() / static_cast<double>(pred.size());
  } else {
    for (Index c = 0; c < pred.cols(); ++c)
      for (Index r = 0; r < pred.rows(); ++r) {
        const double a = std::abs(pred(r, c) - gt(r, c));
        base += a <= 1.0 ? 0.5 * a * a : a - 0.5;
      }
    base /= static_cast<double>(pred.size());
  }
  Matd cp = pred, cg = gt;
  for (Index r = 1; r < cp.rows(); ++r) {
    cp.row(r) += cp.row(r - 1);
    cg.row(r) += cg.row(r - 1);
  }
  const double aux = (cp - cg).squaredNorm() / static_cast<double>(cp.size());
  return base + aux_weight * aux;
}

// Insert predicted (r_x, r_z) into the reserved layout slots.
inline motion::MotionSequence attach_translation(const motion::MotionSequence& local,
                                                 const Matd& vel) {
  require(vel.rows() == local.frames() && vel.cols() == 2,
          "attach_translation: velocity shape mismatch");
  motion::MotionSequence out = local;
  out.data.col(out.layout.span("r_x").start) = vel.col(0);
  out.data.col(out.layout.span("r_z").start) = vel.col(1);
  return out;
}

}  // namespace mogen::gmp
