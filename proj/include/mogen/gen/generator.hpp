#pragma once

#include <array>
#include <memory>
#include <string>
#include <vector>

#include "mogen/core/rng.hpp"
#include "mogen/nn/attention.hpp"
#include "mogen/nn/conv.hpp"
#include "mogen/nn/ops.hpp"
#include "mogen/vq/token_grid.hpp"

namespace mogen::gen {

struct GeneratorConfig {
  Index n_blocks = 4;        // paper scale: 8
  Index width = 128;         // paper scale: 512
  Index heads = 4;
  Index film_every = 3;      // FiLM after every third block's feed-forward
  double cond_drop_prob = 0.2;
  Index train_seq_tokens = 30;
  Index max_positions = 256;
  Index K = 512;
  Index d_t = 64;
  Index d_a = 64;
  Index ffn_mult = 2;
  Index audio_width = 32;
  bool input_interpolation = false;   // optional additive condition injection
  std::string critic_fill_mode = "sample";  // "sample" | "argmax"
  double critic_loss_weight = 1.0;
};

// Conditioning inputs for one grid. text_tokens holds either one sequence
// (replicated across the three parts) or three part-specific sequences;
// audio_tokens is already at token rate (l rows). Dropped modalities are
// replaced by learned null embeddings inside the model.
struct ConditionBundle {
  std::vector<Matd> text_tokens;
  Matd audio_tokens;
  bool text_dropped = false;
  bool audio_dropped = false;

  bool has_text() const { return !text_dropped && !text_tokens.empty(); }
  bool has_audio() const { return !audio_dropped && audio_tokens.rows() > 0; }
};

// Independently drop each modality with probability p.
inline ConditionBundle condition_dropout(const ConditionBundle& c, double p, Rng& rng) {
  require(p >= 0.0 && p <= 1.0, "condition_dropout: p in [0,1]");
  ConditionBundle out = c;
  if (rng.uniform() < p) out.text_dropped = true;
  if (rng.uniform() < p) out.audio_dropped = true;
  return out;
}

struct CriticScores {
  Matd scores;  // l x 3 in [0, 1]
};

// Bidirectional masked transformer over the (l x 3) token grid with a
// weight-sharing binary critic head. Batched sequences live in one matrix,
// columns ordered item-major then part-major then time.
template <class S>
class MaskedGenerator {
 public:
  MaskedGenerator(const GeneratorConfig& cfg, Rng& rng) : cfg_(cfg) {
    const Index w = cfg.width;
    auto gauss = [&](const std::string& n, Index r, Index c, double std) {
      return nn::Param<S>(n, rng.gaussian<S>(r, c, std));
    };
    auto zeros = [&](const std::string& n, Index r, Index c) {
      return nn::Param<S>(n, MatX<S>::Zero(r, c));
    };
    auto ones = [&](const std::string& n, Index r, Index c) {
      return nn::Param<S>(n, MatX<S>::Ones(r, c));
    };

    for (int p = 0; p < 3; ++p)
      tok_emb_[p] = gauss("tok_emb" + std::to_string(p), w, cfg.K, 0.02);
    mask_emb_ = gauss("mask_emb", w, 1, 0.02);
    col_emb_ = gauss("col_emb", w, 3, 0.02);
    text_proj_w_ = gauss("text_proj.w", w, cfg.d_t, 0.02);
    text_proj_b_ = zeros("text_proj.b", w, 1);
    null_text_ = gauss("null_text", w, 1, 0.02);
    audio_in_w_ = gauss("audio_in.w", cfg.audio_width, cfg.d_a, 0.05);
    audio_in_b_ = zeros("audio_in.b", cfg.audio_width, 1);
    audio_tcn_w_ = gauss("audio_tcn.w", cfg.audio_width, cfg.audio_width * 3, 0.05);
    audio_tcn_b_ = zeros("audio_tcn.b", cfg.audio_width, 1);
    null_audio_ = gauss("null_audio", cfg.audio_width, 1, 0.05);
    if (cfg.input_interpolation) {
      interp_text_w_ = gauss("interp_text.w", w, cfg.d_t, 0.02);
      interp_audio_w_ = gauss("interp_audio.w", w, cfg.d_a, 0.02);
    }

    blocks_.resize(static_cast<std::size_t>(cfg.n_blocks));
    for (Index b = 0; b < cfg.n_blocks; ++b) {
      Block& blk = blocks_[static_cast<std::size_t>(b)];
      const std::string pre = "blk" + std::to_string(b) + ".";
      auto attn = [&](const std::string& an) {
        Attn a;
        a.ln_g = ones(pre + an + ".ln.g", w, 1);
        a.ln_b = zeros(pre + an + ".ln.b", w, 1);
        a.wq = gauss(pre + an + ".wq", w, w, 0.02);
        a.bq = zeros(pre + an + ".bq", w, 1);
        a.wk = gauss(pre + an + ".wk", w, w, 0.02);
        a.bk = zeros(pre + an + ".bk", w, 1);
        a.wv = gauss(pre + an + ".wv", w, w, 0.02);
        a.bv = zeros(pre + an + ".bv", w, 1);
        a.wo = gauss(pre + an + ".wo", w, w, 0.02);
        a.bo = zeros(pre + an + ".bo", w, 1);
        return a;
      };
      blk.temporal = attn("temporal");
      blk.spatial = attn("spatial");
      blk.cross = attn("cross");
      blk.ffn_ln_g = ones(pre + "ffn.ln.g", w, 1);
      blk.ffn_ln_b = zeros(pre + "ffn.ln.b", w, 1);
      blk.ffn_w1 = gauss(pre + "ffn.w1", w * cfg.ffn_mult, w, 0.02);
      blk.ffn_b1 = zeros(pre + "ffn.b1", w * cfg.ffn_mult, 1);
      blk.ffn_w2 = gauss(pre + "ffn.w2", w, w * cfg.ffn_mult, 0.02);
      blk.ffn_b2 = zeros(pre + "ffn.b2", w, 1);
      blk.has_film = cfg.film_every >= 1 && ((b + 1) % cfg.film_every == 0);
      if (blk.has_film) {
        blk.film_gamma_w = gauss(pre + "film.gamma.w", w, cfg.audio_width, 0.01);
        blk.film_gamma_b = zeros(pre + "film.gamma.b", w, 1);
        blk.film_beta_w = gauss(pre + "film.beta.w", w, cfg.audio_width, 0.01);
        blk.film_beta_b = zeros(pre + "film.beta.b", w, 1);
      }
    }
    final_ln_g_ = ones("final_ln.g", w, 1);
    final_ln_b_ = zeros("final_ln.b", w, 1);
    for (int p = 0; p < 3; ++p) {
      head_w_[p] = gauss("head" + std::to_string(p) + ".w", cfg.K, w, 0.02);
      head_b_[p] = zeros("head" + std::to_string(p) + ".b", cfg.K, 1);
    }
    critic_w_ = gauss("critic.w", 1, w, 0.02);
    critic_b_ = zeros("critic.b", 1, 1);
  }

  const GeneratorConfig& config() const { return cfg_; }

  // Per-part logits for a batch of grids. Any entry may be MASK.
  // result[b][p] is a (K x l) node.
  std::vector<std::array<nn::Node<S>*, 3>> forward_logits(
      nn::Graph<S>& g, const std::vector<vq::TokenGrid>& grids,
      const std::vector<ConditionBundle>& conds) {
    ++generator_forwards_;
    auto* h = trunk(g, grids, conds);
    const Index l = grids.front().length();
    std::vector<std::array<nn::Node<S>*, 3>> out(grids.size());
    for (std::size_t b = 0; b < grids.size(); ++b) {
      for (Index p = 0; p < 3; ++p) {
        auto* hp = nn::slice_cols(g, h, static_cast<Index>(b) * 3 * l + p * l, l);
        out[b][static_cast<std::size_t>(p)] =
            nn::add_bias(g, nn::matmul(g, g.leaf(head_w_[p]), hp), g.leaf(head_b_[p]));
      }
    }
    return out;
  }

  // Critic probabilities for fully filled grids: per item an (l x 3) score
  // block through the shared trunk and the binary head.
  std::vector<nn::Node<S>*> forward_critic(nn::Graph<S>& g,
                                           const std::vector<vq::TokenGrid>& grids,
                                           const std::vector<ConditionBundle>& conds) {
    for (const auto& grid : grids)
      require(!grid.has_mask(), "critic_forward: grid contains MASK entries");
    ++critic_forwards_;
    auto* h = trunk(g, grids, conds);
    auto* scores = nn::sigmoid(
        g, nn::add_bias(g, nn::matmul(g, g.leaf(critic_w_), h), g.leaf(critic_b_)));
    const Index l = grids.front().length();
    std::vector<nn::Node<S>*> out(grids.size());
    for (std::size_t b = 0; b < grids.size(); ++b)
      out[b] = nn::slice_cols(g, scores, static_cast<Index>(b) * 3 * l, 3 * l);
    return out;
  }

  std::vector<nn::Param<S>*> trunk_parameters() {
    std::vector<nn::Param<S>*> ps;
    for (int p = 0; p < 3; ++p) ps.push_back(&tok_emb_[p]);
    ps.push_back(&mask_emb_);
    ps.push_back(&col_emb_);
    ps.push_back(&text_proj_w_);
    ps.push_back(&text_proj_b_);
    ps.push_back(&null_text_);
    ps.push_back(&audio_in_w_);
    ps.push_back(&audio_in_b_);
    ps.push_back(&audio_tcn_w_);
    ps.push_back(&audio_tcn_b_);
    ps.push_back(&null_audio_);
    if (cfg_.input_interpolation) {
      ps.push_back(&interp_text_w_);
      ps.push_back(&interp_audio_w_);
    }
    for (auto& blk : blocks_) {
      for (Attn* a : {&blk.temporal, &blk.spatial, &blk.cross}) {
        ps.push_back(&a->ln_g);
        ps.push_back(&a->ln_b);
        ps.push_back(&a->wq);
        ps.push_back(&a->bq);
        ps.push_back(&a->wk);
        ps.push_back(&a->bk);
        ps.push_back(&a->wv);
        ps.push_back(&a->bv);
        ps.push_back(&a->wo);
        ps.push_back(&a->bo);
      }
      ps.push_back(&blk.ffn_ln_g);
      ps.push_back(&blk.ffn_ln_b);
      ps.push_back(&blk.ffn_w1);
      ps.push_back(&blk.ffn_b1);
      ps.push_back(&blk.ffn_w2);
      ps.push_back(&blk.ffn_b2);
      if (blk.has_film) {
        ps.push_back(&blk.film_gamma_w);
        ps.push_back(&blk.film_gamma_b);
        ps.push_back(&blk.film_beta_w);
        ps.push_back(&blk.film_beta_b);
      }
    }
    ps.push_back(&final_ln_g_);
    ps.push_back(&final_ln_b_);
    return ps;
  }

  std::vector<nn::Param<S>*> generator_head_parameters() {
    std::vector<nn::Param<S>*> ps;
    for (int p = 0; p < 3; ++p) {
      ps.push_back(&head_w_[p]);
      ps.push_back(&head_b_[p]);
    }
    return ps;
  }

  std::vector<nn::Param<S>*> critic_head_parameters() { return {&critic_w_, &critic_b_}; }

  std::vector<nn::Param<S>*> parameters() {
    auto ps = trunk_parameters();
    auto gh = generator_head_parameters();
    auto ch = critic_head_parameters();
    ps.insert(ps.end(), gh.begin(), gh.end());
    ps.insert(ps.end(), ch.begin(), ch.end());
    return ps;
  }

  std::size_t generator_forwards() const { return generator_forwards_; }
  std::size_t critic_forwards() const { return critic_forwards_; }
  void reset_forward_counters() { generator_forwards_ = critic_forwards_ = 0; }

 private:
  struct Attn {
    nn::Param<S> ln_g, ln_b, wq, bq, wk, bk, wv, bv, wo, bo;
  };
  struct Block {
    Attn temporal, spatial, cross;
    nn::Param<S> ffn_ln_g, ffn_ln_b, ffn_w1, ffn_b1, ffn_w2, ffn_b2;
    bool has_film = false;
    nn::Param<S> film_gamma_w, film_gamma_b, film_beta_w, film_beta_b;
  };

  MatX<S> positional(Index l) const {
    MatX<S> pe(cfg_.width, l);
    for (Index t = 0; t < l; ++t)
      for (Index r = 0; r < cfg_.width; ++r) {
        const double freq = std::pow(10000.0, -static_cast<double>(r / 2 * 2) / cfg_.width);
        const double v = static_cast<double>(t) * freq;
        pe(r, t) = static_cast<S>(r % 2 == 0 ? std::sin(v) : std::cos(v));
      }
    return pe;
  }

  nn::Node<S>* project(nn::Graph<S>& g, nn::Param<S>& w, nn::Param<S>& b, nn::Node<S>* x) {
    return nn::add_bias(g, nn::matmul(g, g.leaf(w), x), g.leaf(b));
  }

  // Shared trunk: embeds the grids, runs all blocks, applies the final norm.
  // Output is (width x 3l*B), columns item-major, part-major, time-major.
  nn::Node<S>* trunk(nn::Graph<S>& g, const std::vector<vq::TokenGrid>& grids,
                     const std::vector<ConditionBundle>& conds) {
    require(!grids.empty() && grids.size() == conds.size(), "trunk: batch mismatch");
    const Index l = grids.front().length();
    const Index B = static_cast<Index>(grids.size());
    require(l <= cfg_.max_positions, "trunk: sequence exceeds positional capacity");
    for (const auto& grid : grids) {
      require(grid.length() == l, "trunk: ragged batch");
      require(grid.K == static_cast<int>(cfg_.K), "trunk: K mismatch");
    }
    for (const auto& c : conds)
      if (c.has_audio())
        require(c.audio_tokens.rows() == l, "trunk: audio length mismatch with token grid");

    // token embeddings: per part, gather from [table | MASK] with shared MASK
    std::array<nn::Node<S>*, 3> tables;
    for (Index p = 0; p < 3; ++p)
      tables[static_cast<std::size_t>(p)] =
          nn::concat_cols(g, {g.leaf(tok_emb_[p]), g.leaf(mask_emb_)});
    auto* col_table = g.leaf(col_emb_);
    auto* pos = g.constant(positional(l));

    std::vector<nn::Node<S>*> item_parts;
    item_parts.reserve(static_cast<std::size_t>(B) * 3);
    for (Index b = 0; b < B; ++b) {
      for (Index p = 0; p < 3; ++p) {
        std::vector<Index> ids(static_cast<std::size_t>(l));
        for (Index t = 0; t < l; ++t) ids[static_cast<std::size_t>(t)] = grids[static_cast<std::size_t>(b)].tokens(t, p);
        auto* emb = nn::gather_cols(g, tables[static_cast<std::size_t>(p)], ids);
        emb = nn::add_bias(g, emb, nn::gather_cols(g, col_table, {p}));
        emb = nn::add(g, emb, pos);
        item_parts.push_back(emb);
      }
    }
    auto* h = nn::concat_cols(g, item_parts);

    // text key/value source: one projected segment per (item, part)
    std::vector<nn::Node<S>*> text_segs;
    std::vector<std::array<std::pair<Index, Index>, 3>> text_ranges(static_cast<std::size_t>(B));
    Index text_off = 0;
    for (Index b = 0; b < B; ++b) {
      const auto& c = conds[static_cast<std::size_t>(b)];
      if (c.has_text()) {
        require(c.text_tokens.size() == 1 || c.text_tokens.size() == 3,
                "trunk: text bundle must hold 1 or 3 sequences");
        if (c.text_tokens.size() == 1) {
          auto* seg = project(g, text_proj_w_, text_proj_b_,
                              g.constant(c.text_tokens[0].transpose().template cast<S>()));
          const Index n = seg->cols();
          text_segs.push_back(seg);
          for (int p = 0; p < 3; ++p) text_ranges[static_cast<std::size_t>(b)][static_cast<std::size_t>(p)] = {text_off, n};
          text_off += n;
        } else {
          for (int p = 0; p < 3; ++p) {
            auto* seg = project(g, text_proj_w_, text_proj_b_,
                                g.constant(c.text_tokens[static_cast<std::size_t>(p)].transpose().template cast<S>()));
            const Index n = seg->cols();
            text_segs.push_back(seg);
            text_ranges[static_cast<std::size_t>(b)][static_cast<std::size_t>(p)] = {text_off, n};
            text_off += n;
          }
        }
      } else {
        text_segs.push_back(g.leaf(null_text_));
        for (int p = 0; p < 3; ++p) text_ranges[static_cast<std::size_t>(b)][static_cast<std::size_t>(p)] = {text_off, 1};
        text_off += 1;
      }
    }
    auto* text_src = nn::concat_cols(g, text_segs);

    // audio features at token rate, expanded to align with h's columns
    std::vector<nn::Node<S>*> audio_segs;
    for (Index b = 0; b < B; ++b) {
      const auto& c = conds[static_cast<std::size_t>(b)];
      nn::Node<S>* a;
      if (c.has_audio()) {
        a = project(g, audio_in_w_, audio_in_b_,
                    g.constant(c.audio_tokens.transpose().template cast<S>()));
        a = nn::relu(g, a);
        a = nn::conv1d(g, a, g.leaf(audio_tcn_w_), g.leaf(audio_tcn_b_), 3, 1, 1);
      } else {
        a = nn::gather_cols(g, g.leaf(null_audio_), std::vector<Index>(static_cast<std::size_t>(l), 0));
      }
      for (int rep = 0; rep < 3; ++rep) audio_segs.push_back(a);
    }
    auto* audio_feat = nn::concat_cols(g, audio_segs);  // audio_width x 3l*B

    if (cfg_.input_interpolation) {
      // additive pooled-condition injection at the input
      std::vector<nn::Node<S>*> addends;
      for (Index b = 0; b < B; ++b) {
        const auto& c = conds[static_cast<std::size_t>(b)];
        nn::Node<S>* base;
        if (c.has_text()) {
          auto* t = g.constant(c.text_tokens[0].transpose().template cast<S>());
          base = nn::matmul(g, g.leaf(interp_text_w_), nn::mean_pool_cols(g, t, t->cols()));
        } else {
          base = nn::matmul(g, g.leaf(interp_text_w_),
                            g.constant(MatX<S>::Zero(cfg_.d_t, 1)));
        }
        if (c.has_audio()) {
          auto* a = g.constant(c.audio_tokens.transpose().template cast<S>());
          base = nn::add(g, base,
                         nn::matmul(g, g.leaf(interp_audio_w_), nn::mean_pool_cols(g, a, a->cols())));
        }
        addends.push_back(nn::gather_cols(g, base, std::vector<Index>(static_cast<std::size_t>(3 * l), 0)));
      }
      h = nn::add(g, h, nn::concat_cols(g, addends));
    }

    // attention groups
    std::vector<nn::AttnGroup> temporal, spatial, cross;
    for (Index b = 0; b < B; ++b) {
      const Index base = b * 3 * l;
      for (Index p = 0; p < 3; ++p) {
        nn::AttnGroup grp;
        for (Index t = 0; t < l; ++t) grp.q_cols.push_back(base + p * l + t);
        grp.kv_cols = grp.q_cols;
        temporal.push_back(grp);
        nn::AttnGroup cg;
        cg.q_cols = temporal.back().q_cols;
        const auto [toff, tn] = text_ranges[static_cast<std::size_t>(b)][static_cast<std::size_t>(p)];
        for (Index t = 0; t < tn; ++t) cg.kv_cols.push_back(toff + t);
        cross.push_back(cg);
      }
      for (Index t = 0; t < l; ++t) {
        nn::AttnGroup grp;
        grp.q_cols = {base + t, base + l + t, base + 2 * l + t};
        grp.kv_cols = grp.q_cols;
        spatial.push_back(grp);
      }
    }

    auto attend = [&](Attn& a, nn::Node<S>* x, nn::Node<S>* kv_src,
                      const std::vector<nn::AttnGroup>& groups) {
      auto* xn = nn::layer_norm(g, x, g.leaf(a.ln_g), g.leaf(a.ln_b));
      auto* kvn = kv_src == x ? xn : kv_src;
      auto* q = project(g, a.wq, a.bq, xn);
      auto* k = project(g, a.wk, a.bk, kvn);
      auto* v = project(g, a.wv, a.bv, kvn);
      auto* att = nn::grouped_attention(g, q, k, v, groups, cfg_.heads);
      return nn::add(g, x, project(g, a.wo, a.bo, att));
    };

    for (auto& blk : blocks_) {
      h = attend(blk.temporal, h, h, temporal);
      h = attend(blk.spatial, h, h, spatial);
      h = attend(blk.cross, h, text_src, cross);
      auto* u = nn::layer_norm(g, h, g.leaf(blk.ffn_ln_g), g.leaf(blk.ffn_ln_b));
      auto* f = project(g, blk.ffn_w2, blk.ffn_b2,
                        nn::gelu(g, project(g, blk.ffn_w1, blk.ffn_b1, u)));
      h = nn::add(g, h, f);
      if (blk.has_film) {
        auto* gamma = project(g, blk.film_gamma_w, blk.film_gamma_b, audio_feat);
        auto* beta = project(g, blk.film_beta_w, blk.film_beta_b, audio_feat);
        // (1 + gamma) .* h + beta
        h = nn::add(g, nn::add(g, h, nn::mul(g, h, gamma)), beta);
      }
    }
    return nn::layer_norm(g, h, g.leaf(final_ln_g_), g.leaf(final_ln_b_));
  }

  GeneratorConfig cfg_;
  std::array<nn::Param<S>, 3> tok_emb_;
  nn::Param<S> mask_emb_, col_emb_;
  nn::Param<S> text_proj_w_, text_proj_b_, null_text_;
  nn::Param<S> audio_in_w_, audio_in_b_, audio_tcn_w_, audio_tcn_b_, null_audio_;
  nn::Param<S> interp_text_w_, interp_audio_w_;
  std::vector<Block> blocks_;
  nn::Param<S> final_ln_g_, final_ln_b_;
  std::array<nn::Param<S>, 3> head_w_, head_b_;
  nn::Param<S> critic_w_, critic_b_;
  std::size_t generator_forwards_ = 0;
  std::size_t critic_forwards_ = 0;
};

// Mean cross-entropy over masked positions only (0 when nothing is masked).
template <class S>
nn::Node<S>* mlm_loss(nn::Graph<S>& g, const std::vector<std::array<nn::Node<S>*, 3>>& logits,
                      const std::vector<vq::TokenGrid>& targets,
                      const std::vector<Mati>& masks) {
  require(logits.size() == targets.size() && logits.size() == masks.size(),
          "mlm_loss: batch mismatch");
  std::vector<nn::Node<S>*> cols;
  std::vector<Index> labels;
  std::vector<S> weights;
  for (std::size_t b = 0; b < logits.size(); ++b) {
    const Index l = targets[b].length();
    require(masks[b].rows() == l && masks[b].cols() == 3, "mlm_loss: mask shape");
    for (Index p = 0; p < 3; ++p) {
      cols.push_back(logits[b][static_cast<std::size_t>(p)]);
      for (Index t = 0; t < l; ++t) {
        const int tok = targets[b].tokens(t, p);
        require(tok >= 0 && tok < targets[b].K, "mlm_loss: target contains MASK");
        labels.push_back(tok);
        weights.push_back(masks[b](t, p) ? S(1) : S(0));
      }
    }
  }
  auto* all = nn::concat_cols(g, cols);
  return nn::cross_entropy_cols(g, all, labels, weights);
}

// Mean BCE over all positions of the critic scores (probabilities).
template <class S>
nn::Node<S>* critic_loss(nn::Graph<S>& g, const std::vector<nn::Node<S>*>& scores,
                         const std::vector<Mati>& real_labels) {
  require(scores.size() == real_labels.size(), "critic_loss: batch mismatch");
  std::vector<nn::Node<S>*> cols;
  std::vector<S> targets;
  for (std::size_t b = 0; b < scores.size(); ++b) {
    cols.push_back(scores[b]);
    const Index l = real_labels[b].rows();
    require(scores[b]->cols() == 3 * l, "critic_loss: shape mismatch");
    for (Index p = 0; p < 3; ++p)
      for (Index t = 0; t < l; ++t) targets.push_back(real_labels[b](t, p) ? S(1) : S(0));
  }
  auto* all = nn::concat_cols(g, cols);
  MatX<S> t(1, static_cast<Index>(targets.size()));
  for (std::size_t i = 0; i < targets.size(); ++i) t(0, static_cast<Index>(i)) = targets[i];
  return nn::bce_from_probs(g, all, t);
}

// Plain-value BCE on probabilities with clamping (the critic objective).
inline double critic_loss_value(const Matd& scores, const Mati& y, double eps = 1e-6) {
  require(scores.rows() == y.rows() && scores.cols() == y.cols(), "critic_loss: shape");
  double loss = 0.0;
  for (Index c = 0; c < scores.cols(); ++c)
    for (Index r = 0; r < scores.rows(); ++r) {
      const double s = scores(r, c);
      require(s >= 0.0 && s <= 1.0, "critic_loss: score outside [0,1]");
      const double p = std::min(1.0 - eps, std::max(eps, s));
      loss -= y(r, c) ? std::log(p) : std::log(1.0 - p);
    }
  return loss / static_cast<double>(scores.size());
}

}  // namespace mogen::gen
