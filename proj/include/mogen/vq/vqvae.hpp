#pragma once

#include <memory>
#include <string>
#include <vector>

#include "mogen/motion/normalize.hpp"
#include "mogen/motion/sequence.hpp"
#include "mogen/nn/conv.hpp"
#include "mogen/nn/ops.hpp"
#include "mogen/vq/codebook.hpp"
#include "mogen/vq/token_grid.hpp"

namespace mogen::vq {

struct VqConfig {
  Index K = 512;
  Index d_c = 512;
  Index downsample = 4;
  double beta = 0.25;
  Index encoder_depth = 4;  // residual blocks, split across the strided stages
  Index encoder_width = 128;
  double huber_delta = 1.0;
  bool affine_enabled = true;
  bool scalar_affine = false;
  double affine_decay = 0.99;
  double usage_decay = 0.9;
  double stale_threshold_ratio = 0.03;  // x (batch tokens / K)
  Index stale_check_interval = 200;
  bool use_kmeans_init = true;
  bool alternate_optimization = true;

  Index stages() const {
    Index s = 0, d = downsample;
    while (d > 1) {
      require(d % 2 == 0, "VqConfig: downsample must be a power of two");
      d /= 2;
      ++s;
    }
    return s;
  }
};

// Temporal-convolutional VQ-VAE for one part stream. Sequences run through
// the graph as (features x time) matrices.
template <class S>
class VqVae {
 public:
  VqVae(std::string name, Index d_in, const VqConfig& cfg, Rng& rng)
      : name_(std::move(name)), d_in_(d_in), cfg_(cfg) {
    codebook = Codebook<S>(cfg.d_c, cfg.K, rng, cfg.affine_enabled);
    codebook.scalar_affine = cfg.scalar_affine;
    codebook.embeddings.name = name_ + ".codebook";
    const Index w = cfg.encoder_width;
    const Index stages = cfg.stages();
    const Index blocks_per_stage = std::max<Index>(1, cfg.encoder_depth / std::max<Index>(1, stages));

    enc_in_ = conv_param("enc.in", w, d_in_, 3, rng);
    for (Index s = 0; s < stages; ++s) {
      enc_down_.push_back(conv_param("enc.down" + std::to_string(s), w, w, 4, rng));
      for (Index b = 0; b < blocks_per_stage; ++b) {
        enc_res_.push_back(conv_param("enc.res" + std::to_string(s) + "_" + std::to_string(b) + "a", w, w, 3, rng));
        enc_res_.push_back(conv_param("enc.res" + std::to_string(s) + "_" + std::to_string(b) + "b", w, w, 3, rng, 0.0));
      }
    }
    enc_out_ = conv_param("enc.out", cfg.d_c, w, 3, rng);

    dec_in_ = conv_param("dec.in", w, cfg.d_c, 3, rng);
    for (Index s = 0; s < stages; ++s) {
      for (Index b = 0; b < blocks_per_stage; ++b) {
        dec_res_.push_back(conv_param("dec.res" + std::to_string(s) + "_" + std::to_string(b) + "a", w, w, 3, rng));
        dec_res_.push_back(conv_param("dec.res" + std::to_string(s) + "_" + std::to_string(b) + "b", w, w, 3, rng, 0.0));
      }
      dec_up_.push_back(conv_param("dec.up" + std::to_string(s), w, w, 3, rng));
    }
    dec_out_ = conv_param("dec.out", d_in_, w, 3, rng, 0.0);
  }

  const VqConfig& config() const { return cfg_; }
  Index input_dim() const { return d_in_; }
  const std::string& name() const { return name_; }

  // x: (d_in x L), L divisible by the downsampling factor -> (d_c x L/ds)
  nn::Node<S>* encode(nn::Graph<S>& g, nn::Node<S>* x) {
    require(x->rows() == d_in_, "encode: feature width mismatch");
    require(x->cols() % cfg_.downsample == 0, "encode: length not divisible by downsample");
    auto* h = nn::relu(g, apply(g, enc_in_, x, 3, 1, 1));
    std::size_t ri = 0;
    for (std::size_t s = 0; s < enc_down_.size(); ++s) {
      h = nn::relu(g, apply(g, enc_down_[s], h, 4, 2, 1));
      const std::size_t blocks = enc_res_.size() / (2 * enc_down_.size());
      for (std::size_t b = 0; b < blocks; ++b) {
        auto* r = nn::relu(g, apply(g, enc_res_[ri], h, 3, 1, 1));
        r = apply(g, enc_res_[ri + 1], r, 3, 1, 1);
        h = nn::add(g, h, r);
        ri += 2;
      }
    }
    return apply(g, enc_out_, h, 3, 1, 1);
  }

  // zq: (d_c x l) -> (d_in x l*ds)
  nn::Node<S>* decode(nn::Graph<S>& g, nn::Node<S>* zq) {
    require(zq->rows() == cfg_.d_c, "decode: latent width mismatch");
    auto* h = nn::relu(g, apply(g, dec_in_, zq, 3, 1, 1));
    std::size_t ri = 0;
    for (std::size_t s = 0; s < dec_up_.size(); ++s) {
      const std::size_t blocks = dec_res_.size() / (2 * dec_up_.size());
      for (std::size_t b = 0; b < blocks; ++b) {
        auto* r = nn::relu(g, apply(g, dec_res_[ri], h, 3, 1, 1));
        r = apply(g, dec_res_[ri + 1], r, 3, 1, 1);
        h = nn::add(g, h, r);
        ri += 2;
      }
      h = nn::relu(g, apply(g, dec_up_[s], nn::upsample_repeat(g, h, 2), 3, 1, 1));
    }
    return apply(g, dec_out_, h, 3, 1, 1);
  }

  // Effective codebook as a graph node (gradients reach the stored embeddings).
  nn::Node<S>* effective_codebook(nn::Graph<S>& g) {
    auto* e = g.leaf(codebook.embeddings);
    if (!codebook.affine_enabled) return e;
    auto* scaled = nn::colwise_scale(g, e, g.constant(MatX<S>(codebook.affine_std)));
    return nn::add_bias(g, scaled, g.constant(MatX<S>(codebook.affine_mean)));
  }

  std::vector<nn::Param<S>*> parameters() {
    std::vector<nn::Param<S>*> ps = autoencoder_parameters();
    ps.push_back(&codebook.embeddings);
    return ps;
  }

  std::vector<nn::Param<S>*> encoder_parameters() {
    std::vector<nn::Param<S>*> ps;
    auto grab = [&](ConvParam& c) {
      ps.push_back(&c.w);
      ps.push_back(&c.b);
    };
    grab(enc_in_);
    for (auto& c : enc_down_) grab(c);
    for (auto& c : enc_res_) grab(c);
    grab(enc_out_);
    return ps;
  }

  std::vector<nn::Param<S>*> decoder_parameters() {
    std::vector<nn::Param<S>*> ps;
    auto grab = [&](ConvParam& c) {
      ps.push_back(&c.w);
      ps.push_back(&c.b);
    };
    grab(dec_in_);
    for (auto& c : dec_res_) grab(c);
    for (auto& c : dec_up_) grab(c);
    grab(dec_out_);
    return ps;
  }

  std::vector<nn::Param<S>*> autoencoder_parameters() {
    auto ps = encoder_parameters();
    auto dec = decoder_parameters();
    ps.insert(ps.end(), dec.begin(), dec.end());
    return ps;
  }

  Codebook<S> codebook;

 private:
  struct ConvParam {
    nn::Param<S> w, b;
    Index k = 3;
  };

  ConvParam conv_param(const std::string& n, Index cout, Index cin, Index k, Rng& rng,
                       double init_scale = 1.0) {
    ConvParam c;
    const double std = init_scale * std::sqrt(2.0 / static_cast<double>(cin * k));
    c.w = nn::Param<S>(name_ + "." + n + ".w", rng.gaussian<S>(cout, cin * k, std));
    c.b = nn::Param<S>(name_ + "." + n + ".b", MatX<S>::Zero(cout, 1));
    c.k = k;
    return c;
  }

  nn::Node<S>* apply(nn::Graph<S>& g, ConvParam& c, nn::Node<S>* x, Index k, Index stride,
                     Index pad) {
    return nn::conv1d(g, x, g.leaf(c.w), g.leaf(c.b), k, stride, pad);
  }

  std::string name_;
  Index d_in_;
  VqConfig cfg_;
  ConvParam enc_in_, enc_out_, dec_in_, dec_out_;
  std::vector<ConvParam> enc_down_, enc_res_, dec_res_, dec_up_;
};

// The three per-position loss terms. Reconstruction is Huber; the codebook
// term moves only the embeddings, the commit term only the encoder.
template <class S>
struct VqLossNodes {
  nn::Node<S>* reconstruction;
  nn::Node<S>* codebook;
  nn::Node<S>* commit;
  nn::Node<S>* total;
};

// Plain-value loss evaluation matching the training objective.
struct VqLossValues {
  double reconstruction = 0;
  double codebook = 0;
  double commit = 0;
  double total = 0;
};

inline VqLossValues vq_loss_values(const Matd& x, const Matd& x_hat, const Matd& z_e,
                                   const Matd& z_q, double beta, double delta = 1.0) {
  require(x.rows() == x_hat.rows() && x.cols() == x_hat.cols(), "vq_losses: x shape");
  require(z_e.rows() == z_q.rows() && z_e.cols() == z_q.cols(), "vq_losses: z shape");
  VqLossValues v;
  for (Index c = 0; c < x.cols(); ++c)
    for (Index r = 0; r < x.rows(); ++r) {
      const double a = std::abs(x(r, c) - x_hat(r, c));
      v.reconstruction += a <= delta ? 0.5 * a * a : delta * (a - 0.5 * delta);
    }
  v.reconstruction /= static_cast<double>(x.size());
  v.codebook = (z_e - z_q).squaredNorm() / static_cast<double>(z_e.size());
  v.commit = beta * v.codebook;
  v.total = v.reconstruction + v.codebook + v.commit;
  return v;
}

// Build the quantized training graph for one window. Returns the loss nodes
// together with the chosen indices and the raw encoder latents.
template <class S>
struct VqForward {
  VqLossNodes<S> losses;
  std::vector<Index> indices;
  MatX<S> latents;  // encoder output values (d_c x l)
};

template <class S>
VqForward<S> vq_training_forward(nn::Graph<S>& g, VqVae<S>& model, const MatX<S>& x) {
  VqForward<S> out;
  auto* xn = g.constant(x);
  auto* ze = model.encode(g, xn);
  out.latents = ze->value;

  auto* eff = model.effective_codebook(g);
  out.indices = quantize_indices<S>(ze->value, eff->value);
  auto* e_sel = nn::gather_cols(g, eff, out.indices);
  auto* zq_st = nn::straight_through(g, e_sel->value, ze);
  auto* xhat = model.decode(g, zq_st);

  VqLossNodes<S> L;
  L.reconstruction = nn::huber(g, xhat, xn, S(model.config().huber_delta));
  L.codebook = nn::mse(g, e_sel, g.constant(ze->value));
  L.commit = nn::mse(g, ze, g.constant(e_sel->value));
  L.total = nn::weighted_sum<S>(g, {L.reconstruction, L.codebook, L.commit},
                                {S(1), S(1), S(model.config().beta)});
  out.losses = L;
  return out;
}

// Inference-only encode+quantize (no tape bookkeeping kept afterwards).
template <class S>
std::vector<Index> encode_to_indices(VqVae<S>& model, const MatX<S>& x) {
  nn::Graph<S> g;
  auto* ze = model.encode(g, g.constant(x));
  return quantize_indices<S>(ze->value, model.codebook.effective());
}

template <class S>
MatX<S> decode_from_indices(VqVae<S>& model, const std::vector<Index>& idx) {
  nn::Graph<S> g;
  MatX<S> codes = gather_codes<S>(model.codebook.effective(), idx);
  auto* xhat = model.decode(g, g.constant(codes));
  return xhat->value;
}

// ---- the three-part tokenizer -------------------------------------------------

template <class S>
struct TokenizerSet {
  std::unique_ptr<VqVae<S>> body, lhand, rhand;
  motion::NormalizationStats stats;
  motion::FeatureLayout layout;
  std::string dataset_hash;

  VqVae<S>& part(Index i) {
    switch (i) {
      case 0: return *body;
      case 1: return *lhand;
      default: return *rhand;
    }
  }

  // Right-pad a (d x L) stream with its last frame to a downsample multiple.
  static MatX<S> pad_to_multiple(const MatX<S>& x, Index m) {
    const Index rem = x.cols() % m;
    if (rem == 0) return x;
    MatX<S> out(x.rows(), x.cols() + (m - rem));
    out.leftCols(x.cols()) = x;
    for (Index j = x.cols(); j < out.cols(); ++j) out.col(j) = x.col(x.cols() - 1);
    return out;
  }

  TokenGrid tokenize(const motion::MotionSequence& m) {
    motion::MotionSequence norm;
    norm.layout = m.layout;
    norm.data = stats.apply(m.data);
    motion::PartSplit parts = motion::split_parts(norm);
    const Index ds = body->config().downsample;
    const Index l = (m.frames() + ds - 1) / ds;
    TokenGrid grid;
    grid.K = static_cast<int>(body->config().K);
    grid.tokens.resize(l, 3);
    const Matd* streams[3] = {&parts.body, &parts.lhand, &parts.rhand};
    for (Index p = 0; p < 3; ++p) {
      MatX<S> x = pad_to_multiple(streams[p]->transpose().template cast<S>(), ds);
      std::vector<Index> idx = encode_to_indices(part(p), x);
      for (Index i = 0; i < l; ++i) grid.tokens(i, p) = static_cast<int>(idx[static_cast<std::size_t>(i)]);
    }
    return grid;
  }

  // Decode a grid back to raw-unit part streams of n_frames rows.
  motion::PartSplit detokenize(const TokenGrid& grid, Index n_frames = -1) {
    require(!grid.has_mask(), "detokenize: grid contains MASK entries");
    const Index ds = body->config().downsample;
    if (n_frames < 0) n_frames = grid.length() * ds;
    require(n_frames <= grid.length() * ds, "detokenize: n_frames too large");

    motion::PartColumns cols = motion::part_columns(layout);
    const std::vector<Index>* col_lists[3] = {&cols.body, &cols.lhand, &cols.rhand};
    motion::PartSplit out;
    Matd* streams[3] = {&out.body, &out.lhand, &out.rhand};
    for (Index p = 0; p < 3; ++p) {
      std::vector<Index> idx(static_cast<std::size_t>(grid.length()));
      for (Index i = 0; i < grid.length(); ++i) idx[static_cast<std::size_t>(i)] = grid.tokens(i, p);
      MatX<S> xhat = decode_from_indices(part(p), idx);
      // denormalize with the per-stream slices of the full stats
      Matd raw = xhat.template cast<double>().transpose().topRows(n_frames);
      const auto& list = *col_lists[p];
      for (std::size_t c = 0; c < list.size(); ++c) {
        raw.col(static_cast<Index>(c)) =
            raw.col(static_cast<Index>(c)) * stats.std(list[c]) + Vecd::Constant(n_frames, stats.mean(list[c]));
      }
      *streams[p] = std::move(raw);
    }
    return out;
  }
};

}  // namespace mogen::vq
