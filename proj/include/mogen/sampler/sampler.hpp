#pragma once

#include <algorithm>
#include <vector>

#include "mogen/gen/generator.hpp"
#include "mogen/gen/schedule.hpp"

namespace mogen::sampler {

struct SamplerConfig {
  Index steps = 24;
  double cfg_scale = 6.0;
  double temperature = 0.4;
  Index overlap_tokens = 3;  // tokens, not frames (one token covers 4 frames)
  std::uint64_t seed = 0;
  std::string schedule = "cosine";
  bool use_critic = true;  // false: generator-confidence fallback

  void validate() const {
    require(steps >= 1, "SamplerConfig: steps >= 1");
    require(temperature > 0.0, "SamplerConfig: temperature > 0");
    require(overlap_tokens >= 0, "SamplerConfig: overlap >= 0");
    require(schedule == "cosine", "SamplerConfig: unknown schedule " + schedule);
  }
};

// Classifier-free guidance: g = (1 + s) * c - s * u, elementwise.
inline Matd cfg_combine(const Matd& c, const Matd& u, double s) {
  require(c.rows() == u.rows() && c.cols() == u.cols(), "cfg_combine: shape mismatch");
  return (1.0 + s) * c - s * u;
}

struct SamplerState {
  vq::TokenGrid grid;
  Mati committed;      // l x 3; committed entries are never MASK
  Index step_index = 0;
  Veci init_masked;    // per column, MASK count at the start of the run
  Veci pre_committed;  // per column, positions given as committed up front
};

template <class S>
class Sampler {
 public:
  Sampler(gen::MaskedGenerator<S>& model, SamplerConfig cfg) : model_(model), cfg_(cfg) {
    cfg_.validate();
  }

  const SamplerConfig& config() const { return cfg_; }

  SamplerState init_state(const vq::TokenGrid& start) const {
    start.validate();
    SamplerState st;
    st.grid = start;
    const Index l = start.length();
    st.committed = Mati::Zero(l, 3);
    st.init_masked = Veci::Zero(3);
    st.pre_committed = Veci::Zero(3);
    for (Index p = 0; p < 3; ++p)
      for (Index t = 0; t < l; ++t) {
        if (start.tokens(t, p) == start.mask_id()) {
          st.init_masked(p)++;
        } else {
          st.committed(t, p) = 1;
          st.pre_committed(p)++;
        }
      }
    return st;
  }

  // One iteration: predict all masked tokens in parallel under CFG, fill,
  // score with the critic, keep the schedule's quota of best-scoring new
  // positions per column and re-mask the rest. Committed positions never
  // change. When the schedule's quota would make no progress, the single
  // best-scoring candidate is committed anyway so the MASK count strictly
  // decreases.
  void sample_step(SamplerState& st, const gen::ConditionBundle& cond, Rng& rng) {
    const Index l = st.grid.length();
    const int mask = st.grid.mask_id();

    // conditional + unconditional logits
    nn::Graph<S> g;
    auto cond_logits = model_.forward_logits(g, {st.grid}, {cond});
    gen::ConditionBundle uncond = cond;
    uncond.text_dropped = true;
    uncond.audio_dropped = true;
    auto uncond_logits = model_.forward_logits(g, {st.grid}, {uncond});

    std::array<Matd, 3> guided;
    for (Index p = 0; p < 3; ++p)
      guided[static_cast<std::size_t>(p)] =
          cfg_combine(cond_logits[0][static_cast<std::size_t>(p)]->value.template cast<double>(),
                      uncond_logits[0][static_cast<std::size_t>(p)]->value.template cast<double>(),
                      cfg_.cfg_scale);

    // temperature sampling at currently-masked positions
    vq::TokenGrid filled = st.grid;
    std::array<Matd, 3> probs;
    for (Index p = 0; p < 3; ++p) {
      Matd pm(st.grid.K, l);
      for (Index t = 0; t < l; ++t) {
        Vecd col = guided[static_cast<std::size_t>(p)].col(t) / cfg_.temperature;
        col.array() -= col.maxCoeff();
        col = col.array().exp();
        col /= col.sum();
        pm.col(t) = col;
      }
      probs[static_cast<std::size_t>(p)] = std::move(pm);
    }
    for (Index p = 0; p < 3; ++p)
      for (Index t = 0; t < l; ++t) {
        if (st.grid.tokens(t, p) != mask) continue;
        const double r = rng.uniform();
        double acc = 0.0;
        int pick = st.grid.K - 1;
        for (int k = 0; k < st.grid.K; ++k) {
          acc += probs[static_cast<std::size_t>(p)](k, t);
          if (r < acc) {
            pick = k;
            break;
          }
        }
        filled.tokens(t, p) = pick;
      }

    // score the fully filled grid
    Matd scores(l, 3);
    if (cfg_.use_critic) {
      nn::Graph<S> gc;
      auto sc = model_.forward_critic(gc, {filled}, {cond});
      for (Index p = 0; p < 3; ++p)
        for (Index t = 0; t < l; ++t)
          scores(t, p) = static_cast<double>(sc[0]->value(0, p * l + t));
    } else {
      for (Index p = 0; p < 3; ++p)
        for (Index t = 0; t < l; ++t)
          scores(t, p) = probs[static_cast<std::size_t>(p)](filled.tokens(t, p), t);
    }

    // per-column keep/remask under the cosine schedule over the initial
    // MASK count of the run
    const double tau = static_cast<double>(st.step_index + 1) / static_cast<double>(cfg_.steps);
    for (Index p = 0; p < 3; ++p) {
      Index cur_committed = 0;
      for (Index t = 0; t < l; ++t) cur_committed += st.committed(t, p);
      Index masked_now = 0;
      for (Index t = 0; t < l; ++t)
        if (st.grid.tokens(t, p) == mask) ++masked_now;
      if (masked_now == 0) continue;

      Index target = st.pre_committed(p);
      if (st.init_masked(p) > 0)
        target += st.init_masked(p) - gen::cosine_mask_count(st.init_masked(p), std::min(1.0, tau));
      Index n_new = target - cur_committed;
      if (n_new < 1) n_new = 1;  // forced progress
      if (n_new > masked_now) n_new = masked_now;

      std::vector<Index> cand;
      for (Index t = 0; t < l; ++t)
        if (!st.committed(t, p)) cand.push_back(t);
      std::stable_sort(cand.begin(), cand.end(), [&](Index a, Index b) {
        if (scores(a, p) != scores(b, p)) return scores(a, p) > scores(b, p);
        return a < b;
      });
      for (Index i = 0; i < n_new; ++i) {
        const Index t = cand[static_cast<std::size_t>(i)];
        st.committed(t, p) = 1;
        st.grid.tokens(t, p) = filled.tokens(t, p);
      }
      // everything else stays/reverts to MASK
      for (std::size_t i = static_cast<std::size_t>(n_new); i < cand.size(); ++i)
        st.grid.tokens(cand[i], p) = mask;
    }
    st.step_index++;
  }

  // Run the loop on a grid whose non-MASK entries are treated as committed.
  vq::TokenGrid fill(const vq::TokenGrid& start, const gen::ConditionBundle& cond) {
    SamplerState st = init_state(start);
    Rng rng(cfg_.seed);
    for (Index i = 0; i < cfg_.steps; ++i) {
      if (!st.grid.has_mask()) break;
      sample_step(st, cond, rng);
    }
    require(!st.grid.has_mask(), "sampler: MASK remained after the final step");
    return st.grid;
  }

  vq::TokenGrid generate(const gen::ConditionBundle& cond, Index n_tokens) {
    require(n_tokens >= 1, "generate: n_tokens >= 1");
    require(n_tokens <= model_.config().max_positions,
            "generate: n_tokens exceeds positional capacity");
    return fill(vq::TokenGrid::all_mask(n_tokens, static_cast<int>(model_.config().K)), cond);
  }

  // Long-form extension: the last overlap_tokens rows of prev seed the new
  // window as committed context; returns prev ++ freshly generated rows.
  vq::TokenGrid extend(const vq::TokenGrid& prev, const gen::ConditionBundle& cond,
                       Index n_new_tokens) {
    require(!prev.has_mask(), "extend: prev must be MASK-free");
    require(n_new_tokens >= 1, "extend: n_new_tokens >= 1");
    const Index overlap = cfg_.overlap_tokens;
    require(overlap <= prev.length(), "extend: overlap exceeds previous grid");
    const Index l = overlap + n_new_tokens;
    require(l <= model_.config().max_positions, "extend: window exceeds positional capacity");

    vq::TokenGrid window = vq::TokenGrid::all_mask(l, prev.K);
    for (Index i = 0; i < overlap; ++i)
      for (Index p = 0; p < 3; ++p)
        window.tokens(i, p) = prev.tokens(prev.length() - overlap + i, p);
    vq::TokenGrid filled = fill(window, cond);

    vq::TokenGrid out;
    out.K = prev.K;
    out.tokens.resize(prev.length() + n_new_tokens, 3);
    out.tokens.topRows(prev.length()) = prev.tokens;
    out.tokens.bottomRows(n_new_tokens) = filled.tokens.bottomRows(n_new_tokens);
    return out;
  }

  // Fill the MASK region of a partial grid; given tokens are immutable.
  // A grid without MASK is returned unchanged.
  vq::TokenGrid inpaint(const vq::TokenGrid& partial, const gen::ConditionBundle& cond) {
    if (!partial.has_mask()) return partial;
    return fill(partial, cond);
  }

 private:
  gen::MaskedGenerator<S>& model_;
  SamplerConfig cfg_;
};

}  // namespace mogen::sampler
