#include <iostream>
#include <map>

#include "mogen/gen/schedule.hpp"
#include "mogen/nn/optimizer.hpp"
#include "mogen/pipeline/artifacts.hpp"

namespace mogen::pipeline {

namespace {
using S = TrainScalar;

struct GenExample {
  vq::TokenGrid grid;
  gen::ConditionBundle cond;  // pre-dropout
};

std::vector<GenExample> prepare_examples(const RunConfig& cfg, const motion::Dataset& ds,
                                         vq::TokenizerSet<S>& tok) {
  cond::HashedTextStub text_stub(cfg.conditioning.d_t, cfg.conditioning.text_table_seed);
  cond::EnergyAudioStub audio_stub(cfg.conditioning.d_a);
  std::map<std::string, Matd> text_cache;
  std::vector<GenExample> out;
  out.reserve(ds.clips.size());
  for (const auto& clip : ds.clips) {
    GenExample ex;
    ex.grid = tok.tokenize(clip.motion);
    auto it = text_cache.find(clip.text);
    if (it == text_cache.end())
      it = text_cache.emplace(clip.text, text_stub.embed(clip.text).tokens).first;
    ex.cond.text_tokens = {it->second};
    auto audio = audio_stub.embed(clip.audio, clip.audio_sample_rate);
    ex.cond.audio_tokens = cond::align_audio_to_tokens(audio, ex.grid.length(),
                                                       tok.body->config().downsample);
    out.push_back(std::move(ex));
  }
  return out;
}

}  // namespace

GeneratorArtifact train_generator(const RunConfig& cfg, const motion::Dataset& train,
                                  TokenizerArtifact& tok, const std::string& tokenizer_hash,
                                  TrainLog* log, GeneratorArtifact* resume) {
  auto examples = prepare_examples(cfg, train, tok.set);
  require(!examples.empty(), "train_generator: empty dataset");

  gen::GeneratorConfig gcfg = cfg.generator.model;
  gcfg.K = tok.set.body->config().K;
  gcfg.train_seq_tokens = examples.front().grid.length();
  gcfg.d_t = cfg.conditioning.d_t;
  gcfg.d_a = cfg.conditioning.d_a;

  Rng master(cfg.seed);
  Rng init_rng = master.split(0x67656e);
  GeneratorArtifact art;
  art.model = std::make_unique<gen::MaskedGenerator<S>>(gcfg, init_rng);
  if (resume) copy_parameters(*art.model, *resume->model);
  auto& model = *art.model;

  const auto& tcfg = cfg.generator.train;
  nn::LrSchedule sched;
  sched.base_lr = tcfg.lr;
  sched.warmup_steps = tcfg.warmup;
  sched.total_steps = tcfg.steps;
  sched.min_lr_ratio = tcfg.min_lr_ratio;
  nn::Adam<S> opt(model.parameters(), sched);

  Rng rng = master.split(0x747261696e);
  if (log) log->columns = {"step", "mlm", "critic"};
  double last_mlm = 0, last_critic = 0;
  // tail averages give a stable estimate of the final training losses
  const Index tail_from = tcfg.steps - std::max<Index>(1, tcfg.steps / 10);
  double tail_mlm = 0, tail_critic = 0;
  Index tail_n = 0;

  for (Index step = 0; step < tcfg.steps; ++step) {
    std::vector<vq::TokenGrid> masked_grids, target_grids;
    std::vector<Mati> masks;
    std::vector<gen::ConditionBundle> bundles;
    for (Index b = 0; b < tcfg.batch; ++b) {
      const auto& ex = examples[static_cast<std::size_t>(rng.uniform_int(
          static_cast<Index>(examples.size())))];
      const double tau = rng.uniform();
      auto mr = gen::apply_random_mask(ex.grid, tau, rng);
      masked_grids.push_back(std::move(mr.masked));
      masks.push_back(std::move(mr.mask));
      target_grids.push_back(ex.grid);
      bundles.push_back(gen::condition_dropout(ex.cond, gcfg.cond_drop_prob, rng));
    }

    nn::Graph<S> g;
    auto logits = model.forward_logits(g, masked_grids, bundles);
    auto* mlm = gen::mlm_loss(g, logits, target_grids, masks);

    // fill the masked slots from the generator's own predictions
    std::vector<vq::TokenGrid> filled = masked_grids;
    std::vector<Mati> real_labels;
    const bool argmax = gcfg.critic_fill_mode == "argmax";
    for (std::size_t b = 0; b < filled.size(); ++b) {
      const Index l = filled[b].length();
      Mati y = Mati::Ones(l, 3);
      for (Index p = 0; p < 3; ++p) {
        const auto& lg = logits[b][static_cast<std::size_t>(p)]->value;
        for (Index t = 0; t < l; ++t) {
          if (!masks[b](t, p)) continue;
          y(t, p) = 0;
          if (argmax) {
            Index best;
            lg.col(t).maxCoeff(&best);
            filled[b].tokens(t, p) = static_cast<int>(best);
          } else {
            VecX<S> col = lg.col(t);
            col.array() -= col.maxCoeff();
            VecX<S> probs = col.array().exp();
            probs /= probs.sum();
            const double r = rng.uniform();
            double acc = 0.0;
            int pick = static_cast<int>(gcfg.K) - 1;
            for (Index k = 0; k < gcfg.K; ++k) {
              acc += static_cast<double>(probs(k));
              if (r < acc) {
                pick = static_cast<int>(k);
                break;
              }
            }
            filled[b].tokens(t, p) = pick;
          }
        }
      }
      real_labels.push_back(std::move(y));
    }

    auto scores = model.forward_critic(g, filled, bundles);
    auto* closs = gen::critic_loss(g, scores, real_labels);
    auto* total = nn::weighted_sum<S>(g, {mlm, closs},
                                      {S(1), S(gcfg.critic_loss_weight)});
    opt.zero_grad();
    g.backward(total);
    opt.step();

    last_mlm = mlm->value(0, 0);
    last_critic = closs->value(0, 0);
    if (step >= tail_from) {
      tail_mlm += last_mlm;
      tail_critic += last_critic;
      ++tail_n;
    }
    if (log && step % 10 == 0)
      log->add({static_cast<double>(step), last_mlm, last_critic});
    if (step % 100 == 0)
      std::cerr << "[train-gen] step " << step << "/" << tcfg.steps << " mlm " << last_mlm
                << " critic " << last_critic << "\n";
  }

  art.config_echo = cfg.to_json();
  art.meta = {{"tokenizer_hash", tokenizer_hash},
              {"dataset_hash", train.content_hash},
              {"final_mlm", tail_n > 0 ? tail_mlm / static_cast<double>(tail_n) : last_mlm},
              {"final_critic",
               tail_n > 0 ? tail_critic / static_cast<double>(tail_n) : last_critic},
              {"train_seq_tokens", gcfg.train_seq_tokens}};
  return art;
}

}  // namespace mogen::pipeline
