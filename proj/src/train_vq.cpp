#include <array>
#include <fstream>
#include <iostream>

#include "mogen/nn/optimizer.hpp"
#include "mogen/pipeline/artifacts.hpp"

namespace mogen::pipeline {

namespace {

using S = TrainScalar;

struct PartStreams {
  std::vector<MatX<S>> clips;  // d x L, normalized
  Index d = 0;
};

std::array<PartStreams, 3> prepare_streams(const motion::Dataset& ds) {
  std::array<PartStreams, 3> out;
  for (const auto& clip : ds.clips) {
    motion::MotionSequence norm;
    norm.layout = ds.layout;
    norm.data = ds.stats.apply(clip.motion.data);
    motion::PartSplit parts = motion::split_parts(norm);
    const Matd* streams[3] = {&parts.body, &parts.lhand, &parts.rhand};
    for (int p = 0; p < 3; ++p) {
      out[static_cast<std::size_t>(p)].clips.push_back(
          streams[p]->transpose().cast<S>());
      out[static_cast<std::size_t>(p)].d = streams[p]->cols();
    }
  }
  return out;
}

// Commit-only step graph: encoder forward, no decoder.
nn::Node<S>* commit_forward(nn::Graph<S>& g, vq::VqVae<S>& model, const MatX<S>& x,
                            MatX<S>* latents_out, std::vector<Index>* idx_out) {
  auto* ze = model.encode(g, g.constant(x));
  *latents_out = ze->value;
  const MatX<S> eff = model.codebook.effective();
  *idx_out = vq::quantize_indices<S>(ze->value, eff);
  const MatX<S> zq = vq::gather_codes<S>(eff, *idx_out);
  return nn::mse(g, ze, g.constant(zq));
}

void train_one_part(vq::VqVae<S>& model, const PartStreams& data, const RunConfig& cfg,
                    Rng& rng, TrainLog* log, const std::string& part_name,
                    bool resumed) {
  const auto& tcfg = cfg.vq.train;
  const Index window = std::min<Index>(cfg.vq.train_window,
                                       data.clips.front().cols());
  require(window % cfg.vq.downsample == 0, "train_vq: window must be divisible");

  nn::LrSchedule sched;
  sched.base_lr = tcfg.lr;
  sched.warmup_steps = tcfg.warmup;
  sched.total_steps = tcfg.steps;
  sched.min_lr_ratio = tcfg.min_lr_ratio;
  nn::Adam<S> opt(model.parameters(), sched);

  auto sample_window = [&](Rng& r) -> MatX<S> {
    const auto& clip = data.clips[static_cast<std::size_t>(r.uniform_int(
        static_cast<Index>(data.clips.size())))];
    const Index max_start = clip.cols() - window;
    Index start = max_start > 0 ? r.uniform_int(max_start + 1) : 0;
    start -= start % cfg.vq.downsample;
    return clip.middleCols(start, window);
  };

  // k-means initialization from the untrained encoder's latents
  if (cfg.vq.use_kmeans_init && !resumed) {
    const Index l_per = window / cfg.vq.downsample;
    const Index need = model.config().K * 3 / 2;
    std::vector<MatX<S>> lat;
    Index have = 0;
    while (have < need) {
      nn::Graph<S> g;
      auto* ze = model.encode(g, g.constant(sample_window(rng)));
      lat.push_back(ze->value);
      have += l_per;
    }
    MatX<S> all(model.config().d_c, have);
    Index off = 0;
    for (const auto& m : lat) {
      all.middleCols(off, m.cols()) = m;
      off += m.cols();
    }
    if (model.codebook.affine_enabled) model.codebook.update_affine(all, 0.0);
    Rng krng = rng.split(0x6b6d65616e73ULL);
    vq::kmeans_init_codebook(model.codebook, all, krng);
  }

  const Index l_per_window = window / cfg.vq.downsample;
  const Index batch_tokens = tcfg.batch * l_per_window;
  const double stale_threshold =
      cfg.vq.stale_threshold_ratio * static_cast<double>(batch_tokens) /
      static_cast<double>(model.config().K);

  for (Index step = 0; step < tcfg.steps; ++step) {
    const bool commit_step = cfg.vq.alternate_optimization && (step % 2 == 1);
    nn::Graph<S> g;
    std::vector<nn::Node<S>*> losses;
    std::vector<S> weights;
    Veci hist = Veci::Zero(model.config().K);
    MatX<S> all_latents(model.config().d_c, batch_tokens);
    double rec_sum = 0, cb_sum = 0, commit_sum = 0;

    for (Index b = 0; b < tcfg.batch; ++b) {
      const MatX<S> x = sample_window(rng);
      if (commit_step) {
        MatX<S> lat;
        std::vector<Index> idx;
        auto* commit = commit_forward(g, model, x, &lat, &idx);
        losses.push_back(commit);
        weights.push_back(S(model.config().beta) / S(tcfg.batch));
        commit_sum += commit->value(0, 0);
        all_latents.middleCols(b * l_per_window, l_per_window) = lat;
        for (Index i : idx) hist(i)++;
      } else {
        auto fwd = vq::vq_training_forward(g, model, x);
        losses.push_back(fwd.losses.reconstruction);
        weights.push_back(S(1) / S(tcfg.batch));
        losses.push_back(fwd.losses.codebook);
        weights.push_back(S(1) / S(tcfg.batch));
        if (!cfg.vq.alternate_optimization) {
          // single-objective mode carries the commit term too
          losses.push_back(fwd.losses.commit);
          weights.push_back(S(model.config().beta) / S(tcfg.batch));
        }
        rec_sum += fwd.losses.reconstruction->value(0, 0);
        cb_sum += fwd.losses.codebook->value(0, 0);
        commit_sum += fwd.losses.commit->value(0, 0);
        all_latents.middleCols(b * l_per_window, l_per_window) = fwd.latents;
        for (Index i : fwd.indices) hist(i)++;
      }
    }
    auto* total = nn::weighted_sum<S>(g, losses, weights);
    opt.zero_grad();
    g.backward(total);
    opt.step();

    // codebook maintenance
    const double ud = model.config().usage_decay;
    for (Index k = 0; k < model.config().K; ++k)
      model.codebook.usage_ema(k) =
          ud * model.codebook.usage_ema(k) + (1.0 - ud) * static_cast<double>(hist(k));
    if (model.codebook.affine_enabled)
      model.codebook.update_affine(all_latents, cfg.vq.affine_decay);
    if (cfg.vq.stale_check_interval > 0 && step > 0 &&
        step % cfg.vq.stale_check_interval == 0) {
      Rng srng = rng.split(0x57a1e + static_cast<std::uint64_t>(step));
      vq::replace_stale_codes(model.codebook, all_latents, srng, stale_threshold);
    }

    if (log && step % 10 == 0) {
      const double perp = vq::perplexity(hist.cwiseMax(0));
      log->add({static_cast<double>(step), rec_sum / tcfg.batch, cb_sum / tcfg.batch,
                commit_sum / tcfg.batch, perp});
    }
    if (step % 100 == 0) {
      std::cerr << "[train-vq:" << part_name << "] step " << step << "/" << tcfg.steps
                << " rec " << rec_sum / tcfg.batch << " cb " << cb_sum / tcfg.batch
                << "\n";
    }
  }
}

}  // namespace

void TrainLog::save_csv(const std::string& path) const {
  std::ofstream f(path);
  for (std::size_t i = 0; i < columns.size(); ++i)
    f << columns[i] << (i + 1 < columns.size() ? ',' : '\n');
  for (const auto& row : rows)
    for (std::size_t i = 0; i < row.size(); ++i)
      f << row[i] << (i + 1 < row.size() ? ',' : '\n');
}

TokenizerArtifact train_tokenizers(const RunConfig& cfg, const motion::Dataset& train,
                                   const motion::Dataset& test, TrainLog* log,
                                   TokenizerArtifact* resume) {
  auto streams = prepare_streams(train);
  TokenizerArtifact art;
  art.set.layout = train.layout;
  art.set.stats = train.stats;
  art.set.dataset_hash = train.content_hash;
  if (log) log->columns = {"step", "reconstruction", "codebook", "commit", "perplexity"};

  Rng master(cfg.seed);
  const char* names[3] = {"body", "lhand", "rhand"};
  for (int p = 0; p < 3; ++p) {
    Rng rng = master.split(static_cast<std::uint64_t>(p) + 1);
    auto part_cfg = cfg.vq.part_config(p != 0);
    auto model = std::make_unique<vq::VqVae<S>>(names[p], streams[static_cast<std::size_t>(p)].d,
                                                part_cfg, rng);
    if (resume) {
      copy_parameters(*model, resume->set.part(p));
      model->codebook.usage_ema = resume->set.part(p).codebook.usage_ema;
      model->codebook.affine_mean = resume->set.part(p).codebook.affine_mean;
      model->codebook.affine_std = resume->set.part(p).codebook.affine_std;
    }
    train_one_part(*model, streams[static_cast<std::size_t>(p)], cfg, rng, log, names[p],
                   resume != nullptr);
    if (p == 0)
      art.set.body = std::move(model);
    else if (p == 1)
      art.set.lhand = std::move(model);
    else
      art.set.rhand = std::move(model);
  }

  VqEval ev = evaluate_tokenizers(art.set, test);
  art.config_echo = cfg.to_json();
  art.meta = {{"dataset_hash", train.content_hash},
              {"mse_body", ev.mse_body},
              {"mse_lhand", ev.mse_lhand},
              {"mse_rhand", ev.mse_rhand},
              {"mse_overall", ev.mse_overall},
              {"perplexity_body", ev.perplexity_body},
              {"perplexity_lhand", ev.perplexity_lhand},
              {"perplexity_rhand", ev.perplexity_rhand}};
  return art;
}

VqEval evaluate_tokenizers(vq::TokenizerSet<S>& set, const motion::Dataset& test) {
  VqEval ev;
  std::array<double, 3> sq{0, 0, 0};
  std::array<double, 3> count{0, 0, 0};
  std::array<Veci, 3> hist;
  for (int p = 0; p < 3; ++p) hist[static_cast<std::size_t>(p)] = Veci::Zero(set.part(p).config().K);

  for (const auto& clip : test.clips) {
    motion::MotionSequence norm;
    norm.layout = test.layout;
    norm.data = set.stats.apply(clip.motion.data);
    motion::PartSplit parts = motion::split_parts(norm);
    const Matd* streams[3] = {&parts.body, &parts.lhand, &parts.rhand};
    for (int p = 0; p < 3; ++p) {
      MatX<S> x = vq::TokenizerSet<S>::pad_to_multiple(
          streams[p]->transpose().cast<S>(), set.part(p).config().downsample);
      auto idx = vq::encode_to_indices(set.part(p), x);
      MatX<S> xhat = vq::decode_from_indices(set.part(p), idx);
      const Index L = streams[p]->rows();
      sq[static_cast<std::size_t>(p)] +=
          (xhat.leftCols(L) - x.leftCols(L)).template cast<double>().squaredNorm();
      count[static_cast<std::size_t>(p)] += static_cast<double>(L * x.rows());
      for (Index i : idx) hist[static_cast<std::size_t>(p)](i)++;
    }
  }
  ev.mse_body = sq[0] / count[0];
  ev.mse_lhand = sq[1] / count[1];
  ev.mse_rhand = sq[2] / count[2];
  ev.mse_overall = (sq[0] + sq[1] + sq[2]) / (count[0] + count[1] + count[2]);
  ev.perplexity_body = vq::perplexity(hist[0]);
  ev.perplexity_lhand = vq::perplexity(hist[1]);
  ev.perplexity_rhand = vq::perplexity(hist[2]);
  return ev;
}

}  // namespace mogen::pipeline
