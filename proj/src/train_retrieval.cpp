#include <iostream>
#include <map>

#include "mogen/nn/optimizer.hpp"
#include "mogen/pipeline/artifacts.hpp"

namespace mogen::pipeline {

namespace {
using S = TrainScalar;
}

RetrievalArtifact train_retrieval(const RunConfig& cfg, const motion::Dataset& train,
                                  const motion::Dataset& test, TrainLog* log,
                                  RetrievalArtifact* resume) {
  require(!train.clips.empty(), "train_retrieval: empty dataset");
  cond::HashedTextStub text_stub(cfg.conditioning.d_t, cfg.conditioning.text_table_seed);

  // label ids by text; the contrastive loss masks same-label collisions
  std::map<std::string, Index> label_ids;
  std::vector<Index> labels;
  std::vector<Matd> texts;
  std::vector<Matd> motions;  // normalized
  for (const auto& clip : train.clips) {
    auto [it, fresh] = label_ids.try_emplace(clip.text,
                                             static_cast<Index>(label_ids.size()));
    labels.push_back(it->second);
    texts.push_back(text_stub.embed(clip.text).tokens);
    motions.push_back(train.stats.apply(clip.motion.data));
  }
  require(label_ids.size() >= 2, "train_retrieval: need at least 2 distinct labels");

  eval::RetrievalConfig rcfg = cfg.retrieval.model;
  rcfg.d_motion = train.layout.d_m;
  rcfg.d_t = cfg.conditioning.d_t;

  Rng master(cfg.seed);
  Rng init_rng = master.split(0x726574);
  RetrievalArtifact art;
  art.model = std::make_unique<eval::RetrievalModel<S>>(rcfg, init_rng);
  if (resume) copy_parameters(*art.model, *resume->model);
  auto& model = *art.model;

  const auto& tcfg = cfg.retrieval.train;
  nn::LrSchedule sched;
  sched.base_lr = tcfg.lr;
  sched.warmup_steps = tcfg.warmup;
  sched.total_steps = tcfg.steps;
  sched.min_lr_ratio = tcfg.min_lr_ratio;
  nn::Adam<S> opt(model.parameters(), sched);

  Rng rng = master.split(0x72657472);
  if (log) log->columns = {"step", "info_nce"};
  double last = 0;

  for (Index step = 0; step < tcfg.steps; ++step) {
    nn::Graph<S> g;
    std::vector<nn::Node<S>*> zm, zt;
    std::vector<Index> batch_labels;
    for (Index b = 0; b < tcfg.batch; ++b) {
      const Index i = rng.uniform_int(static_cast<Index>(motions.size()));
      zm.push_back(model.encode_motion(g, motions[static_cast<std::size_t>(i)]));
      zt.push_back(model.encode_text(g, texts[static_cast<std::size_t>(i)]));
      batch_labels.push_back(labels[static_cast<std::size_t>(i)]);
    }
    auto* loss = eval::info_nce(g, nn::concat_cols(g, zm), nn::concat_cols(g, zt),
                                batch_labels, rcfg.temperature);
    opt.zero_grad();
    g.backward(loss);
    opt.step();
    last = loss->value(0, 0);
    if (log && step % 10 == 0) log->add({static_cast<double>(step), last});
    if (step % 100 == 0)
      std::cerr << "[train-retrieval] step " << step << "/" << tcfg.steps << " loss "
                << last << "\n";
  }

  // held-out retrieval accuracy over batches of 32
  double top1 = -1;
  if (static_cast<Index>(test.clips.size()) >= 32) {
    Matd mfeat(static_cast<Index>(test.clips.size()), rcfg.joint_dim);
    Matd tfeat(static_cast<Index>(test.clips.size()), rcfg.joint_dim);
    for (std::size_t i = 0; i < test.clips.size(); ++i) {
      mfeat.row(static_cast<Index>(i)) =
          model.embed_motion(test.stats.apply(test.clips[i].motion.data));
      tfeat.row(static_cast<Index>(i)) =
          model.embed_text(text_stub.embed(test.clips[i].text).tokens);
    }
    top1 = eval::r_precision(mfeat, tfeat, 1, cfg.seed);
  }

  art.config_echo = cfg.to_json();
  art.meta = {{"dataset_hash", train.content_hash},
              {"final_loss", last},
              {"test_top1", top1}};
  return art;
}

}  // namespace mogen::pipeline
