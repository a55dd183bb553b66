#include <iostream>

#include "mogen/nn/optimizer.hpp"
#include "mogen/pipeline/artifacts.hpp"

namespace mogen::pipeline {

namespace {
using S = TrainScalar;

struct GmpClip {
  Matd j_p;      // L x 63, normalized body-joint positions
  Matd j_v;      // L x 66, normalized body-joint velocities
  Matd contacts; // L x 4
  MatX<S> vel;   // 2 x L, normalized (r_x, r_z) targets
};

std::vector<GmpClip> prepare(const motion::Dataset& ds) {
  std::vector<GmpClip> out;
  const auto& lay = ds.layout;
  const auto jp = lay.span("j_p"), jv = lay.span("j_v"), cs = lay.span("c");
  const Index n_body_p = (motion::joints::kBodyCount - 1) * 3;
  const Index n_body_v = motion::joints::kBodyCount * 3;
  for (const auto& clip : ds.clips) {
    Matd norm = ds.stats.apply(clip.motion.data);
    GmpClip g;
    g.j_p = norm.middleCols(jp.start, n_body_p);
    g.j_v = norm.middleCols(jv.start, n_body_v);
    g.contacts = norm.middleCols(cs.start, 4);
    g.vel.resize(2, norm.rows());
    g.vel.row(0) = norm.col(lay.span("r_x").start).transpose().cast<S>();
    g.vel.row(1) = norm.col(lay.span("r_z").start).transpose().cast<S>();
    out.push_back(std::move(g));
  }
  return out;
}

}  // namespace

GmpArtifact train_gmp(const RunConfig& cfg, const motion::Dataset& train, TrainLog* log,
                      GmpArtifact* resume) {
  auto clips = prepare(train);
  require(!clips.empty(), "train_gmp: empty dataset");

  Rng master(cfg.seed);
  Rng init_rng = master.split(0x676d70);
  GmpArtifact art;
  art.model = std::make_unique<gmp::GlobalMotionPredictor<S>>(cfg.gmp.model, init_rng);
  if (resume) copy_parameters(*art.model, *resume->model);
  auto& model = *art.model;

  const auto& tcfg = cfg.gmp.train;
  nn::LrSchedule sched;
  sched.base_lr = tcfg.lr;
  sched.warmup_steps = tcfg.warmup;
  sched.total_steps = tcfg.steps;
  sched.min_lr_ratio = tcfg.min_lr_ratio;
  nn::Adam<S> opt(model.parameters(), sched);

  Rng rng = master.split(0x676d7074);
  const Index window = cfg.gmp.train_window;
  if (log) log->columns = {"step", "loss"};
  double last = 0;

  for (Index step = 0; step < tcfg.steps; ++step) {
    nn::Graph<S> g;
    std::vector<nn::Node<S>*> losses;
    std::vector<S> weights(static_cast<std::size_t>(tcfg.batch), S(1) / S(tcfg.batch));
    for (Index b = 0; b < tcfg.batch; ++b) {
      const auto& clip = clips[static_cast<std::size_t>(rng.uniform_int(
          static_cast<Index>(clips.size())))];
      const Index L = clip.j_p.rows();
      const Index w = std::min(window, L);
      const Index start = L > w ? rng.uniform_int(L - w + 1) : 0;
      auto* pred = model.forward(g, clip.j_p.middleRows(start, w),
                                 clip.j_v.middleRows(start, w),
                                 clip.contacts.middleRows(start, w));
      losses.push_back(gmp::gmp_loss<S>(g, pred, clip.vel.middleCols(start, w),
                                        cfg.gmp.model));
    }
    auto* total = nn::weighted_sum<S>(g, losses, weights);
    opt.zero_grad();
    g.backward(total);
    opt.step();
    last = total->value(0, 0);
    if (log && step % 10 == 0) log->add({static_cast<double>(step), last});
    if (step % 100 == 0)
      std::cerr << "[train-gmp] step " << step << "/" << tcfg.steps << " loss " << last
                << "\n";
  }

  art.config_echo = cfg.to_json();
  art.meta = {{"dataset_hash", train.content_hash}, {"final_loss", last}};
  return art;
}

}  // namespace mogen::pipeline
