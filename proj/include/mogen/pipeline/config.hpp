#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "mogen/eval/retrieval.hpp"
#include "mogen/gen/generator.hpp"
#include "mogen/gmp/gmp.hpp"
#include "mogen/motion/synthetic.hpp"
#include "mogen/sampler/sampler.hpp"
#include "mogen/vq/vqvae.hpp"

namespace mogen::pipeline {

struct TrainOptions {
  Index steps = 600;
  Index batch = 16;
  double lr = 3e-4;
  Index warmup = 1000;
  double min_lr_ratio = 0.05;
};

// One resolved run configuration. Every artifact echoes the JSON form of the
// config that produced it; loading rejects unknown keys so typos fail fast.
struct RunConfig {
  std::uint64_t seed = 1000;

  struct DatasetCfg {
    int n_clips = 2000;
    int n_test_clips = 250;
    int clip_len_frames = 120;
    double contact_threshold = motion::kDefaultContactThreshold;
  } dataset;

  struct VqCfg {
    Index K = 512;
    Index d_c_body = 512;
    Index d_c_hand = 256;
    Index downsample = 4;
    double beta = 0.25;
    Index encoder_depth = 4;
    Index encoder_width = 128;
    double huber_delta = 1.0;
    bool affine_enabled = true;
    bool scalar_affine = false;
    double affine_decay = 0.99;
    double stale_threshold_ratio = 0.03;
    Index stale_check_interval = 200;
    double usage_decay = 0.9;
    bool use_kmeans_init = true;
    bool alternate_optimization = true;
    Index train_window = 64;
    TrainOptions train{900, 16, 3e-4, 100, 0.05};

    vq::VqConfig part_config(bool hand) const {
      vq::VqConfig c;
      c.K = K;
      c.d_c = hand ? d_c_hand : d_c_body;
      c.downsample = downsample;
      c.beta = beta;
      c.encoder_depth = encoder_depth;
      c.encoder_width = encoder_width;
      c.huber_delta = huber_delta;
      c.affine_enabled = affine_enabled;
      c.scalar_affine = scalar_affine;
      c.affine_decay = affine_decay;
      c.stale_threshold_ratio = stale_threshold_ratio;
      c.stale_check_interval = stale_check_interval;
      c.usage_decay = usage_decay;
      c.use_kmeans_init = use_kmeans_init;
      c.alternate_optimization = alternate_optimization;
      return c;
    }
  } vq;

  struct CondCfg {
    Index d_t = 64;
    Index d_a = 64;
    std::uint64_t text_table_seed = 0x7461626c65ULL;
  } conditioning;

  struct GenCfg {
    gen::GeneratorConfig model;
    TrainOptions train{1200, 12, 3e-4, 100, 0.05};
  } generator;

  struct GmpCfg {
    gmp::GmpConfig model;
    Index train_window = 32;
    TrainOptions train{800, 24, 3e-4, 100, 0.05};
  } gmp;

  struct RetrievalCfg {
    eval::RetrievalConfig model;
    TrainOptions train{500, 24, 1e-3, 50, 0.05};
  } retrieval;

  sampler::SamplerConfig sampler;

  struct EvalCfg {
    Index n_eval = 250;
    Index diversity_pairs = 300;
    Index mmodality_repeats = 0;  // >1 enables the MModality metric
    Index mmodality_pairs = 10;
  } eval;

  nlohmann::json to_json() const;
  static RunConfig from_json(const nlohmann::json& j);

  // Load defaults, merge an optional config file, then apply key=value
  // overrides (dotted paths, JSON literals on the right-hand side).
  static RunConfig load(const std::string& config_path,
                        const std::vector<std::string>& overrides);
};

}  // namespace mogen::pipeline
