#pragma once

#include <memory>
#include <string>
#include <vector>

#include "mogen/cond/conditioning.hpp"
#include "mogen/eval/metrics.hpp"
#include "mogen/eval/retrieval.hpp"
#include "mogen/gen/generator.hpp"
#include "mogen/gmp/gmp.hpp"
#include "mogen/io/checkpoint.hpp"
#include "mogen/motion/dataset_io.hpp"
#include "mogen/pipeline/config.hpp"
#include "mogen/sampler/sampler.hpp"
#include "mogen/vq/vqvae.hpp"

namespace mogen::pipeline {

// Training runs in float; gradient-check tests instantiate the same models in
// double.
using TrainScalar = float;

struct TrainLog {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;

  void add(std::vector<double> row) { rows.push_back(std::move(row)); }
  void save_csv(const std::string& path) const;
};

// ---- tokenizers ------------------------------------------------------------

struct TokenizerArtifact {
  vq::TokenizerSet<TrainScalar> set;
  nlohmann::json config_echo;
  nlohmann::json meta;
  std::string content_hash;
};

TokenizerArtifact train_tokenizers(const RunConfig& cfg, const motion::Dataset& train,
                                   const motion::Dataset& test, TrainLog* log,
                                   TokenizerArtifact* resume = nullptr);
std::string save_tokenizers(const std::string& path, TokenizerArtifact& art);
TokenizerArtifact load_tokenizers(const std::string& path);

// Mean squared reconstruction error over normalized features, per part and
// pooled, plus code-usage perplexities.
struct VqEval {
  double mse_body = 0, mse_lhand = 0, mse_rhand = 0, mse_overall = 0;
  double perplexity_body = 0, perplexity_lhand = 0, perplexity_rhand = 0;
};
VqEval evaluate_tokenizers(vq::TokenizerSet<TrainScalar>& set,
                           const motion::Dataset& test);

// ---- generator --------------------------------------------------------------

struct GeneratorArtifact {
  std::unique_ptr<gen::MaskedGenerator<TrainScalar>> model;
  nlohmann::json config_echo;
  nlohmann::json meta;  // tokenizer_hash, dataset_hash, losses
  std::string content_hash;
};

GeneratorArtifact train_generator(const RunConfig& cfg, const motion::Dataset& train,
                                  TokenizerArtifact& tok, const std::string& tokenizer_hash,
                                  TrainLog* log, GeneratorArtifact* resume = nullptr);
std::string save_generator(const std::string& path, GeneratorArtifact& art);
GeneratorArtifact load_generator(const std::string& path);

// ---- global motion predictor -------------------------------------------------

struct GmpArtifact {
  std::unique_ptr<gmp::GlobalMotionPredictor<TrainScalar>> model;
  nlohmann::json config_echo;
  nlohmann::json meta;
  std::string content_hash;
};

GmpArtifact train_gmp(const RunConfig& cfg, const motion::Dataset& train, TrainLog* log,
                      GmpArtifact* resume = nullptr);
std::string save_gmp(const std::string& path, GmpArtifact& art);
GmpArtifact load_gmp(const std::string& path);

// ---- retrieval ----------------------------------------------------------------

struct RetrievalArtifact {
  std::unique_ptr<eval::RetrievalModel<TrainScalar>> model;
  nlohmann::json config_echo;
  nlohmann::json meta;
  std::string content_hash;
};

RetrievalArtifact train_retrieval(const RunConfig& cfg, const motion::Dataset& train,
                                  const motion::Dataset& test, TrainLog* log,
                                  RetrievalArtifact* resume = nullptr);
std::string save_retrieval(const std::string& path, RetrievalArtifact& art);
RetrievalArtifact load_retrieval(const std::string& path);

// Copy parameter values by name from a prior model instance (training resume).
template <class ModelA, class ModelB>
void copy_parameters(ModelA& dst, ModelB& src) {
  auto dst_ps = dst.parameters();
  auto src_ps = src.parameters();
  require(dst_ps.size() == src_ps.size(), "resume: parameter count mismatch");
  for (std::size_t i = 0; i < dst_ps.size(); ++i) {
    require(dst_ps[i]->name == src_ps[i]->name, "resume: parameter order mismatch");
    require(dst_ps[i]->value.rows() == src_ps[i]->value.rows() &&
                dst_ps[i]->value.cols() == src_ps[i]->value.cols(),
            "resume: shape mismatch for " + dst_ps[i]->name);
    dst_ps[i]->value = src_ps[i]->value;
  }
}

// ---- generation jobs ------------------------------------------------------------

struct GenerateJob {
  std::vector<std::string> texts;  // 1 shared or 3 per-part prompts
  std::string audio_path;          // .npy waveform, optional
  int audio_sample_rate = 4000;
  double duration_s = 4.0;
  std::uint64_t seed = 0;
  nlohmann::json sampler_overrides = nlohmann::json::object();
};

GenerateJob parse_job(const std::string& path);

struct GeneratedMotion {
  motion::MotionSequence motion;
  vq::TokenGrid tokens;
  Matd trajectory;    // L x 3 world root
  Matd world_joints;  // L x 52*3
  nlohmann::json provenance;
};

// conditioning -> sampler (windowed for long durations) -> detokenize ->
// root-velocity prediction -> world trajectory.
GeneratedMotion generate_motion(const RunConfig& cfg, const GenerateJob& job,
                                TokenizerArtifact& tok, GeneratorArtifact& generator,
                                GmpArtifact& gmp_art,
                                const motion::NormalizationStats& stats);

void save_generated(const std::string& dir, const GeneratedMotion& gm);

// ---- evaluation -------------------------------------------------------------------

struct EvaluationInputs {
  std::vector<std::string> generated_dirs;  // one motion artifact dir each
};

nlohmann::json evaluate_pipeline(const RunConfig& cfg, const motion::Dataset& test,
                                 TokenizerArtifact& tok, RetrievalArtifact& retr,
                                 const EvaluationInputs& gen);

// Minimal structural validation of a metric report against the published
// schema (docs/metric_report.schema.json).
bool validate_metric_report(const nlohmann::json& report, std::string* error = nullptr);

}  // namespace mogen::pipeline
