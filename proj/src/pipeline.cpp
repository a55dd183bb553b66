#include <filesystem>
#include <fstream>
#include <map>

#include "mogen/io/npy.hpp"
#include "mogen/pipeline/artifacts.hpp"

namespace mogen::pipeline {

using nlohmann::json;

namespace {
using S = TrainScalar;

template <class Model>
void save_params(io::CheckpointWriter& w, Model& model) {
  for (auto* p : model.parameters()) w.add_param(p->name, p->value);
}

template <class Model>
void load_params(const io::CheckpointReader& r, Model& model) {
  for (auto* p : model.parameters()) {
    Matd t = r.tensor(p->name);
    require(t.rows() == p->value.rows() && t.cols() == p->value.cols(),
            "checkpoint: shape mismatch for " + p->name);
    p->value = t.cast<S>();
  }
}

json layout_json(const motion::FeatureLayout& lay) {
  return {{"joint_count", lay.joint_count},
          {"include_rotations", lay.include_rotations},
          {"fps", lay.fps}};
}

motion::FeatureLayout layout_from(const json& j) {
  motion::FeatureLayout lay = motion::build_layout(j.at("joint_count").get<int>(),
                                                   j.at("include_rotations").get<bool>());
  lay.fps = j.at("fps").get<int>();
  return lay;
}

void save_codebook_state(io::CheckpointWriter& w, const std::string& prefix,
                         const vq::Codebook<S>& cb) {
  w.add_tensor_f64(prefix + ".usage_ema", cb.usage_ema);
  w.add_tensor_f64(prefix + ".affine_mean", cb.affine_mean.cast<double>());
  w.add_tensor_f64(prefix + ".affine_std", cb.affine_std.cast<double>());
}

void load_codebook_state(const io::CheckpointReader& r, const std::string& prefix,
                         vq::Codebook<S>& cb) {
  cb.usage_ema = r.tensor(prefix + ".usage_ema");
  cb.affine_mean = r.tensor(prefix + ".affine_mean").cast<S>();
  cb.affine_std = r.tensor(prefix + ".affine_std").cast<S>();
}

}  // namespace

// ---- tokenizers -----------------------------------------------------------

std::string save_tokenizers(const std::string& path, TokenizerArtifact& art) {
  io::CheckpointWriter w("tokenizers");
  w.set_config(art.config_echo);
  json meta = art.meta;
  meta["layout"] = layout_json(art.set.layout);
  w.set_meta(meta);
  w.add_tensor_f64("stats.mean", art.set.stats.mean);
  w.add_tensor_f64("stats.std", art.set.stats.std);
  for (int p = 0; p < 3; ++p) {
    save_params(w, art.set.part(p));
    save_codebook_state(w, art.set.part(p).name() + ".cbstate", art.set.part(p).codebook);
  }
  art.content_hash = w.write(path);
  return art.content_hash;
}

TokenizerArtifact load_tokenizers(const std::string& path) {
  io::CheckpointReader r(path, "tokenizers");
  TokenizerArtifact art;
  art.config_echo = r.config();
  art.meta = r.meta();
  art.content_hash = r.content_hash();
  RunConfig cfg = RunConfig::from_json(r.config());

  art.set.layout = layout_from(r.meta().at("layout"));
  art.set.stats.mean = r.tensor("stats.mean");
  art.set.stats.std = r.tensor("stats.std");
  art.set.dataset_hash = r.meta().at("dataset_hash").get<std::string>();

  motion::PartColumns cols = motion::part_columns(art.set.layout);
  const Index dims[3] = {static_cast<Index>(cols.body.size()),
                         static_cast<Index>(cols.lhand.size()),
                         static_cast<Index>(cols.rhand.size())};
  const char* names[3] = {"body", "lhand", "rhand"};
  for (int p = 0; p < 3; ++p) {
    Rng rng(0);  // values are overwritten from the checkpoint
    auto model = std::make_unique<vq::VqVae<S>>(names[p], dims[p],
                                                cfg.vq.part_config(p != 0), rng);
    load_params(r, *model);
    load_codebook_state(r, model->name() + ".cbstate", model->codebook);
    if (p == 0)
      art.set.body = std::move(model);
    else if (p == 1)
      art.set.lhand = std::move(model);
    else
      art.set.rhand = std::move(model);
  }
  return art;
}

// ---- generator --------------------------------------------------------------

std::string save_generator(const std::string& path, GeneratorArtifact& art) {
  io::CheckpointWriter w("generator");
  w.set_config(art.config_echo);
  w.set_meta(art.meta);
  save_params(w, *art.model);
  art.content_hash = w.write(path);
  return art.content_hash;
}

GeneratorArtifact load_generator(const std::string& path) {
  io::CheckpointReader r(path, "generator");
  GeneratorArtifact art;
  art.config_echo = r.config();
  art.meta = r.meta();
  art.content_hash = r.content_hash();
  RunConfig cfg = RunConfig::from_json(r.config());
  gen::GeneratorConfig gcfg = cfg.generator.model;
  gcfg.K = cfg.vq.K;
  gcfg.train_seq_tokens = r.meta().at("train_seq_tokens").get<Index>();
  Rng rng(0);
  art.model = std::make_unique<gen::MaskedGenerator<S>>(gcfg, rng);
  load_params(r, *art.model);
  return art;
}

// ---- gmp ---------------------------------------------------------------------

std::string save_gmp(const std::string& path, GmpArtifact& art) {
  io::CheckpointWriter w("gmp");
  w.set_config(art.config_echo);
  w.set_meta(art.meta);
  save_params(w, *art.model);
  art.content_hash = w.write(path);
  return art.content_hash;
}

GmpArtifact load_gmp(const std::string& path) {
  io::CheckpointReader r(path, "gmp");
  GmpArtifact art;
  art.config_echo = r.config();
  art.meta = r.meta();
  art.content_hash = r.content_hash();
  RunConfig cfg = RunConfig::from_json(r.config());
  Rng rng(0);
  art.model = std::make_unique<gmp::GlobalMotionPredictor<S>>(cfg.gmp.model, rng);
  load_params(r, *art.model);
  return art;
}

// ---- retrieval ------------------------------------------------------------------

std::string save_retrieval(const std::string& path, RetrievalArtifact& art) {
  io::CheckpointWriter w("retrieval");
  w.set_config(art.config_echo);
  w.set_meta(art.meta);
  save_params(w, *art.model);
  art.content_hash = w.write(path);
  return art.content_hash;
}

RetrievalArtifact load_retrieval(const std::string& path) {
  io::CheckpointReader r(path, "retrieval");
  RetrievalArtifact art;
  art.config_echo = r.config();
  art.meta = r.meta();
  art.content_hash = r.content_hash();
  RunConfig cfg = RunConfig::from_json(r.config());
  eval::RetrievalConfig rcfg = cfg.retrieval.model;
  rcfg.d_t = cfg.conditioning.d_t;
  rcfg.d_motion = r.tensor("ret.m.conv1.w").cols() / 3;
  Rng rng(0);
  art.model = std::make_unique<eval::RetrievalModel<S>>(rcfg, rng);
  load_params(r, *art.model);
  return art;
}

// ---- generation -------------------------------------------------------------------

GenerateJob parse_job(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw MissingArtifact("job: cannot open " + path);
  json j;
  try {
    f >> j;
  } catch (const std::exception& e) {
    throw ConfigError("job: parse error: " + std::string(e.what()));
  }
  GenerateJob job;
  for (const auto& [key, value] : j.items()) {
    if (key != "text" && key != "texts" && key != "audio" && key != "audio_sample_rate" &&
        key != "duration_s" && key != "seed" && key != "sampler")
      throw ConfigError("job: unknown field '" + key + "'");
    (void)value;
  }
  if (j.contains("text") && j.contains("texts"))
    throw ConfigError("job: give either 'text' or 'texts', not both");
  if (j.contains("text")) {
    if (!j.at("text").is_string()) throw ConfigError("job: field 'text' must be a string");
    job.texts = {j.at("text").get<std::string>()};
  } else if (j.contains("texts")) {
    if (!j.at("texts").is_array() || j.at("texts").size() != 3)
      throw ConfigError("job: field 'texts' must be an array of 3 per-part prompts");
    for (const auto& t : j.at("texts")) job.texts.push_back(t.get<std::string>());
  }
  if (j.contains("audio")) {
    if (!j.at("audio").is_string()) throw ConfigError("job: field 'audio' must be a path");
    job.audio_path = j.at("audio").get<std::string>();
  }
  if (j.contains("audio_sample_rate")) {
    if (!j.at("audio_sample_rate").is_number_integer())
      throw ConfigError("job: field 'audio_sample_rate' must be an integer");
    job.audio_sample_rate = j.at("audio_sample_rate").get<int>();
  }
  if (j.contains("duration_s")) {
    if (!j.at("duration_s").is_number())
      throw ConfigError("job: field 'duration_s' must be a number");
    job.duration_s = j.at("duration_s").get<double>();
    if (job.duration_s <= 0) throw ConfigError("job: field 'duration_s' must be positive");
  }
  if (j.contains("seed")) job.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("sampler")) {
    if (!j.at("sampler").is_object())
      throw ConfigError("job: field 'sampler' must be an object");
    job.sampler_overrides = j.at("sampler");
  }
  return job;
}

GeneratedMotion generate_motion(const RunConfig& cfg, const GenerateJob& job,
                                TokenizerArtifact& tok, GeneratorArtifact& generator,
                                GmpArtifact& gmp_art,
                                const motion::NormalizationStats& stats) {
  // incompatible checkpoint pairs are rejected before any compute
  const std::string bound_tok = generator.meta.value("tokenizer_hash", "");
  if (!bound_tok.empty() && !tok.content_hash.empty() && bound_tok != tok.content_hash)
    throw InvalidArgument("generate: generator is bound to tokenizer " + bound_tok +
                          " but " + tok.content_hash + " is loaded");
  const std::string tok_ds = tok.meta.value("dataset_hash", "");
  const std::string gmp_ds = gmp_art.meta.value("dataset_hash", "");
  if (!tok_ds.empty() && !gmp_ds.empty() && tok_ds != gmp_ds)
    throw InvalidArgument(
        "generate: GMP normalization comes from dataset " + gmp_ds +
        " but the tokenizers were trained on " + tok_ds);

  const Index ds_factor = tok.set.body->config().downsample;
  const Index n_frames = std::max<Index>(
      ds_factor, static_cast<Index>(std::lround(job.duration_s * 30.0)));
  const Index n_tokens = (n_frames + ds_factor - 1) / ds_factor;

  sampler::SamplerConfig scfg = cfg.sampler;
  if (!job.sampler_overrides.empty()) {
    json merged = cfg.to_json()["sampler"];
    merged.merge_patch(job.sampler_overrides);
    json full = cfg.to_json();
    full["sampler"] = merged;
    scfg = RunConfig::from_json(full).sampler;
  }
  scfg.seed = job.seed;

  // conditioning: text prompts through the stub, audio at token rate
  cond::HashedTextStub text_stub(cfg.conditioning.d_t, cfg.conditioning.text_table_seed);
  gen::ConditionBundle cond_full;
  if (job.texts.size() == 1) {
    cond_full.text_tokens = {text_stub.embed(job.texts[0]).tokens};
  } else if (job.texts.size() == 3) {
    for (const auto& t : job.texts) cond_full.text_tokens.push_back(text_stub.embed(t).tokens);
  } else if (!job.texts.empty()) {
    throw ConfigError("generate: prompts must be 1 shared or 3 per-part");
  } else {
    cond_full.text_dropped = true;
  }

  Matd audio_tok;  // n_tokens x d_a
  if (!job.audio_path.empty()) {
    Matd wave_m = io::load_npy(job.audio_path);
    std::vector<float> wave(static_cast<std::size_t>(wave_m.size()));
    for (Index i = 0; i < wave_m.rows(); ++i)
      for (Index c = 0; c < wave_m.cols(); ++c)
        wave[static_cast<std::size_t>(i * wave_m.cols() + c)] =
            static_cast<float>(wave_m(i, c));
    cond::EnergyAudioStub audio_stub(cfg.conditioning.d_a);
    cond::AudioEmbedding emb = audio_stub.embed(wave, job.audio_sample_rate);
    // tile 30 Hz embedding frames cyclically to cover the whole motion
    const Index need = n_tokens * ds_factor;
    if (emb.frames.rows() < need) {
      Matd tiled(need, emb.frames.cols());
      for (Index i = 0; i < need; ++i) tiled.row(i) = emb.frames.row(i % emb.frames.rows());
      emb.frames = std::move(tiled);
    }
    audio_tok = cond::align_audio_to_tokens(emb, n_tokens, ds_factor);
  } else {
    cond_full.audio_dropped = true;
  }

  auto window_cond = [&](Index start, Index len) {
    gen::ConditionBundle c = cond_full;
    if (!cond_full.audio_dropped) c.audio_tokens = audio_tok.middleRows(start, len);
    return c;
  };

  sampler::Sampler<S> smp(*generator.model, scfg);
  const Index window = generator.model->config().train_seq_tokens;
  const Index first = std::min(window, n_tokens);
  vq::TokenGrid grid = smp.generate(window_cond(0, first), first);
  while (grid.length() < n_tokens) {
    const Index overlap = scfg.overlap_tokens;
    const Index n_new = std::min(window - overlap, n_tokens - grid.length());
    gen::ConditionBundle wc = window_cond(grid.length() - overlap, overlap + n_new);
    grid = smp.extend(grid, wc, n_new);
  }

  // decode and re-attach the root plane velocities
  motion::PartSplit parts = tok.set.detokenize(grid, n_frames);
  motion::MotionSequence local =
      motion::merge_parts(parts, Vecd::Zero(n_frames), Vecd::Zero(n_frames), tok.set.layout);
  // binary contacts from the decoded stream
  const auto cspan = tok.set.layout.span("c");
  for (Index i = 0; i < n_frames; ++i)
    for (Index k = 0; k < cspan.length; ++k)
      local.data(i, cspan.start + k) = local.data(i, cspan.start + k) >= 0.5 ? 1.0 : 0.0;

  Matd norm = stats.apply(local.data);
  const auto jp = tok.set.layout.span("j_p");
  const auto jv = tok.set.layout.span("j_v");
  const Index n_body_p = (motion::joints::kBodyCount - 1) * 3;
  const Index n_body_v = motion::joints::kBodyCount * 3;
  Matd vel_norm = gmp_art.model->predict(norm.middleCols(jp.start, n_body_p),
                                         norm.middleCols(jv.start, n_body_v),
                                         norm.middleCols(cspan.start, 4));
  const Index rx = tok.set.layout.span("r_x").start;
  const Index rz = tok.set.layout.span("r_z").start;
  Matd vel_raw(n_frames, 2);
  vel_raw.col(0) = vel_norm.col(0) * stats.std(rx) + Vecd::Constant(n_frames, stats.mean(rx));
  vel_raw.col(1) = vel_norm.col(1) * stats.std(rz) + Vecd::Constant(n_frames, stats.mean(rz));

  GeneratedMotion gm;
  gm.motion = gmp::attach_translation(local, vel_raw);
  gm.motion.validate();
  gm.tokens = grid;
  const auto& lay = tok.set.layout;
  gm.trajectory = motion::integrate_root(
      gm.motion.data.col(lay.span("r_a").start), gm.motion.data.col(rx),
      gm.motion.data.col(rz), gm.motion.data.col(lay.span("r_y").start));
  gm.world_joints = motion::world_from_features(gm.motion);

  gm.provenance = {{"job",
                    {{"texts", job.texts},
                     {"audio", job.audio_path},
                     {"duration_s", job.duration_s},
                     {"seed", job.seed}}},
                   {"tokenizer_hash", tok.content_hash},
                   {"generator_hash", generator.content_hash},
                   {"gmp_hash", gmp_art.content_hash},
                   {"sampler",
                    {{"steps", scfg.steps},
                     {"cfg_scale", scfg.cfg_scale},
                     {"temperature", scfg.temperature},
                     {"overlap_tokens", scfg.overlap_tokens},
                     {"use_critic", scfg.use_critic}}},
                   {"frames", n_frames},
                   {"fps", 30},
                   {"config", cfg.to_json()}};
  return gm;
}

void save_generated(const std::string& dir, const GeneratedMotion& gm) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  io::save_npy_f32(dir + "/motion.npy", gm.motion.data);
  io::save_npy(dir + "/tokens.npy", gm.tokens.tokens);
  io::save_npy_f32(dir + "/trajectory.npy", gm.trajectory);
  json sidecar = gm.provenance;
  sidecar["layout"] = layout_json(gm.motion.layout);
  sidecar["d_m"] = gm.motion.layout.d_m;
  std::ofstream f(dir + "/motion.json");
  f << sidecar.dump(2);
}

// ---- evaluation ----------------------------------------------------------------

bool validate_metric_report(const json& report, std::string* error) {
  auto fail = [&](const std::string& msg) {
    if (error) *error = msg;
    return false;
  };
  for (const char* key : {"version", "metrics", "config", "checkpoint_hashes", "seeds"})
    if (!report.contains(key)) return fail(std::string("missing key: ") + key);
  const auto& m = report.at("metrics");
  for (const char* key : {"fid", "r_precision_top1", "r_precision_top2", "r_precision_top3",
                          "mm_dist", "diversity", "mmodality", "perplexity"})
    if (!m.contains(key)) return fail(std::string("missing metric: ") + key);
  for (const char* key : {"fid", "r_precision_top1", "r_precision_top2", "r_precision_top3",
                          "mm_dist", "diversity"})
    if (!m.at(key).is_number()) return fail(std::string("metric not numeric: ") + key);
  if (!m.at("mmodality").is_number() && !m.at("mmodality").is_null())
    return fail("mmodality must be numeric or null");
  const auto& pp = m.at("perplexity");
  for (const char* key : {"body", "lhand", "rhand"})
    if (!pp.contains(key) || !pp.at(key).is_number())
      return fail(std::string("missing perplexity: ") + key);
  const double t1 = m.at("r_precision_top1").get<double>();
  const double t2 = m.at("r_precision_top2").get<double>();
  const double t3 = m.at("r_precision_top3").get<double>();
  if (!(t1 >= 0 && t1 <= 1 && t2 >= 0 && t2 <= 1 && t3 >= 0 && t3 <= 1))
    return fail("r_precision out of [0,1]");
  if (t1 > t2 + 1e-12 || t2 > t3 + 1e-12) return fail("r_precision not monotone in k");
  if (m.at("fid").get<double>() < 0) return fail("fid negative");
  return true;
}

json evaluate_pipeline(const RunConfig& cfg, const motion::Dataset& test,
                       TokenizerArtifact& tok, RetrievalArtifact& retr,
                       const EvaluationInputs& gen) {
  // hash chain: retrieval and tokenizers must come from the same dataset
  const std::string tok_ds = tok.meta.at("dataset_hash").get<std::string>();
  const std::string ret_ds = retr.meta.at("dataset_hash").get<std::string>();
  if (tok_ds != ret_ds)
    throw InvalidArgument("evaluate: dataset hash mismatch between tokenizers (" + tok_ds +
                          ") and retrieval model (" + ret_ds + ")");

  cond::HashedTextStub text_stub(cfg.conditioning.d_t, cfg.conditioning.text_table_seed);
  auto& model = *retr.model;

  // real set features
  const Index n_real = std::min<Index>(cfg.eval.n_eval,
                                       static_cast<Index>(test.clips.size()));
  require(n_real >= 2, "evaluate: need at least 2 real clips");
  Matd real_feats(n_real, retr.model->config().joint_dim);
  for (Index i = 0; i < n_real; ++i)
    real_feats.row(i) =
        model.embed_motion(test.stats.apply(test.clips[static_cast<std::size_t>(i)].motion.data));

  // generated set features + prompt features
  std::string generator_hash;
  std::vector<std::string> prompts;
  Matd gen_feats(static_cast<Index>(gen.generated_dirs.size()),
                 retr.model->config().joint_dim);
  std::map<std::string, std::vector<Index>> by_prompt;
  for (std::size_t i = 0; i < gen.generated_dirs.size(); ++i) {
    const std::string dir = gen.generated_dirs[i];
    std::ifstream f(dir + "/motion.json");
    if (!f) throw MissingArtifact("evaluate: missing sidecar in " + dir);
    json sidecar;
    f >> sidecar;
    const std::string gtok = sidecar.at("tokenizer_hash").get<std::string>();
    if (gtok != tok.content_hash)
      throw InvalidArgument("evaluate: generated motion in " + dir +
                            " was produced with tokenizer " + gtok +
                            ", expected " + tok.content_hash);
    if (generator_hash.empty())
      generator_hash = sidecar.at("generator_hash").get<std::string>();
    Matd data = io::load_npy(dir + "/motion.npy");
    gen_feats.row(static_cast<Index>(i)) = model.embed_motion(test.stats.apply(data));
    const auto texts = sidecar.at("job").at("texts").get<std::vector<std::string>>();
    const std::string prompt = texts.empty() ? std::string() : texts[0];
    prompts.push_back(prompt);
    by_prompt[prompt].push_back(static_cast<Index>(i));
  }

  json metrics;
  const Index n_gen = gen_feats.rows();
  require(n_gen >= 2, "evaluate: need at least 2 generated motions");
  metrics["fid"] = eval::fid(gen_feats, real_feats);
  metrics["diversity"] = eval::diversity(gen_feats, cfg.eval.diversity_pairs, cfg.seed);

  Matd prompt_feats(n_gen, retr.model->config().joint_dim);
  std::map<std::string, RowVecX<double>> text_cache;
  for (Index i = 0; i < n_gen; ++i) {
    auto it = text_cache.find(prompts[static_cast<std::size_t>(i)]);
    if (it == text_cache.end())
      it = text_cache
               .emplace(prompts[static_cast<std::size_t>(i)],
                        model.embed_text(
                            text_stub.embed(prompts[static_cast<std::size_t>(i)]).tokens))
               .first;
    prompt_feats.row(i) = it->second;
  }
  metrics["mm_dist"] = eval::mm_dist(gen_feats, prompt_feats);
  if (n_gen >= 32) {
    metrics["r_precision_top1"] = eval::r_precision(gen_feats, prompt_feats, 1, cfg.seed);
    metrics["r_precision_top2"] = eval::r_precision(gen_feats, prompt_feats, 2, cfg.seed);
    metrics["r_precision_top3"] = eval::r_precision(gen_feats, prompt_feats, 3, cfg.seed);
  } else {
    throw InvalidArgument(
        "evaluate: r_precision needs at least 32 generated motions, got " +
        std::to_string(n_gen));
  }

  std::vector<Matd> groups;
  for (const auto& [prompt, idx] : by_prompt) {
    if (idx.size() < 2) continue;
    Matd gfeat(static_cast<Index>(idx.size()), gen_feats.cols());
    for (std::size_t k = 0; k < idx.size(); ++k) gfeat.row(static_cast<Index>(k)) = gen_feats.row(idx[k]);
    groups.push_back(std::move(gfeat));
  }
  if (!groups.empty())
    metrics["mmodality"] = eval::mmodality(groups, cfg.eval.mmodality_pairs, cfg.seed);
  else
    metrics["mmodality"] = nullptr;

  // tokenizer perplexity over the real test set
  VqEval vqe = evaluate_tokenizers(tok.set, test);
  metrics["perplexity"] = {{"body", vqe.perplexity_body},
                           {"lhand", vqe.perplexity_lhand},
                           {"rhand", vqe.perplexity_rhand}};

  json report;
  report["version"] = 1;
  report["metrics"] = metrics;
  report["config"] = cfg.to_json();
  report["seeds"] = {{"eval", cfg.seed}};
  report["checkpoint_hashes"] = {{"tokenizers", tok.content_hash},
                                 {"retrieval", retr.content_hash},
                                 {"generator", generator_hash}};
  report["counts"] = {{"real", n_real}, {"generated", n_gen}};
  std::string err;
  if (!validate_metric_report(report, &err))
    throw NumericError("evaluate: report failed schema validation: " + err);
  return report;
}

}  // namespace mogen::pipeline
