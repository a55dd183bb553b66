#include "mogen/pipeline/config.hpp"

#include <fstream>

namespace mogen::pipeline {

using nlohmann::json;

namespace {

void check_known_keys(const json& j, const std::vector<std::string>& known,
                      const std::string& where) {
  for (const auto& [key, value] : j.items()) {
    bool ok = false;
    for (const auto& k : known)
      if (k == key) ok = true;
    if (!ok) throw ConfigError("config: unknown key '" + where + key + "'");
  }
}

template <class T>
void get(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

json RunConfig::to_json() const {
  json j;
  j["seed"] = seed;
  j["dataset"] = {{"n_clips", dataset.n_clips},
                  {"n_test_clips", dataset.n_test_clips},
                  {"clip_len_frames", dataset.clip_len_frames},
                  {"contact_threshold", dataset.contact_threshold}};
  j["vq"] = {{"K", vq.K},
             {"d_c_body", vq.d_c_body},
             {"d_c_hand", vq.d_c_hand},
             {"downsample", vq.downsample},
             {"beta", vq.beta},
             {"encoder_depth", vq.encoder_depth},
             {"encoder_width", vq.encoder_width},
             {"huber_delta", vq.huber_delta},
             {"affine_enabled", vq.affine_enabled},
             {"scalar_affine", vq.scalar_affine},
             {"affine_decay", vq.affine_decay},
             {"stale_threshold_ratio", vq.stale_threshold_ratio},
             {"usage_decay", vq.usage_decay},
             {"stale_check_interval", vq.stale_check_interval},
             {"use_kmeans_init", vq.use_kmeans_init},
             {"alternate_optimization", vq.alternate_optimization},
             {"train_window", vq.train_window},
             {"steps", vq.train.steps},
             {"batch", vq.train.batch},
             {"lr", vq.train.lr},
             {"warmup", vq.train.warmup}};
  j["conditioning"] = {{"d_t", conditioning.d_t},
                       {"d_a", conditioning.d_a},
                       {"text_table_seed", conditioning.text_table_seed}};
  j["generator"] = {{"n_blocks", generator.model.n_blocks},
                    {"width", generator.model.width},
                    {"heads", generator.model.heads},
                    {"film_every", generator.model.film_every},
                    {"cond_drop_prob", generator.model.cond_drop_prob},
                    {"train_seq_tokens", generator.model.train_seq_tokens},
                    {"max_positions", generator.model.max_positions},
                    {"K", generator.model.K},
                    {"ffn_mult", generator.model.ffn_mult},
                    {"audio_width", generator.model.audio_width},
                    {"input_interpolation", generator.model.input_interpolation},
                    {"critic_fill_mode", generator.model.critic_fill_mode},
                    {"critic_loss_weight", generator.model.critic_loss_weight},
                    {"steps", generator.train.steps},
                    {"batch", generator.train.batch},
                    {"lr", generator.train.lr},
                    {"warmup", generator.train.warmup}};
  j["gmp"] = {{"n_layers", gmp.model.n_layers},
              {"width", gmp.model.width},
              {"heads", gmp.model.heads},
              {"loss", gmp.model.loss},
              {"aux_position_weight", gmp.model.aux_position_weight},
              {"use_contacts", gmp.model.use_contacts},
              {"train_window", gmp.train_window},
              {"steps", gmp.train.steps},
              {"batch", gmp.train.batch},
              {"lr", gmp.train.lr},
              {"warmup", gmp.train.warmup}};
  j["retrieval"] = {{"joint_dim", retrieval.model.joint_dim},
                    {"width", retrieval.model.width},
                    {"temperature", retrieval.model.temperature},
                    {"steps", retrieval.train.steps},
                    {"batch", retrieval.train.batch},
                    {"lr", retrieval.train.lr},
                    {"warmup", retrieval.train.warmup}};
  j["sampler"] = {{"steps", sampler.steps},
                  {"cfg_scale", sampler.cfg_scale},
                  {"temperature", sampler.temperature},
                  {"overlap_tokens", sampler.overlap_tokens},
                  {"seed", sampler.seed},
                  {"schedule", sampler.schedule},
                  {"use_critic", sampler.use_critic}};
  j["eval"] = {{"n_eval", eval.n_eval},
               {"diversity_pairs", eval.diversity_pairs},
               {"mmodality_repeats", eval.mmodality_repeats},
               {"mmodality_pairs", eval.mmodality_pairs}};
  return j;
}

RunConfig RunConfig::from_json(const json& j) {
  RunConfig c;
  check_known_keys(j, {"seed", "dataset", "vq", "conditioning", "generator", "gmp",
                       "retrieval", "sampler", "eval"}, "");
  get(j, "seed", c.seed);
  if (j.contains("dataset")) {
    const auto& d = j.at("dataset");
    check_known_keys(d, {"n_clips", "n_test_clips", "clip_len_frames", "contact_threshold"},
                     "dataset.");
    get(d, "n_clips", c.dataset.n_clips);
    get(d, "n_test_clips", c.dataset.n_test_clips);
    get(d, "clip_len_frames", c.dataset.clip_len_frames);
    get(d, "contact_threshold", c.dataset.contact_threshold);
  }
  if (j.contains("vq")) {
    const auto& v = j.at("vq");
    check_known_keys(v,
                     {"K", "d_c_body", "d_c_hand", "downsample", "beta", "encoder_depth",
                      "encoder_width", "huber_delta", "affine_enabled", "scalar_affine",
                      "affine_decay", "stale_threshold_ratio", "stale_check_interval", "usage_decay",
                      "use_kmeans_init", "alternate_optimization", "train_window", "steps",
                      "batch", "lr", "warmup"},
                     "vq.");
    get(v, "K", c.vq.K);
    get(v, "d_c_body", c.vq.d_c_body);
    get(v, "d_c_hand", c.vq.d_c_hand);
    get(v, "downsample", c.vq.downsample);
    get(v, "beta", c.vq.beta);
    get(v, "encoder_depth", c.vq.encoder_depth);
    get(v, "encoder_width", c.vq.encoder_width);
    get(v, "huber_delta", c.vq.huber_delta);
    get(v, "affine_enabled", c.vq.affine_enabled);
    get(v, "scalar_affine", c.vq.scalar_affine);
    get(v, "affine_decay", c.vq.affine_decay);
    get(v, "stale_threshold_ratio", c.vq.stale_threshold_ratio);
    get(v, "usage_decay", c.vq.usage_decay);
    get(v, "stale_check_interval", c.vq.stale_check_interval);
    get(v, "use_kmeans_init", c.vq.use_kmeans_init);
    get(v, "alternate_optimization", c.vq.alternate_optimization);
    get(v, "train_window", c.vq.train_window);
    get(v, "steps", c.vq.train.steps);
    get(v, "batch", c.vq.train.batch);
    get(v, "lr", c.vq.train.lr);
    get(v, "warmup", c.vq.train.warmup);
  }
  if (j.contains("conditioning")) {
    const auto& v = j.at("conditioning");
    check_known_keys(v, {"d_t", "d_a", "text_table_seed"}, "conditioning.");
    get(v, "d_t", c.conditioning.d_t);
    get(v, "d_a", c.conditioning.d_a);
    get(v, "text_table_seed", c.conditioning.text_table_seed);
  }
  if (j.contains("generator")) {
    const auto& v = j.at("generator");
    check_known_keys(v,
                     {"n_blocks", "width", "heads", "film_every", "cond_drop_prob",
                      "train_seq_tokens", "max_positions", "K", "ffn_mult", "audio_width",
                      "input_interpolation", "critic_fill_mode", "critic_loss_weight",
                      "steps", "batch", "lr", "warmup"},
                     "generator.");
    get(v, "n_blocks", c.generator.model.n_blocks);
    get(v, "width", c.generator.model.width);
    get(v, "heads", c.generator.model.heads);
    get(v, "film_every", c.generator.model.film_every);
    get(v, "cond_drop_prob", c.generator.model.cond_drop_prob);
    get(v, "train_seq_tokens", c.generator.model.train_seq_tokens);
    get(v, "max_positions", c.generator.model.max_positions);
    get(v, "K", c.generator.model.K);
    get(v, "ffn_mult", c.generator.model.ffn_mult);
    get(v, "audio_width", c.generator.model.audio_width);
    get(v, "input_interpolation", c.generator.model.input_interpolation);
    get(v, "critic_fill_mode", c.generator.model.critic_fill_mode);
    get(v, "critic_loss_weight", c.generator.model.critic_loss_weight);
    get(v, "steps", c.generator.train.steps);
    get(v, "batch", c.generator.train.batch);
    get(v, "lr", c.generator.train.lr);
    get(v, "warmup", c.generator.train.warmup);
  }
  if (j.contains("gmp")) {
    const auto& v = j.at("gmp");
    check_known_keys(v, {"n_layers", "width", "heads", "loss", "aux_position_weight",
                         "use_contacts", "train_window", "steps", "batch", "lr", "warmup"},
                     "gmp.");
    get(v, "n_layers", c.gmp.model.n_layers);
    get(v, "width", c.gmp.model.width);
    get(v, "heads", c.gmp.model.heads);
    get(v, "loss", c.gmp.model.loss);
    get(v, "aux_position_weight", c.gmp.model.aux_position_weight);
    get(v, "use_contacts", c.gmp.model.use_contacts);
    get(v, "train_window", c.gmp.train_window);
    get(v, "steps", c.gmp.train.steps);
    get(v, "batch", c.gmp.train.batch);
    get(v, "lr", c.gmp.train.lr);
    get(v, "warmup", c.gmp.train.warmup);
  }
  if (j.contains("retrieval")) {
    const auto& v = j.at("retrieval");
    check_known_keys(v, {"joint_dim", "width", "temperature", "steps", "batch", "lr",
                         "warmup"},
                     "retrieval.");
    get(v, "joint_dim", c.retrieval.model.joint_dim);
    get(v, "width", c.retrieval.model.width);
    get(v, "temperature", c.retrieval.model.temperature);
    get(v, "steps", c.retrieval.train.steps);
    get(v, "batch", c.retrieval.train.batch);
    get(v, "lr", c.retrieval.train.lr);
    get(v, "warmup", c.retrieval.train.warmup);
  }
  if (j.contains("sampler")) {
    const auto& v = j.at("sampler");
    check_known_keys(v, {"steps", "cfg_scale", "temperature", "overlap_tokens", "seed",
                         "schedule", "use_critic"},
                     "sampler.");
    get(v, "steps", c.sampler.steps);
    get(v, "cfg_scale", c.sampler.cfg_scale);
    get(v, "temperature", c.sampler.temperature);
    get(v, "overlap_tokens", c.sampler.overlap_tokens);
    get(v, "seed", c.sampler.seed);
    get(v, "schedule", c.sampler.schedule);
    get(v, "use_critic", c.sampler.use_critic);
  }
  if (j.contains("eval")) {
    const auto& v = j.at("eval");
    check_known_keys(v, {"n_eval", "diversity_pairs", "mmodality_repeats", "mmodality_pairs"},
                     "eval.");
    get(v, "n_eval", c.eval.n_eval);
    get(v, "diversity_pairs", c.eval.diversity_pairs);
    get(v, "mmodality_repeats", c.eval.mmodality_repeats);
    get(v, "mmodality_pairs", c.eval.mmodality_pairs);
  }
  // keep derived fields coherent
  c.generator.model.d_t = c.conditioning.d_t;
  c.generator.model.d_a = c.conditioning.d_a;
  c.retrieval.model.d_t = c.conditioning.d_t;
  c.sampler.validate();
  c.gmp.model.validate();
  return c;
}

RunConfig RunConfig::load(const std::string& config_path,
                          const std::vector<std::string>& overrides) {
  json j = RunConfig().to_json();
  if (!config_path.empty()) {
    std::ifstream f(config_path);
    if (!f) throw ConfigError("config: cannot open " + config_path);
    json file_j;
    try {
      f >> file_j;
    } catch (const std::exception& e) {
      throw ConfigError("config: parse error in " + config_path + ": " + e.what());
    }
    // validate against the full schema before merging
    RunConfig::from_json(file_j);
    j.merge_patch(file_j);
  }
  for (const std::string& ov : overrides) {
    const auto eq = ov.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config: override must be key=value, got '" + ov + "'");
    std::string path = "/" + ov.substr(0, eq);
    for (auto& ch : path)
      if (ch == '.') ch = '/';
    const std::string raw = ov.substr(eq + 1);
    json value;
    try {
      value = json::parse(raw);
    } catch (...) {
      value = raw;  // plain string
    }
    json::json_pointer ptr(path);
    if (!j.contains(ptr)) throw ConfigError("config: unknown override key '" + ov + "'");
    j[ptr] = value;
  }
  return RunConfig::from_json(j);
}

}  // namespace mogen::pipeline
