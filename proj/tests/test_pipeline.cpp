#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "mogen/pipeline/artifacts.hpp"
#include "mogen/pipeline/render.hpp"

using namespace mogen;
using namespace mogen::pipeline;
namespace fs = std::filesystem;

namespace {

// Desk-scale-in-miniature settings so the full chain runs in seconds.
RunConfig mini_config() {
  RunConfig cfg;
  cfg.seed = 77;
  cfg.dataset.n_clips = 20;
  cfg.dataset.n_test_clips = 12;
  cfg.dataset.clip_len_frames = 32;
  cfg.vq.K = 32;
  cfg.vq.d_c_body = 16;
  cfg.vq.d_c_hand = 8;
  cfg.vq.encoder_width = 16;
  cfg.vq.encoder_depth = 2;
  cfg.vq.train_window = 16;
  cfg.vq.train = {24, 4, 3e-4, 4, 0.05};
  cfg.vq.stale_check_interval = 10;
  cfg.generator.model.n_blocks = 1;
  cfg.generator.model.width = 16;
  cfg.generator.model.heads = 2;
  cfg.generator.model.audio_width = 4;
  cfg.generator.train = {12, 4, 3e-4, 2, 0.05};
  cfg.conditioning.d_t = 8;
  cfg.conditioning.d_a = 8;
  cfg.gmp.model.n_layers = 1;
  cfg.gmp.model.width = 16;
  cfg.gmp.model.heads = 2;
  cfg.gmp.train_window = 16;
  cfg.gmp.train = {12, 4, 3e-4, 2, 0.05};
  cfg.retrieval.model.joint_dim = 8;
  cfg.retrieval.model.width = 16;
  cfg.retrieval.train = {20, 8, 1e-3, 2, 0.05};
  cfg.sampler.steps = 4;
  cfg.sampler.overlap_tokens = 2;
  cfg.eval.n_eval = 12;
  return cfg;
}

}  // namespace

TEST_CASE("config defaults round trip and overrides") {
  RunConfig def;
  RunConfig back = RunConfig::from_json(def.to_json());
  CHECK(back.to_json() == def.to_json());

  SUBCASE("unknown section key rejected") {
    nlohmann::json j = {{"vq", {{"nonsense", 1}}}};
    CHECK_THROWS_AS(RunConfig::from_json(j), ConfigError);
    nlohmann::json j2 = {{"whatever", 1}};
    CHECK_THROWS_AS(RunConfig::from_json(j2), ConfigError);
  }
  SUBCASE("file + overrides") {
    const std::string path = "/tmp/mogen_test_cfg.json";
    std::ofstream f(path);
    f << R"({"vq": {"K": 64}, "sampler": {"steps": 7}})";
    f.close();
    RunConfig cfg = RunConfig::load(
        path, {"vq.beta=0.5", "generator.width=96", "sampler.schedule=cosine"});
    CHECK(cfg.vq.K == 64);
    CHECK(cfg.sampler.steps == 7);
    CHECK(cfg.vq.beta == doctest::Approx(0.5));
    CHECK(cfg.generator.model.width == 96);
    CHECK_THROWS_AS(RunConfig::load(path, {"vq.bogus=1"}), ConfigError);
    CHECK_THROWS_AS(RunConfig::load(path, {"no equals sign"}), ConfigError);
    CHECK_THROWS_AS(RunConfig::load("/tmp/missing_cfg.json", {}), ConfigError);
  }
  SUBCASE("derived conditioning dims propagate") {
    RunConfig cfg = RunConfig::from_json({{"conditioning", {{"d_t", 48}}}});
    CHECK(cfg.generator.model.d_t == 48);
    CHECK(cfg.retrieval.model.d_t == 48);
  }
}

TEST_CASE("job parsing") {
  const std::string path = "/tmp/mogen_test_job.json";
  {
    std::ofstream f(path);
    f << R"({"text": "walk", "duration_s": 2.0, "seed": 5, "sampler": {"steps": 3}})";
  }
  GenerateJob job = parse_job(path);
  CHECK(job.texts.size() == 1);
  CHECK(job.texts[0] == "walk");
  CHECK(job.duration_s == doctest::Approx(2.0));
  CHECK(job.seed == 5);
  CHECK(job.sampler_overrides.at("steps").get<int>() == 3);

  {
    std::ofstream f(path);
    f << R"({"texts": ["walk", "wave", "clap"]})";
  }
  CHECK(parse_job(path).texts.size() == 3);

  {
    std::ofstream f(path);
    f << R"({"text": "walk", "bogus_field": 1})";
  }
  CHECK_THROWS_AS(parse_job(path), ConfigError);
  {
    std::ofstream f(path);
    f << R"({"texts": ["a", "b"]})";
  }
  CHECK_THROWS_AS(parse_job(path), ConfigError);
  {
    std::ofstream f(path);
    f << R"({"duration_s": -2})";
  }
  CHECK_THROWS_AS(parse_job(path), ConfigError);
  CHECK_THROWS_AS(parse_job("/tmp/missing_job.json"), MissingArtifact);
}

TEST_CASE("metric report schema validation") {
  nlohmann::json good = {
      {"version", 1},
      {"metrics",
       {{"fid", 0.5},
        {"r_precision_top1", 0.5},
        {"r_precision_top2", 0.6},
        {"r_precision_top3", 0.7},
        {"mm_dist", 1.0},
        {"diversity", 1.0},
        {"mmodality", nullptr},
        {"perplexity", {{"body", 10.0}, {"lhand", 9.0}, {"rhand", 8.0}}}}},
      {"config", nlohmann::json::object()},
      {"checkpoint_hashes", nlohmann::json::object()},
      {"seeds", nlohmann::json::object()}};
  std::string err;
  CHECK(validate_metric_report(good, &err));

  nlohmann::json bad = good;
  bad["metrics"]["r_precision_top1"] = 0.9;  // breaks monotonicity
  CHECK_FALSE(validate_metric_report(bad, &err));
  CHECK(err == "r_precision not monotone in k");

  bad = good;
  bad["metrics"].erase("fid");
  CHECK_FALSE(validate_metric_report(bad, &err));
}

TEST_CASE("render writes a plausible svg") {
  auto clip = motion::generate_synthetic_clip(3, 0, 40);
  const std::string path = "/tmp/mogen_test_render.svg";
  render_svg_strip(clip.world_joints, path, 6);
  std::ifstream f(path);
  std::string content((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  CHECK(content.find("<svg") != std::string::npos);
  CHECK(content.find("<line") != std::string::npos);
  CHECK(content.size() > 2000);
}

TEST_CASE("cli exit codes and actionable errors") {
  // run the real binary when the test executes from the build tree
  const std::string bin = fs::exists("../mogen") ? "../mogen" : "build/mogen";
  if (!fs::exists(bin)) return;

  auto run = [&](const std::string& cmd, std::string* out = nullptr) {
    const std::string full = bin + " " + cmd + " 2>&1";
    FILE* p = popen(full.c_str(), "r");
    REQUIRE(p != nullptr);
    std::string text;
    char buf[256];
    while (fgets(buf, sizeof(buf), p)) text += buf;
    if (out) *out = text;
    return WEXITSTATUS(pclose(p));
  };

  fs::remove_all("/tmp/mogen_cli_run");
  std::string msg;
  // missing upstream artifact: exit 3 and the message names the fix
  CHECK(run("train-gen --out /tmp/mogen_cli_run", &msg) == 3);
  CHECK(msg.find("mogen synth") != std::string::npos);
  CHECK(run("generate --job /tmp/nonexistent_job.json --out /tmp/mogen_cli_run") == 3);
  // config errors: exit 2
  CHECK(run("synth --out /tmp/mogen_cli_run --set vq.bogus=1") == 2);
  CHECK(run("synth --out /tmp/mogen_cli_run --set seed") == 2);
  // a tiny synth succeeds: exit 0
  CHECK(run("synth --out /tmp/mogen_cli_run --set dataset.n_clips=5 "
            "--set dataset.n_test_clips=5 --set dataset.clip_len_frames=16") == 0);
  // now train-gen still lacks the VQ stage and must name it
  CHECK(run("train-gen --out /tmp/mogen_cli_run", &msg) == 3);
  CHECK(msg.find("mogen train-vq") != std::string::npos);
}

TEST_CASE("miniature end to end chain") {
  RunConfig cfg = mini_config();
  motion::Dataset train = motion::build_dataset(cfg.seed, cfg.dataset.n_clips,
                                                cfg.dataset.clip_len_frames);
  motion::Dataset test = motion::build_dataset(cfg.seed + 1, cfg.dataset.n_test_clips,
                                               cfg.dataset.clip_len_frames);

  // tokenizers
  TokenizerArtifact tok = train_tokenizers(cfg, train, test, nullptr);
  const std::string tok_path = "/tmp/mogen_mini_vq.ckpt";
  save_tokenizers(tok_path, tok);
  TokenizerArtifact tok2 = load_tokenizers(tok_path);
  CHECK(tok2.content_hash == tok.content_hash);
  // loaded model reproduces tokenization bit-exactly
  auto g1 = tok.set.tokenize(train.clips[0].motion);
  auto g2 = tok2.set.tokenize(train.clips[0].motion);
  CHECK(g1.tokens == g2.tokens);
  CHECK(g1.length() == 8);

  // round trip through codes keeps the token ids (encoder/decoder fixed)
  auto parts = tok.set.detokenize(g1);
  CHECK(parts.body.rows() == 32);

  // generator
  GeneratorArtifact genart = train_generator(cfg, train, tok, tok.content_hash, nullptr);
  const std::string gen_path = "/tmp/mogen_mini_gen.ckpt";
  save_generator(gen_path, genart);
  GeneratorArtifact genart2 = load_generator(gen_path);
  CHECK(genart2.meta.at("tokenizer_hash").get<std::string>() == tok.content_hash);

  // gmp + retrieval
  GmpArtifact gmpart = train_gmp(cfg, train, nullptr);
  save_gmp("/tmp/mogen_mini_gmp.ckpt", gmpart);
  GmpArtifact gmpart2 = load_gmp("/tmp/mogen_mini_gmp.ckpt");
  RetrievalArtifact ret = train_retrieval(cfg, train, test, nullptr);
  save_retrieval("/tmp/mogen_mini_ret.ckpt", ret);
  RetrievalArtifact ret2 = load_retrieval("/tmp/mogen_mini_ret.ckpt");

  // loaded checkpoints behave identically
  Matd probe = test.stats.apply(test.clips[0].motion.data);
  CHECK((ret.model->embed_motion(probe) - ret2.model->embed_motion(probe))
            .cwiseAbs()
            .maxCoeff() == 0.0);

  // generation: windowed long-form plus plain
  const std::string gen_root = "/tmp/mogen_mini_gen_out";
  fs::remove_all(gen_root);
  GenerateJob job;
  job.texts = {"walk"};
  job.duration_s = 32.0 / 30.0;
  const char* fams[5] = {"walk", "turn", "wave", "clap", "open and close hands"};
  for (int i = 0; i < 34; ++i) {
    job.seed = static_cast<std::uint64_t>(i);
    job.texts = {fams[i % 5]};
    GeneratedMotion gm = generate_motion(cfg, job, tok2, genart2, gmpart2, tok2.set.stats);
    CHECK(gm.motion.frames() == 32);
    CHECK(gm.motion.data.allFinite());
    CHECK_FALSE(gm.tokens.has_mask());
    save_generated(gen_root + "/g" + std::to_string(i), gm);
  }

  SUBCASE("training resumes from a prior artifact") {
    // zero further steps: the resumed model must carry the prior weights
    RunConfig more = cfg;
    more.gmp.train.steps = 0;
    GmpArtifact continued = train_gmp(more, train, nullptr, &gmpart);
    auto a = continued.model->parameters();
    auto b = gmpart.model->parameters();
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i)
      CHECK((a[i]->value - b[i]->value).cwiseAbs().maxCoeff() == 0.0f);
    // and without resume the fresh init differs
    GmpArtifact fresh = train_gmp(more, train, nullptr);
    CHECK((fresh.model->parameters()[0]->value - b[0]->value).cwiseAbs().maxCoeff() > 0.0f);
  }

  SUBCASE("mismatched checkpoint pairs are rejected") {
    GeneratorArtifact stranger = train_generator(cfg, train, tok, "ffffffffffffffff",
                                                 nullptr);
    CHECK_THROWS_AS(
        generate_motion(cfg, job, tok2, stranger, gmpart2, tok2.set.stats),
        InvalidArgument);
  }

  SUBCASE("determinism: same job, same motion") {
    job.seed = 123;
    GeneratedMotion a = generate_motion(cfg, job, tok2, genart2, gmpart2, tok2.set.stats);
    GeneratedMotion b = generate_motion(cfg, job, tok2, genart2, gmpart2, tok2.set.stats);
    CHECK(a.tokens.tokens == b.tokens.tokens);
    CHECK((a.motion.data - b.motion.data).cwiseAbs().maxCoeff() == 0.0);
  }

  SUBCASE("long-form duration arithmetic") {
    GenerateJob longjob;
    longjob.texts = {"walk"};
    longjob.duration_s = 4.0;  // 120 frames = 30 tokens via 8-token windows
    longjob.seed = 9;
    GeneratedMotion gm = generate_motion(cfg, longjob, tok2, genart2, gmpart2,
                                         tok2.set.stats);
    CHECK(gm.motion.frames() == 120);
    CHECK(std::abs(gm.motion.frames() / 30.0 - 4.0) < 0.2);
  }

  SUBCASE("evaluation produces a valid report and enforces the hash chain") {
    EvaluationInputs inputs;
    for (const auto& e : fs::directory_iterator(gen_root))
      inputs.generated_dirs.push_back(e.path().string());
    std::sort(inputs.generated_dirs.begin(), inputs.generated_dirs.end());
    nlohmann::json report = evaluate_pipeline(cfg, test, tok2, ret2, inputs);
    std::string err;
    CHECK(validate_metric_report(report, &err));
    CHECK(report.at("metrics").at("fid").get<double>() >= 0.0);
    CHECK(report.at("counts").at("generated").get<int>() == 34);

    // tamper with one sidecar's tokenizer hash: evaluation must refuse
    const std::string victim = inputs.generated_dirs[0] + "/motion.json";
    std::ifstream in(victim);
    nlohmann::json sidecar;
    in >> sidecar;
    in.close();
    sidecar["tokenizer_hash"] = "0000000000000000";
    std::ofstream out(victim);
    out << sidecar.dump();
    out.close();
    CHECK_THROWS_AS(evaluate_pipeline(cfg, test, tok2, ret2, inputs), InvalidArgument);
  }
}
