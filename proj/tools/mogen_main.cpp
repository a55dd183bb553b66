#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "mogen/pipeline/artifacts.hpp"
#include "mogen/pipeline/render.hpp"

namespace fs = std::filesystem;
using namespace mogen;
using namespace mogen::pipeline;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitMissing = 3;
constexpr int kExitNumeric = 4;

struct CommonArgs {
  std::string config_path;
  std::vector<std::string> overrides;
  std::string out = "run";
  std::int64_t seed = -1;
  bool deterministic = false;
  bool resume = false;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config_path, "JSON config file");
  cmd->add_option("--set", args.overrides, "config override key=value (repeatable)");
  cmd->add_option("--out", args.out, "run directory for artifacts");
  cmd->add_option("--seed", args.seed, "override the top-level seed");
  cmd->add_flag("--deterministic", args.deterministic,
                "force single-threaded numerics (the default execution mode)");
  cmd->add_flag("--resume", args.resume,
                "continue training from the existing checkpoint in --out");
}

RunConfig resolve(const CommonArgs& args) {
  RunConfig cfg = RunConfig::load(args.config_path, args.overrides);
  if (args.seed >= 0) cfg.seed = static_cast<std::uint64_t>(args.seed);
  return cfg;
}

motion::Dataset load_split(const std::string& out, const std::string& split) {
  const std::string dir = out + "/data/" + split;
  if (!fs::exists(dir + "/manifest.json"))
    throw MissingArtifact("missing dataset at " + dir + ": run `mogen synth` first");
  return motion::load_dataset(dir);
}

TokenizerArtifact need_tokenizers(const std::string& out) {
  const std::string path = out + "/vq.ckpt";
  if (!fs::exists(path))
    throw MissingArtifact("missing VQ checkpoint " + path + ": run `mogen train-vq` first");
  return load_tokenizers(path);
}

GeneratorArtifact need_generator(const std::string& out) {
  const std::string path = out + "/gen.ckpt";
  if (!fs::exists(path))
    throw MissingArtifact("missing generator checkpoint " + path +
                          ": run `mogen train-gen` first");
  return load_generator(path);
}

GmpArtifact need_gmp(const std::string& out) {
  const std::string path = out + "/gmp.ckpt";
  if (!fs::exists(path))
    throw MissingArtifact("missing GMP checkpoint " + path + ": run `mogen train-gmp` first");
  return load_gmp(path);
}

RetrievalArtifact need_retrieval(const std::string& out) {
  const std::string path = out + "/retrieval.ckpt";
  if (!fs::exists(path))
    throw MissingArtifact("missing retrieval checkpoint " + path +
                          ": run `mogen train-retrieval` first");
  return load_retrieval(path);
}

int cmd_synth(const CommonArgs& args) {
  RunConfig cfg = resolve(args);
  fs::create_directories(args.out + "/data");
  motion::Dataset train = motion::build_dataset(cfg.seed, cfg.dataset.n_clips,
                                                cfg.dataset.clip_len_frames);
  motion::Dataset test = motion::build_dataset(cfg.seed + 1, cfg.dataset.n_test_clips,
                                               cfg.dataset.clip_len_frames);
  motion::save_dataset(args.out + "/data/train", train);
  motion::save_dataset(args.out + "/data/test", test);
  std::cout << "wrote " << train.clips.size() << " train and " << test.clips.size()
            << " test clips under " << args.out << "/data\n";
  return kExitOk;
}

int cmd_train_vq(const CommonArgs& args) {
  RunConfig cfg = resolve(args);
  motion::Dataset train = load_split(args.out, "train");
  motion::Dataset test = load_split(args.out, "test");
  TrainLog log;
  TokenizerArtifact prior;
  TokenizerArtifact* resume = nullptr;
  if (args.resume && fs::exists(args.out + "/vq.ckpt")) {
    prior = load_tokenizers(args.out + "/vq.ckpt");
    resume = &prior;
  }
  TokenizerArtifact art = train_tokenizers(cfg, train, test, &log, resume);
  fs::create_directories(args.out + "/logs");
  log.save_csv(args.out + "/logs/vq.csv");
  const std::string hash = save_tokenizers(args.out + "/vq.ckpt", art);
  std::cout << "tokenizers " << hash << "  mse " << art.meta.at("mse_overall").get<double>()
            << "  perplexity(body) " << art.meta.at("perplexity_body").get<double>() << "\n";
  return kExitOk;
}

int cmd_train_gen(const CommonArgs& args) {
  RunConfig cfg = resolve(args);
  motion::Dataset train = load_split(args.out, "train");
  TokenizerArtifact tok = need_tokenizers(args.out);
  TrainLog log;
  GeneratorArtifact prior;
  GeneratorArtifact* resume = nullptr;
  if (args.resume && fs::exists(args.out + "/gen.ckpt")) {
    prior = load_generator(args.out + "/gen.ckpt");
    resume = &prior;
  }
  GeneratorArtifact art = train_generator(cfg, train, tok, tok.content_hash, &log, resume);
  fs::create_directories(args.out + "/logs");
  log.save_csv(args.out + "/logs/gen.csv");
  const std::string hash = save_generator(args.out + "/gen.ckpt", art);
  std::cout << "generator " << hash << "  mlm " << art.meta.at("final_mlm").get<double>()
            << "  critic " << art.meta.at("final_critic").get<double>() << "\n";
  return kExitOk;
}

int cmd_train_gmp(const CommonArgs& args) {
  RunConfig cfg = resolve(args);
  motion::Dataset train = load_split(args.out, "train");
  TrainLog log;
  GmpArtifact prior;
  GmpArtifact* resume = nullptr;
  if (args.resume && fs::exists(args.out + "/gmp.ckpt")) {
    prior = load_gmp(args.out + "/gmp.ckpt");
    resume = &prior;
  }
  GmpArtifact art = train_gmp(cfg, train, &log, resume);
  fs::create_directories(args.out + "/logs");
  log.save_csv(args.out + "/logs/gmp.csv");
  const std::string hash = save_gmp(args.out + "/gmp.ckpt", art);
  std::cout << "gmp " << hash << "  loss " << art.meta.at("final_loss").get<double>() << "\n";
  return kExitOk;
}

int cmd_train_retrieval(const CommonArgs& args) {
  RunConfig cfg = resolve(args);
  motion::Dataset train = load_split(args.out, "train");
  motion::Dataset test = load_split(args.out, "test");
  TrainLog log;
  RetrievalArtifact prior;
  RetrievalArtifact* resume = nullptr;
  if (args.resume && fs::exists(args.out + "/retrieval.ckpt")) {
    prior = load_retrieval(args.out + "/retrieval.ckpt");
    resume = &prior;
  }
  RetrievalArtifact art = train_retrieval(cfg, train, test, &log, resume);
  fs::create_directories(args.out + "/logs");
  log.save_csv(args.out + "/logs/retrieval.csv");
  const std::string hash = save_retrieval(args.out + "/retrieval.ckpt", art);
  std::cout << "retrieval " << hash << "  top1 " << art.meta.at("test_top1").get<double>()
            << "\n";
  return kExitOk;
}

int cmd_generate(const CommonArgs& args, const std::string& job_path, bool render,
                 double duration, int repeat, const std::string& gen_out) {
  RunConfig cfg = resolve(args);
  GenerateJob job = parse_job(job_path);
  if (duration > 0) job.duration_s = duration;
  if (args.seed >= 0) job.seed = static_cast<std::uint64_t>(args.seed);

  TokenizerArtifact tok = need_tokenizers(args.out);
  GeneratorArtifact generator = need_generator(args.out);
  GmpArtifact gmp_art = need_gmp(args.out);

  const std::string stem = fs::path(job_path).stem().string();
  for (int r = 0; r < std::max(1, repeat); ++r) {
    GenerateJob j = job;
    j.seed = job.seed + static_cast<std::uint64_t>(r);
    GeneratedMotion gm = generate_motion(cfg, j, tok, generator, gmp_art, tok.set.stats);
    std::string dir = gen_out.empty()
                          ? args.out + "/gen/" + stem + "_s" + std::to_string(j.seed)
                          : gen_out + (repeat > 1 ? "_r" + std::to_string(r) : "");
    save_generated(dir, gm);
    if (render) render_svg_strip(gm.world_joints, dir + "/render.svg");
    std::cout << "wrote " << dir << " (" << gm.motion.frames() << " frames, "
              << gm.motion.frames() / 30.0 << " s)\n";
  }
  return kExitOk;
}

int cmd_evaluate(const CommonArgs& args, const std::string& gen_dir,
                 const std::string& report_path) {
  RunConfig cfg = resolve(args);
  motion::Dataset test = load_split(args.out, "test");
  TokenizerArtifact tok = need_tokenizers(args.out);
  RetrievalArtifact retr = need_retrieval(args.out);

  EvaluationInputs inputs;
  const std::string root = gen_dir.empty() ? args.out + "/gen" : gen_dir;
  if (!fs::exists(root))
    throw MissingArtifact("evaluate: no generated motions under " + root +
                          ": run `mogen generate` first");
  for (const auto& entry : fs::directory_iterator(root))
    if (entry.is_directory() && fs::exists(entry.path() / "motion.json"))
      inputs.generated_dirs.push_back(entry.path().string());
  std::sort(inputs.generated_dirs.begin(), inputs.generated_dirs.end());

  nlohmann::json report = evaluate_pipeline(cfg, test, tok, retr, inputs);
  const std::string out_path = report_path.empty() ? args.out + "/report.json" : report_path;
  std::ofstream f(out_path);
  f << report.dump(2) << "\n";
  std::cout << report.at("metrics").dump(2) << "\nwrote " << out_path << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"whole-body motion generation pipeline"};
  app.require_subcommand(1);

  CommonArgs args;
  std::string job_path, gen_dir, gen_out, report_path;
  bool render = false;
  double duration = -1;
  int repeat = 1;

  auto* synth = app.add_subcommand("synth", "generate the synthetic dataset");
  add_common(synth, args);
  auto* train_vq_cmd = app.add_subcommand("train-vq", "train the three part tokenizers");
  add_common(train_vq_cmd, args);
  auto* train_gen_cmd = app.add_subcommand("train-gen", "train the masked generator + critic");
  add_common(train_gen_cmd, args);
  auto* train_gmp_cmd = app.add_subcommand("train-gmp", "train the root velocity predictor");
  add_common(train_gmp_cmd, args);
  auto* train_ret_cmd = app.add_subcommand("train-retrieval", "train the retrieval model");
  add_common(train_ret_cmd, args);

  auto* generate = app.add_subcommand("generate", "run a generation job");
  add_common(generate, args);
  generate->add_option("--job", job_path, "job description JSON")->required();
  generate->add_flag("--render", render, "write an SVG keyframe strip");
  generate->add_option("--duration", duration, "override duration in seconds");
  generate->add_option("--repeat", repeat, "number of seeds to run");
  generate->add_option("--gen-out", gen_out, "explicit output directory");

  auto* evaluate = app.add_subcommand("evaluate", "compute the metric report");
  add_common(evaluate, args);
  evaluate->add_option("--gen-dir", gen_dir, "directory of generated motions");
  evaluate->add_option("--report", report_path, "report output path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (synth->parsed()) return cmd_synth(args);
    if (train_vq_cmd->parsed()) return cmd_train_vq(args);
    if (train_gen_cmd->parsed()) return cmd_train_gen(args);
    if (train_gmp_cmd->parsed()) return cmd_train_gmp(args);
    if (train_ret_cmd->parsed()) return cmd_train_retrieval(args);
    if (generate->parsed())
      return cmd_generate(args, job_path, render, duration, repeat, gen_out);
    if (evaluate->parsed()) return cmd_evaluate(args, gen_dir, report_path);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const MissingArtifact& e) {
    std::cerr << "missing artifact: " << e.what() << "\n";
    return kExitMissing;
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const InvalidArgument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumeric;
  }
  return kExitOk;
}
