#include "mogen/motion/dataset_io.hpp"

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <json.hpp>

#include "mogen/core/hash.hpp"
#include "mogen/io/npy.hpp"

namespace mogen::motion {

using nlohmann::json;

namespace {

std::string clip_stem(int i) {
  std::ostringstream ss;
  ss << "clip_" << std::setw(5) << std::setfill('0') << i;
  return ss.str();
}

json layout_to_json(const FeatureLayout& lay) {
  return json{{"joint_count", lay.joint_count},
              {"include_rotations", lay.include_rotations},
              {"fps", lay.fps},
              {"d_m", lay.d_m}};
}

FeatureLayout layout_from_json(const json& j) {
  FeatureLayout lay = build_layout(j.at("joint_count").get<int>(),
                                   j.at("include_rotations").get<bool>());
  lay.fps = j.at("fps").get<int>();
  require(lay.d_m == j.at("d_m").get<Index>(), "dataset manifest: d_m mismatch");
  return lay;
}

}  // namespace

Dataset build_dataset(std::uint64_t seed, int n_clips, int clip_len_frames) {
  Dataset ds;
  ds.seed = seed;
  ds.clip_len_frames = clip_len_frames;
  ds.clips = generate_synthetic_dataset(seed, n_clips, clip_len_frames);
  ds.layout = ds.clips.front().motion.layout;
  std::vector<MotionSequence> seqs;
  seqs.reserve(ds.clips.size());
  for (const auto& c : ds.clips) seqs.push_back(c.motion);
  ds.stats = fit_normalization(seqs);

  Fnv1a h;
  h.update(std::to_string(seed));
  h.update(std::to_string(n_clips));
  h.update(std::to_string(clip_len_frames));
  ds.content_hash = h.hex();
  return ds;
}

void save_dataset(const std::string& dir, const Dataset& ds) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  json manifest;
  manifest["version"] = 1;
  manifest["seed"] = ds.seed;
  manifest["clip_len_frames"] = ds.clip_len_frames;
  manifest["layout"] = layout_to_json(ds.layout);
  manifest["content_hash"] = ds.content_hash;
  manifest["normalization"] = {
      {"mean", std::vector<double>(ds.stats.mean.data(), ds.stats.mean.data() + ds.stats.mean.size())},
      {"std", std::vector<double>(ds.stats.std.data(), ds.stats.std.data() + ds.stats.std.size())}};
  json clips = json::array();
  for (std::size_t i = 0; i < ds.clips.size(); ++i) {
    const auto& c = ds.clips[i];
    const std::string stem = clip_stem(static_cast<int>(i));
    io::save_npy_f32(dir + "/" + stem + ".npy", c.motion.data);
    io::save_npy(dir + "/" + stem + "_audio.npy", c.audio);
    clips.push_back(json{{"id", stem},
                         {"motion", stem + ".npy"},
                         {"audio", stem + "_audio.npy"},
                         {"audio_sample_rate", c.audio_sample_rate},
                         {"frames", c.motion.frames()},
                         {"text", c.text},
                         {"family", c.family},
                         {"cycle_hz", c.cycle_hz}});
  }
  manifest["clips"] = clips;
  std::ofstream f(dir + "/manifest.json");
  if (!f) throw InvalidArgument("save_dataset: cannot write manifest in " + dir);
  f << manifest.dump(2);
}

Dataset load_dataset(const std::string& dir) {
  std::ifstream f(dir + "/manifest.json");
  if (!f) throw MissingArtifact("load_dataset: missing manifest.json in " + dir +
                                " (run `mogen synth` first)");
  json manifest;
  f >> manifest;
  Dataset ds;
  ds.seed = manifest.at("seed").get<std::uint64_t>();
  ds.clip_len_frames = manifest.at("clip_len_frames").get<int>();
  ds.layout = layout_from_json(manifest.at("layout"));
  ds.content_hash = manifest.at("content_hash").get<std::string>();
  const auto& norm = manifest.at("normalization");
  const auto mean = norm.at("mean").get<std::vector<double>>();
  const auto stdv = norm.at("std").get<std::vector<double>>();
  ds.stats.mean = Eigen::Map<const Vecd>(mean.data(), static_cast<Index>(mean.size()));
  ds.stats.std = Eigen::Map<const Vecd>(stdv.data(), static_cast<Index>(stdv.size()));
  for (const auto& cj : manifest.at("clips")) {
    SyntheticClip c;
    c.motion.layout = ds.layout;
    c.motion.data = io::load_npy(dir + "/" + cj.at("motion").get<std::string>());
    const Matd audio = io::load_npy(dir + "/" + cj.at("audio").get<std::string>());
    c.audio.resize(static_cast<std::size_t>(audio.size()));
    for (Index i = 0; i < audio.rows(); ++i)
      c.audio[static_cast<std::size_t>(i)] = static_cast<float>(audio(i, 0));
    c.audio_sample_rate = cj.at("audio_sample_rate").get<int>();
    c.text = cj.at("text").get<std::string>();
    c.family = cj.at("family").get<std::string>();
    c.cycle_hz = cj.at("cycle_hz").get<double>();
    ds.clips.push_back(std::move(c));
  }
  require(!ds.clips.empty(), "load_dataset: empty dataset");
  return ds;
}

}  // namespace mogen::motion
