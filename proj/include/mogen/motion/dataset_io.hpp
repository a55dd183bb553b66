#pragma once

#include <string>
#include <vector>

#include "mogen/motion/normalize.hpp"
#include "mogen/motion/synthetic.hpp"

namespace mogen::motion {

// On-disk dataset: one directory with manifest.json plus one motion .npy and
// one audio .npy per clip.
struct Dataset {
  FeatureLayout layout;
  NormalizationStats stats;
  std::vector<SyntheticClip> clips;
  std::uint64_t seed = 0;
  int clip_len_frames = 0;
  std::string content_hash;  // hash over manifest-relevant fields
};

Dataset build_dataset(std::uint64_t seed, int n_clips, int clip_len_frames);

void save_dataset(const std::string& dir, const Dataset& ds);
Dataset load_dataset(const std::string& dir);

}  // namespace mogen::motion
