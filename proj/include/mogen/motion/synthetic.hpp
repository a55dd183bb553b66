#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mogen/motion/sequence.hpp"

namespace mogen::motion {

// One procedurally generated clip. Besides the feature representation the
// generator keeps the world-space joints, the analytic contact phase and the
// motion's cycle frequency for tests and rendering.
struct SyntheticClip {
  MotionSequence motion;
  std::string text;
  std::vector<float> audio;
  int audio_sample_rate = 4000;
  std::string family;
  Mati contact_gt;     // L x 4
  Matd world_joints;   // L x (52*3)
  double cycle_hz = 0.0;
};

inline constexpr int kFamilyCount = 5;
const char* family_name(int family);

SyntheticClip generate_synthetic_clip(std::uint64_t seed, int family, int clip_len_frames);

// Deterministic in seed; families cycle round-robin over clips.
std::vector<SyntheticClip> generate_synthetic_dataset(std::uint64_t seed, int n_clips,
                                                      int clip_len_frames);

constexpr double kDefaultContactThreshold = 0.002;

}  // namespace mogen::motion
