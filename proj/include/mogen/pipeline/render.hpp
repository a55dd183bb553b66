#pragma once

#include <string>

#include "mogen/core/types.hpp"

namespace mogen::pipeline {

// Keyframe strip of the stick figure (front view), evenly sampled frames.
// world_joints: L x (52*3).
void render_svg_strip(const Matd& world_joints, const std::string& path,
                      int n_keyframes = 8);

}  // namespace mogen::pipeline
