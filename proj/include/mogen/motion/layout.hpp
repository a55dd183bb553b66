#pragma once

#include <string>
#include <vector>

#include "mogen/core/types.hpp"

namespace mogen::motion {

struct FieldSpan {
  Index start = 0;
  Index length = 0;
};

// Feature layout of one pose vector. Field order is fixed:
//   r_a, r_x, r_z, r_y, j_p, j_v, [rot], c
// r_a is the root yaw angular velocity, r_x/r_z the root-local linear
// velocities on the ground plane, r_y the root height; j_p holds root-local
// positions of every non-root joint, j_v per-joint velocities (root included),
// c the four binary foot contacts.
struct FeatureLayout {
  int joint_count = 0;
  bool include_rotations = false;
  int fps = 30;
  Index d_m = 0;
  std::vector<std::pair<std::string, FieldSpan>> offsets;

  FieldSpan span(const std::string& name) const {
    for (const auto& [n, s] : offsets)
      if (n == name) return s;
    throw InvalidArgument("FeatureLayout: unknown field " + name);
  }
  bool has(const std::string& name) const {
    for (const auto& [n, s] : offsets)
      if (n == name) return true;
    return false;
  }
};

inline FeatureLayout build_layout(int joint_count, bool include_rotations) {
  require(joint_count >= 2, "build_layout: joint_count must be >= 2");
  FeatureLayout lay;
  lay.joint_count = joint_count;
  lay.include_rotations = include_rotations;
  Index off = 0;
  auto push = [&](const std::string& name, Index len) {
    lay.offsets.emplace_back(name, FieldSpan{off, len});
    off += len;
  };
  push("r_a", 1);
  push("r_x", 1);
  push("r_z", 1);
  push("r_y", 1);
  push("j_p", static_cast<Index>(joint_count - 1) * 3);
  push("j_v", static_cast<Index>(joint_count) * 3);
  if (include_rotations) push("rot", static_cast<Index>(joint_count - 1) * 6);
  push("c", 4);
  lay.d_m = off;
  return lay;
}

// Whole-body joint index convention (52 joints = 22 body + 2 x 15 fingers).
namespace joints {
constexpr int kBodyCount = 22;
constexpr int kHandCount = 15;
constexpr int kWholeBody = 52;
constexpr int kLeftHandStart = 22;   // joints 22..36
constexpr int kRightHandStart = 37;  // joints 37..51
constexpr int kLeftAnkle = 7;
constexpr int kRightAnkle = 8;
constexpr int kLeftFoot = 10;
constexpr int kRightFoot = 11;
constexpr int kLeftWrist = 20;
constexpr int kRightWrist = 21;
// contact label order: L ankle, L foot, R ankle, R foot
constexpr int kContactJoints[4] = {kLeftAnkle, kLeftFoot, kRightAnkle, kRightFoot};
}  // namespace joints

}  // namespace mogen::motion
