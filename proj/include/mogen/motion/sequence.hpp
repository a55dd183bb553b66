#pragma once

#include <cmath>
#include <vector>

#include "mogen/motion/layout.hpp"

namespace mogen::motion {

// Frames x d_m feature matrix, one row per frame at layout.fps.
struct MotionSequence {
  Matd data;
  FeatureLayout layout;

  Index frames() const { return data.rows(); }

  void validate() const {
    require(data.rows() >= 1, "MotionSequence: L >= 1 required");
    require(data.cols() == layout.d_m, "MotionSequence: width != layout.d_m");
    require(data.allFinite(), "MotionSequence: non-finite values");
    const FieldSpan c = layout.span("c");
    for (Index r = 0; r < data.rows(); ++r)
      for (Index k = 0; k < c.length; ++k) {
        const double v = data(r, c.start + k);
        require(v == 0.0 || v == 1.0, "MotionSequence: contact labels must be 0/1");
      }
  }
};

struct PartSplit {
  Matd body;   // L x 135 for the whole-body layout
  Matd lhand;  // L x 90
  Matd rhand;  // L x 90
};

// Column index lists defining the three tokenized streams. r_x and r_z belong
// to no stream; they are re-attached by the global motion predictor.
struct PartColumns {
  std::vector<Index> body;
  std::vector<Index> lhand;
  std::vector<Index> rhand;
};

inline PartColumns part_columns(const FeatureLayout& lay) {
  require(lay.joint_count == joints::kWholeBody, "part_columns: 52-joint layout required");
  require(!lay.include_rotations, "part_columns: rotation layouts are not tokenized");
  PartColumns pc;
  const FieldSpan ra = lay.span("r_a"), ry = lay.span("r_y");
  const FieldSpan jp = lay.span("j_p"), jv = lay.span("j_v"), c = lay.span("c");

  pc.body.push_back(ra.start);
  pc.body.push_back(ry.start);
  // j_p rows cover joints 1..51; body joints are 1..21
  for (int j = 1; j < joints::kBodyCount; ++j)
    for (int k = 0; k < 3; ++k) pc.body.push_back(jp.start + 3 * (j - 1) + k);
  for (int j = 0; j < joints::kBodyCount; ++j)
    for (int k = 0; k < 3; ++k) pc.body.push_back(jv.start + 3 * j + k);
  for (Index k = 0; k < c.length; ++k) pc.body.push_back(c.start + k);

  auto hand = [&](int j0) {
    std::vector<Index> cols;
    for (int j = j0; j < j0 + joints::kHandCount; ++j)
      for (int k = 0; k < 3; ++k) cols.push_back(jp.start + 3 * (j - 1) + k);
    for (int j = j0; j < j0 + joints::kHandCount; ++j)
      for (int k = 0; k < 3; ++k) cols.push_back(jv.start + 3 * j + k);
    return cols;
  };
  pc.lhand = hand(joints::kLeftHandStart);
  pc.rhand = hand(joints::kRightHandStart);
  return pc;
}

inline PartSplit split_parts(const MotionSequence& m) {
  const PartColumns pc = part_columns(m.layout);
  auto take = [&](const std::vector<Index>& cols) {
    Matd out(m.data.rows(), static_cast<Index>(cols.size()));
    for (std::size_t i = 0; i < cols.size(); ++i) out.col(static_cast<Index>(i)) = m.data.col(cols[i]);
    return out;
  };
  return PartSplit{take(pc.body), take(pc.lhand), take(pc.rhand)};
}

// Inverse of split_parts given the two excluded root-plane velocities.
inline MotionSequence merge_parts(const PartSplit& parts, const Vecd& r_x, const Vecd& r_z,
                                  const FeatureLayout& lay) {
  const PartColumns pc = part_columns(lay);
  const Index L = parts.body.rows();
  require(parts.lhand.rows() == L && parts.rhand.rows() == L, "merge_parts: length mismatch");
  require(r_x.size() == L && r_z.size() == L, "merge_parts: translation length mismatch");
  MotionSequence m;
  m.layout = lay;
  m.data = Matd::Zero(L, lay.d_m);
  auto put = [&](const Matd& src, const std::vector<Index>& cols) {
    require(src.cols() == static_cast<Index>(cols.size()), "merge_parts: stream width mismatch");
    for (std::size_t i = 0; i < cols.size(); ++i) m.data.col(cols[i]) = src.col(static_cast<Index>(i));
  };
  put(parts.body, pc.body);
  put(parts.lhand, pc.lhand);
  put(parts.rhand, pc.rhand);
  m.data.col(lay.span("r_x").start) = r_x;
  m.data.col(lay.span("r_z").start) = r_z;
  return m;
}

// Cumulative root trajectory from per-frame velocities. theta_0 = 0; frame i
// advances by the XZ velocity rotated by the previous heading about Y.
// Returns L x 3 world positions (x, y, z).
inline Matd integrate_root(const Vecd& r_a, const Vecd& r_x, const Vecd& r_z, const Vecd& r_y) {
  const Index L = r_a.size();
  require(r_x.size() == L && r_z.size() == L && r_y.size() == L,
          "integrate_root: length mismatch");
  require(L >= 1, "integrate_root: empty input");
  Matd pos(L, 3);
  double theta = 0.0, x = 0.0, z = 0.0;
  pos.row(0) << 0.0, r_y(0), 0.0;
  for (Index i = 1; i < L; ++i) {
    const double c = std::cos(theta), s = std::sin(theta);
    // rotation about +Y maps +Z toward +X
    x += c * r_x(i) + s * r_z(i);
    z += -s * r_x(i) + c * r_z(i);
    theta += r_a(i);
    pos(i, 0) = x;
    pos(i, 1) = r_y(i);
    pos(i, 2) = z;
  }
  return pos;
}

// Reconstruct world joint positions (L x J*3) from the feature representation:
// headings from cumulative r_a, root plane position from integrate_root, local
// joints rotated back by the heading.
inline Matd world_from_features(const MotionSequence& m) {
  const FeatureLayout& lay = m.layout;
  const Index L = m.frames();
  const int J = lay.joint_count;
  const FieldSpan ra = lay.span("r_a"), rx = lay.span("r_x"), rz = lay.span("r_z"),
                  ry = lay.span("r_y"), jp = lay.span("j_p");
  const Matd traj = integrate_root(m.data.col(ra.start), m.data.col(rx.start),
                                   m.data.col(rz.start), m.data.col(ry.start));
  Matd world(L, static_cast<Index>(J) * 3);
  double theta = 0.0;
  for (Index i = 0; i < L; ++i) {
    if (i > 0) theta += m.data(i, ra.start);
    const double c = std::cos(theta), s = std::sin(theta);
    world(i, 0) = traj(i, 0);
    world(i, 1) = traj(i, 1);
    world(i, 2) = traj(i, 2);
    for (int j = 1; j < J; ++j) {
      const double lx = m.data(i, jp.start + 3 * (j - 1));
      const double ly = m.data(i, jp.start + 3 * (j - 1) + 1);
      const double lz = m.data(i, jp.start + 3 * (j - 1) + 2);
      world(i, 3 * j) = traj(i, 0) + c * lx + s * lz;
      world(i, 3 * j + 1) = ly;
      world(i, 3 * j + 2) = traj(i, 2) - s * lx + c * lz;
    }
  }
  return world;
}

// joint_positions: L x (J*3), xyz interleaved per joint. A foot is in contact
// while its frame-to-frame speed stays below vel_threshold (units per frame).
// The last frame copies the previous label.
inline Mati compute_foot_contacts(const Matd& joint_positions, int joint_count,
                                  double vel_threshold) {
  const Index L = joint_positions.rows();
  require(L >= 2, "compute_foot_contacts: at least 2 frames required");
  require(joint_count >= joints::kBodyCount, "compute_foot_contacts: need a full body");
  require(joint_positions.cols() == static_cast<Index>(joint_count) * 3,
          "compute_foot_contacts: width mismatch");
  Mati labels(L, 4);
  for (int k = 0; k < 4; ++k) {
    const Index col = static_cast<Index>(joints::kContactJoints[k]) * 3;
    for (Index i = 0; i + 1 < L; ++i) {
      const double dx = joint_positions(i + 1, col) - joint_positions(i, col);
      const double dy = joint_positions(i + 1, col + 1) - joint_positions(i, col + 1);
      const double dz = joint_positions(i + 1, col + 2) - joint_positions(i, col + 2);
      labels(i, k) = std::sqrt(dx * dx + dy * dy + dz * dz) < vel_threshold ? 1 : 0;
    }
    labels(L - 1, k) = labels(L - 2, k);
  }
  return labels;
}

}  // namespace mogen::motion
