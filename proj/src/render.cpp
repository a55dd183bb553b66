#include "mogen/pipeline/render.hpp"

#include <fstream>
#include <vector>

#include "mogen/motion/layout.hpp"

namespace mogen::pipeline {

namespace {

const std::vector<std::pair<int, int>>& bones() {
  static const std::vector<std::pair<int, int>> b = [] {
    std::vector<std::pair<int, int>> v = {
        {0, 1},  {1, 4},   {4, 7},   {7, 10},  // left leg
        {0, 2},  {2, 5},   {5, 8},   {8, 11},  // right leg
        {0, 3},  {3, 6},   {6, 9},   {9, 12},  {12, 15},  // spine to head
        {9, 13}, {13, 16}, {16, 18}, {18, 20},  // left arm
        {9, 14}, {14, 17}, {17, 19}, {19, 21},  // right arm
    };
    for (int hand = 0; hand < 2; ++hand) {
      const int wrist = hand == 0 ? motion::joints::kLeftWrist : motion::joints::kRightWrist;
      const int start = hand == 0 ? motion::joints::kLeftHandStart
                                  : motion::joints::kRightHandStart;
      for (int f = 0; f < 5; ++f) {
        v.emplace_back(wrist, start + f * 3);
        v.emplace_back(start + f * 3, start + f * 3 + 1);
        v.emplace_back(start + f * 3 + 1, start + f * 3 + 2);
      }
    }
    return v;
  }();
  return b;
}

}  // namespace

void render_svg_strip(const Matd& world_joints, const std::string& path, int n_keyframes) {
  require(world_joints.rows() >= 1 && world_joints.cols() == 52 * 3,
          "render: expected L x 156 world joints");
  if (n_keyframes < 1) n_keyframes = 1;
  const Index L = world_joints.rows();
  const double cell_w = 150.0, cell_h = 200.0, scale = 85.0;

  std::ofstream f(path);
  if (!f) throw InvalidArgument("render: cannot open " + path);
  f << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\""
    << cell_w * n_keyframes << "\" height=\"" << cell_h << "\">\n";
  f << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";

  for (int k = 0; k < n_keyframes; ++k) {
    const Index frame = n_keyframes == 1 ? 0 : (L - 1) * k / (n_keyframes - 1);
    const double root_x = world_joints(frame, 0);
    const double root_z = world_joints(frame, 2);
    const double ox = cell_w * k + cell_w / 2.0;
    auto u = [&](int j) {
      // front view with a slight depth skew so forward motion reads
      return ox + scale * (world_joints(frame, 3 * j) - root_x) +
             0.25 * scale * (world_joints(frame, 3 * j + 2) - root_z);
    };
    auto v = [&](int j) { return cell_h - 12.0 - scale * world_joints(frame, 3 * j + 1); };

    f << "<line x1=\"" << cell_w * k << "\" y1=\"" << cell_h - 12.0 << "\" x2=\""
      << cell_w * (k + 1) << "\" y2=\"" << cell_h - 12.0
      << "\" stroke=\"#cccccc\" stroke-width=\"1\"/>\n";
    for (const auto& [a, b] : bones()) {
      const bool finger = a >= 22 || b >= 22;
      f << "<line x1=\"" << u(a) << "\" y1=\"" << v(a) << "\" x2=\"" << u(b) << "\" y2=\""
        << v(b) << "\" stroke=\"" << (finger ? "#d06030" : "#204080")
        << "\" stroke-width=\"" << (finger ? 1.0 : 2.2) << "\"/>\n";
    }
    f << "<circle cx=\"" << u(15) << "\" cy=\"" << v(15)
      << "\" r=\"6\" fill=\"none\" stroke=\"#204080\" stroke-width=\"2\"/>\n";
    f << "<text x=\"" << cell_w * k + 6 << "\" y=\"14\" font-size=\"10\" fill=\"#666\">f"
      << frame << "</text>\n";
  }
  f << "</svg>\n";
}

}  // namespace mogen::pipeline
