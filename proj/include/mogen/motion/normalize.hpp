#pragma once

#include <vector>

#include "mogen/motion/sequence.hpp"

namespace mogen::motion {

constexpr double kStdFloor = 1e-4;

// Per-feature mean/std over all frames of a dataset. Stds are floored so
// constant features (contacts at rest) stay usable.
struct NormalizationStats {
  Vecd mean;
  Vecd std;

  Matd apply(const Matd& x) const {
    require(x.cols() == mean.size(), "normalize: width mismatch");
    return (x.rowwise() - mean.transpose()).array().rowwise() /
           std.transpose().array();
  }
  Matd invert(const Matd& x) const {
    require(x.cols() == mean.size(), "denormalize: width mismatch");
    return (x.array().rowwise() * std.transpose().array()).rowwise() +
           mean.transpose().array();
  }
};

template <class SeqRange>
NormalizationStats fit_normalization(const SeqRange& clips) {
  Index total = 0;
  Index width = -1;
  for (const auto& c : clips) {
    const Matd& d = c.data;
    if (width < 0) width = d.cols();
    require(d.cols() == width, "fit_normalization: inconsistent widths");
    total += d.rows();
  }
  require(total > 0, "fit_normalization: empty dataset");
  Vecd mean = Vecd::Zero(width);
  for (const auto& c : clips) mean += c.data.colwise().sum().transpose();
  mean /= static_cast<double>(total);
  Vecd var = Vecd::Zero(width);
  for (const auto& c : clips)
    var += (c.data.rowwise() - mean.transpose()).array().square().colwise().sum().matrix().transpose();
  var /= static_cast<double>(total);
  NormalizationStats st;
  st.mean = mean;
  st.std = var.array().sqrt().max(kStdFloor).matrix();
  return st;
}

}  // namespace mogen::motion
