#pragma once

#include <string>
#include <vector>

#include "mogen/core/rng.hpp"
#include "mogen/core/types.hpp"

namespace mogen::eval {

// Frechet distance between Gaussian fits of two feature sets (rows = samples):
// |mu_a - mu_b|^2 + Tr(S_a + S_b - 2 (S_a S_b)^{1/2}).
// The matrix square root runs through symmetric eigendecompositions; small
// negative eigenvalues above -1e-6 are clamped to zero, anything worse is a
// numeric error with diagnostics.
inline double fid(const Matd& feats_a, const Matd& feats_b) {
  require(feats_a.cols() == feats_b.cols(), "fid: dimension mismatch");
  require(feats_a.rows() >= 2 && feats_b.rows() >= 2, "fid: need at least 2 samples per set");
  const Index d = feats_a.cols();

  auto moments = [](const Matd& x, Vecd& mu, Matd& cov) {
    mu = x.colwise().mean().transpose();
    Matd centered = x.rowwise() - mu.transpose();
    cov = centered.transpose() * centered / static_cast<double>(x.rows() - 1);
  };
  Vecd mu_a, mu_b;
  Matd cov_a, cov_b;
  moments(feats_a, mu_a, cov_a);
  moments(feats_b, mu_b, cov_b);

  auto clamp_eigs = [](Vecd ev, const std::string& where) {
    for (Index i = 0; i < ev.size(); ++i) {
      if (ev(i) < -1e-6)
        throw NumericError("fid: covariance square root failed (" + where +
                           " eigenvalue " + std::to_string(ev(i)) + ")");
      if (ev(i) < 0.0) ev(i) = 0.0;
    }
    return ev;
  };

  Eigen::SelfAdjointEigenSolver<Matd> es_a(0.5 * (cov_a + cov_a.transpose()));
  Vecd ev_a = clamp_eigs(es_a.eigenvalues(), "cov_a");
  Matd sqrt_a = es_a.eigenvectors() * ev_a.cwiseSqrt().asDiagonal() *
                es_a.eigenvectors().transpose();

  Matd inner = sqrt_a * cov_b * sqrt_a;
  Eigen::SelfAdjointEigenSolver<Matd> es_m(0.5 * (inner + inner.transpose()));
  Vecd ev_m = clamp_eigs(es_m.eigenvalues(), "product");

  double trace_sqrt = 0.0;
  for (Index i = 0; i < d; ++i) trace_sqrt += std::sqrt(ev_m(i));
  const double value =
      (mu_a - mu_b).squaredNorm() + cov_a.trace() + cov_b.trace() - 2.0 * trace_sqrt;
  return std::max(0.0, value);
}

// Motion-to-text retrieval accuracy within random batches of `batch` pairs.
// For each motion the texts of its batch are ranked by Euclidean distance;
// a hit means at most k-1 texts are strictly closer than the paired one, so
// exact ties (duplicate prompts) do not count against the match.
inline double r_precision(const Matd& motion_feats, const Matd& text_feats, Index k,
                          std::uint64_t seed, Index batch = 32) {
  require(motion_feats.rows() == text_feats.rows(), "r_precision: count mismatch");
  require(motion_feats.rows() >= batch, "r_precision: need at least one full batch");
  require(k >= 1 && k <= batch, "r_precision: k out of range");
  const Index n = motion_feats.rows();
  std::vector<Index> order(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
  Rng rng(seed);
  rng.shuffle(order);

  Index hits = 0, total = 0;
  const Index n_batches = n / batch;
  for (Index b = 0; b < n_batches; ++b) {
    for (Index i = 0; i < batch; ++i) {
      const Index mi = order[static_cast<std::size_t>(b * batch + i)];
      const double d_true = (motion_feats.row(mi) - text_feats.row(mi)).norm();
      Index closer = 0;
      for (Index j = 0; j < batch; ++j) {
        if (j == i) continue;
        const Index tj = order[static_cast<std::size_t>(b * batch + j)];
        if ((motion_feats.row(mi) - text_feats.row(tj)).norm() < d_true) ++closer;
      }
      if (closer < k) ++hits;
      ++total;
    }
  }
  return static_cast<double>(hits) / static_cast<double>(total);
}

// Mean Euclidean distance between matched (motion, text) feature pairs.
inline double mm_dist(const Matd& motion_feats, const Matd& text_feats) {
  require(motion_feats.rows() == text_feats.rows() && motion_feats.cols() == text_feats.cols(),
          "mm_dist: shape mismatch");
  double acc = 0.0;
  for (Index i = 0; i < motion_feats.rows(); ++i)
    acc += (motion_feats.row(i) - text_feats.row(i)).norm();
  return acc / static_cast<double>(motion_feats.rows());
}

// Mean distance over randomly sampled motion pairs (distinct indices within a
// pair, with replacement across pairs).
inline double diversity(const Matd& feats, Index n_pairs, std::uint64_t seed) {
  require(feats.rows() >= 2, "diversity: need at least 2 motions");
  require(n_pairs >= 1, "diversity: n_pairs >= 1");
  Rng rng(seed);
  double acc = 0.0;
  for (Index p = 0; p < n_pairs; ++p) {
    const Index i = rng.uniform_int(feats.rows());
    Index j = rng.uniform_int(feats.rows() - 1);
    if (j >= i) ++j;
    acc += (feats.row(i) - feats.row(j)).norm();
  }
  return acc / static_cast<double>(n_pairs);
}

// Within-prompt generation diversity: mean pairwise distance per prompt group,
// averaged over groups. Every group needs at least two generations.
inline double mmodality(const std::vector<Matd>& per_text_feats, Index n_pairs_per_text,
                        std::uint64_t seed) {
  require(!per_text_feats.empty(), "mmodality: no groups");
  Rng rng(seed);
  double acc = 0.0;
  for (const Matd& group : per_text_feats) {
    require(group.rows() >= 2, "mmodality: every text needs >= 2 generations");
    double g = 0.0;
    for (Index p = 0; p < n_pairs_per_text; ++p) {
      const Index i = rng.uniform_int(group.rows());
      Index j = rng.uniform_int(group.rows() - 1);
      if (j >= i) ++j;
      g += (group.row(i) - group.row(j)).norm();
    }
    acc += g / static_cast<double>(n_pairs_per_text);
  }
  return acc / static_cast<double>(per_text_feats.size());
}

struct MetricReport {
  double fid = 0.0;
  double r_precision_top1 = 0.0;
  double r_precision_top2 = 0.0;
  double r_precision_top3 = 0.0;
  double mm_dist = 0.0;
  double diversity = 0.0;
  double mmodality = -1.0;  // negative: not computed (needs repeats per prompt)
  double perplexity_body = 0.0;
  double perplexity_lhand = 0.0;
  double perplexity_rhand = 0.0;
};

}  // namespace mogen::eval
