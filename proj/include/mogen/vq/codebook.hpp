#pragma once

#include <cmath>
#include <vector>

#include "mogen/core/rng.hpp"
#include "mogen/nn/graph.hpp"

namespace mogen::vq {

// Codebook of K codes, stored as a (d_c x K) parameter, one column per code.
// With the affine reparameterization enabled the stored embeddings are kept
// canonical (zero mean / unit std per dimension across K) and the effective
// codes are affine_std .* e + affine_mean, where the affine statistics track
// the encoder output distribution by EMA.
template <class S>
struct Codebook {
  nn::Param<S> embeddings;
  Vecd usage_ema;
  VecX<S> affine_mean;
  VecX<S> affine_std;
  bool affine_enabled = false;
  bool scalar_affine = false;  // collapse affine stats to a single scalar pair

  Codebook() = default;
  Codebook(Index d_c, Index K, Rng& rng, bool affine) : affine_enabled(affine) {
    embeddings = nn::Param<S>("codebook", rng.gaussian<S>(d_c, K, 1.0));
    usage_ema = Vecd::Ones(K);
    affine_mean = VecX<S>::Zero(d_c);
    affine_std = VecX<S>::Ones(d_c);
  }

  Index K() const { return embeddings.value.cols(); }
  Index dim() const { return embeddings.value.rows(); }

  MatX<S> effective() const {
    if (!affine_enabled) return embeddings.value;
    MatX<S> e = embeddings.value.array().colwise() * affine_std.array();
    e.colwise() += affine_mean;
    return e;
  }

  // EMA update of the affine statistics from a batch of encoder latents
  // (d_c x N columns), followed by re-canonicalization of the stored codes.
  void update_affine(const MatX<S>& latents, double decay = 0.99) {
    if (!affine_enabled) return;
    require(latents.rows() == dim(), "update_affine: dim mismatch");
    require(latents.cols() >= 2, "update_affine: need at least 2 latents");
    VecX<S> mu = latents.rowwise().mean();
    VecX<S> var = (latents.colwise() - mu).array().square().rowwise().mean();
    VecX<S> sd = var.array().sqrt().max(S(1e-6));
    if (scalar_affine) {
      mu.setConstant(mu.mean());
      sd.setConstant(sd.mean());
    }
    affine_mean = S(decay) * affine_mean + S(1.0 - decay) * mu;
    affine_std = S(decay) * affine_std + S(1.0 - decay) * sd;
    canonicalize();
  }

  void canonicalize() {
    if (!affine_enabled) return;
    VecX<S> mu = embeddings.value.rowwise().mean();
    VecX<S> sd = (embeddings.value.colwise() - mu).array().square().rowwise().mean();
    sd = sd.array().sqrt().max(S(1e-6));
    embeddings.value = (embeddings.value.colwise() - mu).array().colwise() / sd.array();
  }
};

// Nearest code per latent column under squared Euclidean distance against the
// given (effective) codebook. Ties break toward the lowest index.
template <class S>
std::vector<Index> quantize_indices(const MatX<S>& latents, const MatX<S>& codes) {
  require(latents.rows() == codes.rows(), "quantize: dimension mismatch");
  const Index l = latents.cols();
  const Index K = codes.cols();
  RowVecX<S> code_sq = codes.colwise().squaredNorm();
  MatX<S> cross = latents.transpose() * codes;  // l x K
  std::vector<Index> idx(static_cast<std::size_t>(l));
  for (Index i = 0; i < l; ++i) {
    Index best = 0;
    S best_d = code_sq(0) - S(2) * cross(i, 0);
    for (Index k = 1; k < K; ++k) {
      const S d = code_sq(k) - S(2) * cross(i, k);
      if (d < best_d) {
        best_d = d;
        best = k;
      }
    }
    idx[static_cast<std::size_t>(i)] = best;
  }
  return idx;
}

template <class S>
MatX<S> gather_codes(const MatX<S>& codes, const std::vector<Index>& idx) {
  MatX<S> out(codes.rows(), static_cast<Index>(idx.size()));
  for (std::size_t i = 0; i < idx.size(); ++i) out.col(static_cast<Index>(i)) = codes.col(idx[i]);
  return out;
}

// k-means with k-means++ seeding on latent columns. Deterministic in rng.
// Returns centroids (d x K) and writes cluster sizes.
template <class S>
MatX<S> kmeans(const MatX<S>& points, Index K, Rng& rng, std::vector<Index>* sizes_out,
               int max_iters = 25) {
  const Index N = points.cols();
  require(N >= K, "kmeans: need at least K points");
  MatX<S> centroids(points.rows(), K);

  // k-means++ seeding
  std::vector<double> d2(static_cast<std::size_t>(N), 0.0);
  centroids.col(0) = points.col(rng.uniform_int(N));
  for (Index k = 1; k < K; ++k) {
    double total = 0.0;
    for (Index i = 0; i < N; ++i) {
      double best = 1e300;
      for (Index j = 0; j < k; ++j) {
        const double d = static_cast<double>((points.col(i) - centroids.col(j)).squaredNorm());
        if (d < best) best = d;
      }
      d2[static_cast<std::size_t>(i)] = best;
      total += best;
    }
    if (total <= 0.0) {
      centroids.col(k) = points.col(rng.uniform_int(N));
      continue;
    }
    double r = rng.uniform() * total;
    Index pick = N - 1;
    for (Index i = 0; i < N; ++i) {
      r -= d2[static_cast<std::size_t>(i)];
      if (r <= 0.0) {
        pick = i;
        break;
      }
    }
    centroids.col(k) = points.col(pick);
  }

  std::vector<Index> assign(static_cast<std::size_t>(N), 0);
  std::vector<Index> sizes(static_cast<std::size_t>(K), 0);
  for (int it = 0; it < max_iters; ++it) {
    bool changed = false;
    for (Index i = 0; i < N; ++i) {
      Index best = 0;
      S best_d = (points.col(i) - centroids.col(0)).squaredNorm();
      for (Index k = 1; k < K; ++k) {
        const S d = (points.col(i) - centroids.col(k)).squaredNorm();
        if (d < best_d) {
          best_d = d;
          best = k;
        }
      }
      if (assign[static_cast<std::size_t>(i)] != best) changed = true;
      assign[static_cast<std::size_t>(i)] = best;
    }
    MatX<S> sums = MatX<S>::Zero(points.rows(), K);
    std::fill(sizes.begin(), sizes.end(), 0);
    for (Index i = 0; i < N; ++i) {
      sums.col(assign[static_cast<std::size_t>(i)]) += points.col(i);
      sizes[static_cast<std::size_t>(assign[static_cast<std::size_t>(i)])]++;
    }
    for (Index k = 0; k < K; ++k) {
      if (sizes[static_cast<std::size_t>(k)] > 0) {
        centroids.col(k) = sums.col(k) / static_cast<S>(sizes[static_cast<std::size_t>(k)]);
      } else {
        // revive an empty cluster at the point farthest from its centroid
        Index far = 0;
        S far_d = S(-1);
        for (Index i = 0; i < N; ++i) {
          const S d = (points.col(i) - centroids.col(assign[static_cast<std::size_t>(i)])).squaredNorm();
          if (d > far_d) {
            far_d = d;
            far = i;
          }
        }
        centroids.col(k) = points.col(far);
        changed = true;
      }
    }
    if (!changed && it > 0) break;
  }
  if (sizes_out) *sizes_out = sizes;
  return centroids;
}

// Codebook initialization from a batch of encoder latents (d x N).
template <class S>
void kmeans_init_codebook(Codebook<S>& cb, const MatX<S>& latents, Rng& rng) {
  require(latents.cols() >= cb.K(), "kmeans_init: fewer latents than codes");
  std::vector<Index> sizes;
  MatX<S> centroids = kmeans(latents, cb.K(), rng, &sizes);
  if (cb.affine_enabled) {
    // effective codes should equal the centroids: fold current affine out
    cb.embeddings.value =
        (centroids.colwise() - cb.affine_mean).array().colwise() / cb.affine_std.array();
  } else {
    cb.embeddings.value = centroids;
  }
  const double mean_size = static_cast<double>(latents.cols()) / static_cast<double>(cb.K());
  for (Index k = 0; k < cb.K(); ++k)
    cb.usage_ema(k) = static_cast<double>(sizes[static_cast<std::size_t>(k)]) / mean_size;
}

// Every code with usage below the threshold is overwritten by a uniformly
// sampled latent from the batch; its usage resets to 1.
template <class S>
Index replace_stale_codes(Codebook<S>& cb, const MatX<S>& latents, Rng& rng,
                          double threshold) {
  require(latents.cols() >= 1, "replace_stale_codes: empty batch");
  require(latents.rows() == cb.dim(), "replace_stale_codes: dim mismatch");
  Index replaced = 0;
  for (Index k = 0; k < cb.K(); ++k) {
    if (cb.usage_ema(k) >= threshold) continue;
    const VecX<S> z = latents.col(rng.uniform_int(latents.cols()));
    if (cb.affine_enabled) {
      cb.embeddings.value.col(k) = (z - cb.affine_mean).array() / cb.affine_std.array();
    } else {
      cb.embeddings.value.col(k) = z;
    }
    cb.usage_ema(k) = 1.0;
    ++replaced;
  }
  return replaced;
}

// exp(entropy) of a code usage histogram; zero bins contribute nothing.
inline double perplexity(const Veci& histogram) {
  double total = 0.0;
  for (Index k = 0; k < histogram.size(); ++k) {
    require(histogram(k) >= 0, "perplexity: negative count");
    total += histogram(k);
  }
  require(total >= 1.0, "perplexity: empty histogram");
  double h = 0.0;
  for (Index k = 0; k < histogram.size(); ++k) {
    if (histogram(k) == 0) continue;
    const double p = histogram(k) / total;
    h -= p * std::log(p);
  }
  return std::exp(h);
}

}  // namespace mogen::vq
