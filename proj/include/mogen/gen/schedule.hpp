#pragma once

#include <cmath>

#include "mogen/core/rng.hpp"
#include "mogen/vq/token_grid.hpp"

namespace mogen::gen {

// Number of tokens to mask at schedule position tau in [0, 1]:
// ceil(l * cos(pi * tau / 2)), clamped to [0, l]. cos(pi/2) is not exactly
// zero in floating point, so tau = 1 is pinned to 0.
inline Index cosine_mask_count(Index l, double tau) {
  require(l >= 1, "cosine_mask_count: l >= 1");
  require(tau >= 0.0 && tau <= 1.0, "cosine_mask_count: tau in [0,1]");
  if (tau >= 1.0) return 0;
  const double raw = static_cast<double>(l) * std::cos(M_PI * tau / 2.0);
  Index n = static_cast<Index>(std::ceil(raw));
  if (n < 0) n = 0;
  if (n > l) n = l;
  return n;
}

struct MaskResult {
  vq::TokenGrid masked;
  Mati mask;  // l x 3, 1 where replaced by MASK
};

// Independently per column, replace exactly cosine_mask_count(l, tau)
// uniformly chosen positions with MASK.
inline MaskResult apply_random_mask(const vq::TokenGrid& g, double tau, Rng& rng) {
  require(!g.has_mask(), "apply_random_mask: grid already contains MASK");
  const Index l = g.length();
  MaskResult out;
  out.masked = g;
  out.mask = Mati::Zero(l, 3);
  const Index n = cosine_mask_count(l, tau);
  for (Index c = 0; c < 3; ++c) {
    const auto chosen = rng.sample_without_replacement(l, n);
    for (Index i : chosen) {
      out.masked.tokens(i, c) = g.mask_id();
      out.mask(i, c) = 1;
    }
  }
  return out;
}

}  // namespace mogen::gen
