#pragma once

#include "mogen/core/types.hpp"

namespace mogen::vq {

// l x 3 grid of discrete motion tokens, columns ordered (body, lhand, rhand).
// Entries lie in [0, K]; K itself is the reserved MASK id.
struct TokenGrid {
  Mati tokens;
  int K = 512;

  int mask_id() const { return K; }
  Index length() const { return tokens.rows(); }

  bool has_mask() const {
    for (Index c = 0; c < tokens.cols(); ++c)
      for (Index r = 0; r < tokens.rows(); ++r)
        if (tokens(r, c) == K) return true;
    return false;
  }

  void validate() const {
    require(tokens.cols() == 3, "TokenGrid: 3 columns required");
    require(tokens.rows() >= 1, "TokenGrid: empty grid");
    for (Index c = 0; c < 3; ++c)
      for (Index r = 0; r < tokens.rows(); ++r)
        require(tokens(r, c) >= 0 && tokens(r, c) <= K, "TokenGrid: token out of range");
  }

  static TokenGrid all_mask(Index l, int K) {
    TokenGrid g;
    g.K = K;
    g.tokens = Mati::Constant(l, 3, K);
    return g;
  }
};

}  // namespace mogen::vq
