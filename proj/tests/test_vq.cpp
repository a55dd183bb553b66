#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "mogen/vq/codebook.hpp"
#include "mogen/vq/vqvae.hpp"
#include "test_util.hpp"

using namespace mogen;
using namespace mogen::vq;
using mogen::testutil::rel_error;

TEST_CASE("quantize picks the nearest code, ties to the lowest index") {
  Matd codes(2, 2);
  codes << 0, 1, 0, 1;  // code 0 = (0,0), code 1 = (1,1)
  Matd z(2, 1);
  z << 0.9, 0.8;
  CHECK(quantize_indices<double>(z, codes)[0] == 1);
  z << 0.5, 0.5;
  CHECK(quantize_indices<double>(z, codes)[0] == 0);

  // brute-force oracle on random instances
  Rng rng(5);
  Matd cb = rng.gaussian<double>(4, 16);
  Matd latents = rng.gaussian<double>(4, 40);
  auto idx = quantize_indices<double>(latents, cb);
  for (Index i = 0; i < 40; ++i) {
    Index best = 0;
    double best_d = 1e300;
    for (Index k = 0; k < 16; ++k) {
      const double d = (latents.col(i) - cb.col(k)).squaredNorm();
      if (d < best_d) {
        best_d = d;
        best = k;
      }
    }
    CHECK(idx[static_cast<std::size_t>(i)] == best);
  }
  // repeated quantization is deterministic
  CHECK(quantize_indices<double>(latents, cb) == idx);
}

TEST_CASE("vq loss values") {
  Rng rng(7);
  Matd x = rng.gaussian<double>(3, 5);
  SUBCASE("perfect reconstruction") {
    auto v = vq_loss_values(x, x, x, x, 0.25);
    CHECK(v.reconstruction == 0.0);
    CHECK(v.codebook == 0.0);
    CHECK(v.commit == 0.0);
  }
  SUBCASE("scalar example") {
    Matd ze(1, 1), zq(1, 1);
    ze << 1.0;
    zq << 0.0;
    auto v = vq_loss_values(Matd::Zero(1, 1), Matd::Zero(1, 1), ze, zq, 0.25);
    CHECK(v.codebook == doctest::Approx(1.0));
    CHECK(v.commit == doctest::Approx(0.25));
  }
}

TEST_CASE("kmeans recovers point masses and is deterministic") {
  Matd pts(2, 10);
  for (Index i = 0; i < 10; ++i) pts.col(i) = i < 5 ? Vecd::Constant(2, -1.0) : Vecd::Constant(2, 2.0);
  Rng rng(3);
  std::vector<Index> sizes;
  Matd c = kmeans<double>(pts, 2, rng, &sizes);
  std::vector<double> got = {c(0, 0), c(0, 1)};
  std::sort(got.begin(), got.end());
  CHECK(got[0] == doctest::Approx(-1.0));
  CHECK(got[1] == doctest::Approx(2.0));
  CHECK(sizes[0] + sizes[1] == 10);

  Rng r1(9), r2(9);
  Matd a = kmeans<double>(pts, 2, r1, nullptr);
  Matd b = kmeans<double>(pts, 2, r2, nullptr);
  CHECK((a - b).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("kmeans separates a mixture of 8 gaussians") {
  Rng rng(11);
  const Index K = 8, d = 3;
  Matd means = 10.0 * rng.gaussian<double>(d, K);
  const double sigma = 0.1;
  Matd pts(d, 400);
  for (Index i = 0; i < 400; ++i)
    pts.col(i) = means.col(i % K) + sigma * rng.gaussian<double>(d, 1).col(0);
  Rng krng(13);
  Matd c = kmeans<double>(pts, K, krng, nullptr);
  // every centroid within 3 sigma of a distinct mixture mean
  std::vector<bool> used(K, false);
  for (Index k = 0; k < K; ++k) {
    Index best = -1;
    double best_d = 1e300;
    for (Index m = 0; m < K; ++m) {
      const double dd = (c.col(k) - means.col(m)).norm();
      if (dd < best_d) {
        best_d = dd;
        best = m;
      }
    }
    CHECK(best_d < 3.0 * sigma);
    CHECK_FALSE(used[static_cast<std::size_t>(best)]);
    used[static_cast<std::size_t>(best)] = true;
  }
}

TEST_CASE("kmeans codebook init sets usage to normalized cluster sizes") {
  Rng rng(17);
  Codebook<double> cb(3, 4, rng, false);
  Matd latents = rng.gaussian<double>(3, 64);
  Rng krng(19);
  kmeans_init_codebook(cb, latents, krng);
  CHECK(cb.usage_ema.mean() == doctest::Approx(1.0));
  CHECK(cb.usage_ema.minCoeff() > 0.0);
  CHECK_THROWS_AS(kmeans_init_codebook(cb, rng.gaussian<double>(3, 2), krng), InvalidArgument);
}

TEST_CASE("stale code replacement") {
  Rng rng(23);
  Codebook<double> cb(4, 6, rng, false);
  Matd before = cb.embeddings.value;
  Matd batch = rng.gaussian<double>(4, 20);

  SUBCASE("all healthy => untouched") {
    Rng r(1);
    CHECK(replace_stale_codes(cb, batch, r, 0.5) == 0);
    CHECK((cb.embeddings.value - before).cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("dead code replaced by a batch latent, others bit-identical") {
    cb.usage_ema(3) = 0.0;
    Rng r(2);
    CHECK(replace_stale_codes(cb, batch, r, 0.5) == 1);
    for (Index k = 0; k < 6; ++k) {
      if (k == 3) continue;
      CHECK((cb.embeddings.value.col(k) - before.col(k)).cwiseAbs().maxCoeff() == 0.0);
    }
    bool found = false;
    for (Index i = 0; i < batch.cols(); ++i)
      if ((batch.col(i) - cb.embeddings.value.col(3)).cwiseAbs().maxCoeff() == 0.0) found = true;
    CHECK(found);
    CHECK(cb.usage_ema(3) == 1.0);
  }
  SUBCASE("empty batch rejected") {
    Rng r(3);
    Matd empty(4, 0);
    CHECK_THROWS_AS(replace_stale_codes(cb, empty, r, 0.5), InvalidArgument);
  }
}

TEST_CASE("affine effective codebook") {
  Rng rng(29);
  SUBCASE("identity affine") {
    Codebook<double> cb(3, 5, rng, true);
    CHECK((cb.effective() - cb.embeddings.value).cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("substitution example") {
    Codebook<double> cb(1, 2, rng, true);
    cb.embeddings.value << 1.0, -1.0;
    cb.affine_mean << 2.0;
    cb.affine_std << 3.0;
    Matd eff = cb.effective();
    CHECK(eff(0, 0) == doctest::Approx(5.0));
    CHECK(eff(0, 1) == doctest::Approx(-1.0));
  }
  SUBCASE("EMA tracks the latent distribution within 5 percent") {
    Codebook<double> cb(2, 4, rng, true);
    const double mu = 3.0, sigma = 2.0;
    Rng lrng(31);
    for (int step = 0; step < 1000; ++step) {
      Matd batch = mu * Matd::Ones(2, 64) + sigma * lrng.gaussian<double>(2, 64);
      cb.update_affine(batch, 0.99);
    }
    CHECK(std::abs(cb.affine_mean(0) - mu) < 0.05 * mu);
    CHECK(std::abs(cb.affine_std(0) - sigma) < 0.05 * sigma);
    // stored embeddings stay canonical
    CHECK(std::abs(cb.embeddings.value.row(0).mean()) < 1e-9);
  }
}

TEST_CASE("perplexity") {
  Veci uniform = Veci::Constant(512, 3);
  CHECK(perplexity(uniform) == doctest::Approx(512.0));
  Veci single = Veci::Zero(512);
  single(17) = 99;
  CHECK(perplexity(single) == doctest::Approx(1.0));
  Veci two(2);
  two << 3, 1;
  const double expect = std::exp(-(0.75 * std::log(0.75) + 0.25 * std::log(0.25)));
  CHECK(perplexity(two) == doctest::Approx(expect).epsilon(1e-12));
  CHECK(expect == doctest::Approx(1.7548).epsilon(1e-4));
  // permutation invariance
  Veci p1(4), p2(4);
  p1 << 5, 0, 2, 9;
  p2 << 9, 2, 0, 5;
  CHECK(perplexity(p1) == doctest::Approx(perplexity(p2)));
  CHECK_THROWS_AS(perplexity(Veci::Zero(4)), InvalidArgument);
}

namespace {

VqConfig tiny_config() {
  VqConfig cfg;
  cfg.K = 6;
  cfg.d_c = 4;
  cfg.downsample = 4;
  cfg.encoder_depth = 2;
  cfg.encoder_width = 6;
  cfg.beta = 0.25;
  cfg.affine_enabled = true;
  return cfg;
}

// Independent oracle for the straight-through/stop-gradient semantics: the
// loss with the quantization offset, the codebook target and the commit
// target all frozen at the base point. Its true derivative equals what the
// estimator defines, so central differences on it check the analytic path.
double surrogate_loss(VqVae<double>& model, const Matd& x, const Matd& delta0,
                      const std::vector<Index>& idx0, const Matd& ze0, const Matd& zq0) {
  nn::Graph<double> g;
  auto* ze = model.encode(g, g.constant(x));
  auto* zq_st = nn::add(g, ze, g.constant(delta0));
  auto* xhat = model.decode(g, zq_st);
  auto* rec = nn::huber(g, xhat, g.constant(x), model.config().huber_delta);
  auto* eff = model.effective_codebook(g);
  auto* e_sel = nn::gather_cols(g, eff, idx0);
  auto* cb = nn::mse(g, e_sel, g.constant(ze0));
  auto* commit = nn::mse(g, ze, g.constant(zq0));
  return rec->value(0, 0) + cb->value(0, 0) + model.config().beta * commit->value(0, 0);
}

}  // namespace

TEST_CASE("straight-through gradient matches finite differences") {
  for (std::uint64_t seed : {1ull, 2ull, 3ull, 4ull, 5ull, 6ull, 7ull, 8ull, 9ull, 10ull}) {
    Rng rng(seed);
    VqVae<double> model("toy", 3, tiny_config(), rng);
    Matd x = rng.gaussian<double>(3, 8);

    nn::Graph<double> g;
    auto fwd = vq_training_forward(g, model, x);
    for (auto* p : model.parameters()) p->zero_grad();
    g.backward(fwd.losses.total);

    const Matd ze0 = fwd.latents;
    const Matd zq0 = gather_codes<double>(model.codebook.effective(), fwd.indices);
    const Matd delta0 = zq0 - ze0;

    // base values agree
    const double base = surrogate_loss(model, x, delta0, fwd.indices, ze0, zq0);
    CHECK(base == doctest::Approx(fwd.losses.total->value(0, 0)).epsilon(1e-12));

    double worst = 0.0;
    for (auto* p : model.parameters()) {
      Matd analytic = p->grad;
      Matd fd = testutil::fd_gradient(*p, [&] {
        return surrogate_loss(model, x, delta0, fwd.indices, ze0, zq0);
      }, 1e-6);
      worst = std::max(worst, rel_error(analytic, fd));
    }
    CAPTURE(seed);
    CHECK(worst < 1e-4);
  }
}

TEST_CASE("encode length contract") {
  Rng rng(41);
  VqConfig cfg = tiny_config();
  VqVae<double> model("toy", 3, cfg, rng);
  nn::Graph<double> g;
  auto* z = model.encode(g, g.constant(rng.gaussian<double>(3, 120)));
  CHECK(z->cols() == 30);
  CHECK(z->rows() == 4);
  nn::Graph<double> g2;
  auto* z1 = model.encode(g2, g2.constant(rng.gaussian<double>(3, 4)));
  CHECK(z1->cols() == 1);

  nn::Graph<double> g3;
  Matd bad = rng.gaussian<double>(3, 10);
  CHECK_THROWS_AS(model.encode(g3, g3.constant(bad)), InvalidArgument);

  // determinism: same input, same latents
  nn::Graph<double> g4, g5;
  Matd x = rng.gaussian<double>(3, 8);
  auto* a = model.encode(g4, g4.constant(x));
  auto* b = model.encode(g5, g5.constant(x));
  CHECK((a->value - b->value).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("codebook row sequences round trip through the quantizer") {
  // latents that already sit on codebook entries map back to the same ids:
  // the quantizer-level form of the centroid-sequence round trip
  Rng rng(47);
  Codebook<double> cb(6, 12, rng, true);
  cb.affine_mean = rng.gaussian<double>(6, 1).col(0);
  cb.affine_std = rng.gaussian<double>(6, 1).col(0).cwiseAbs().array() + 0.5;
  Matd eff = cb.effective();
  std::vector<Index> ids = {3, 0, 7, 7, 11, 2};
  Matd z = gather_codes<double>(eff, ids);
  CHECK(quantize_indices<double>(z, eff) == ids);
}

TEST_CASE("quantized outputs are exact codebook rows") {
  Rng rng(43);
  VqVae<double> model("toy", 3, tiny_config(), rng);
  Matd x = rng.gaussian<double>(3, 8);
  nn::Graph<double> g;
  auto fwd = vq_training_forward(g, model, x);
  Matd eff = model.codebook.effective();
  for (std::size_t i = 0; i < fwd.indices.size(); ++i) {
    CHECK(fwd.indices[i] >= 0);
    CHECK(fwd.indices[i] < 6);
  }
  // commit/codebook losses vanish iff latents sit on the codebook
  Matd on_codes = gather_codes<double>(eff, fwd.indices);
  auto v = vq_loss_values(x, x, on_codes, on_codes, 0.25);
  CHECK(v.codebook == 0.0);
  CHECK(v.commit == 0.0);
  auto v2 = vq_loss_values(x, x, fwd.latents, on_codes, 0.25);
  CHECK(v2.codebook > 0.0);
  CHECK(v2.commit > 0.0);
}
