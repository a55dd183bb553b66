#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "mogen/eval/metrics.hpp"
#include "mogen/eval/retrieval.hpp"
#include "mogen/nn/optimizer.hpp"

using namespace mogen;
using namespace mogen::eval;

TEST_CASE("fid oracles") {
  Rng rng(3);
  Matd a = rng.gaussian<double>(200, 6);

  SUBCASE("identical sets give zero") {
    CHECK(fid(a, a) < 1e-8);
  }
  SUBCASE("1-D mean shift equals the squared shift") {
    Matd x = rng.gaussian<double>(5000, 1);
    Matd y = x;
    y.array() += 1.0;
    CHECK(fid(x, y) == doctest::Approx(1.0).epsilon(1e-9));
    Matd y2 = x;
    y2.array() += 2.5;
    CHECK(fid(x, y2) == doctest::Approx(6.25).epsilon(1e-9));
  }
  SUBCASE("symmetry") {
    Matd b = 2.0 * rng.gaussian<double>(150, 6);
    b.rowwise() += RowVecX<double>::Constant(6, 0.3);
    CHECK(fid(a, b) == doctest::Approx(fid(b, a)).epsilon(1e-6));
  }
  SUBCASE("translation invariance") {
    Matd b = 1.5 * rng.gaussian<double>(180, 6);
    const double base = fid(a, b);
    Matd a2 = a;
    Matd b2 = b;
    a2.rowwise() += RowVecX<double>::Constant(6, 7.0);
    b2.rowwise() += RowVecX<double>::Constant(6, 7.0);
    CHECK(fid(a2, b2) == doctest::Approx(base).epsilon(1e-6));
  }
  SUBCASE("separated distributions score worse than near ones") {
    Matd near = rng.gaussian<double>(200, 6);
    Matd far = rng.gaussian<double>(200, 6);
    far.array() += 3.0;
    CHECK(fid(a, far) > fid(a, near));
  }
  SUBCASE("tiny sets rejected") {
    CHECK_THROWS_AS(fid(a.topRows(1), a), InvalidArgument);
  }
}

TEST_CASE("r_precision") {
  Rng rng(7);
  SUBCASE("perfect alignment gives top-1 = 1") {
    Matd feats = rng.gaussian<double>(64, 8);
    CHECK(r_precision(feats, feats, 1, 0) == doctest::Approx(1.0));
  }
  SUBCASE("random features give chance level over 1000 batches") {
    const Index n = 32 * 1000;
    Matd m = rng.gaussian<double>(n, 4);
    Matd t = rng.gaussian<double>(n, 4);
    const double top1 = r_precision(m, t, 1, 99);
    const double sigma = std::sqrt((1.0 / 32) * (31.0 / 32) / 32000.0);
    CHECK(std::abs(top1 - 1.0 / 32) < 3.0 * sigma);
  }
  SUBCASE("monotone in k") {
    Matd m = rng.gaussian<double>(320, 4);
    Matd t = 0.5 * m + 0.5 * rng.gaussian<double>(320, 4);
    const double k1 = r_precision(m, t, 1, 5);
    const double k2 = r_precision(m, t, 2, 5);
    const double k3 = r_precision(m, t, 3, 5);
    CHECK(k1 <= k2);
    CHECK(k2 <= k3);
  }
  SUBCASE("duplicate texts tie in favor of the match") {
    // 32 motions, all paired to the same text embedding: exact ties must not
    // count against the pair
    Matd m = rng.gaussian<double>(32, 4);
    Matd t = Matd::Ones(32, 4);
    CHECK(r_precision(m, t, 1, 3) == doctest::Approx(1.0));
  }
  SUBCASE("too few pairs rejected") {
    Matd m = rng.gaussian<double>(8, 4);
    CHECK_THROWS_AS(r_precision(m, m, 1, 0), InvalidArgument);
  }
}

TEST_CASE("mm_dist") {
  Rng rng(11);
  Matd a = rng.gaussian<double>(40, 5);
  CHECK(mm_dist(a, a) == 0.0);
  Matd b = a;
  b.col(0).array() += 1.0;  // unit offset per pair
  CHECK(mm_dist(a, b) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK_THROWS_AS(mm_dist(a, a.topRows(10)), InvalidArgument);
}

TEST_CASE("diversity") {
  Rng rng(13);
  SUBCASE("identical features give zero") {
    Matd same = Matd::Ones(20, 4);
    CHECK(diversity(same, 300, 1) == 0.0);
  }
  SUBCASE("two balanced clusters at distance d average d/2") {
    const double d = 4.0;
    Matd feats = Matd::Zero(400, 2);
    for (Index i = 200; i < 400; ++i) feats(i, 0) = d;
    // cross-cluster pairs (probability ~1/2 for distinct-index draws) have
    // distance d, within-cluster pairs 0
    const double got = diversity(feats, 40000, 17);
    const double sigma = d * 0.5 / std::sqrt(40000.0);
    CHECK(std::abs(got - d / 2.0) < 4.0 * sigma + 0.01);
  }
  SUBCASE("invariant under global translation") {
    Matd feats = rng.gaussian<double>(50, 3);
    const double base = diversity(feats, 500, 7);
    Matd shifted = feats;
    shifted.rowwise() += RowVecX<double>::Constant(3, 11.0);
    CHECK(diversity(shifted, 500, 7) == doctest::Approx(base).epsilon(1e-12));
  }
  SUBCASE("deterministic in seed") {
    Matd feats = rng.gaussian<double>(50, 3);
    CHECK(diversity(feats, 300, 5) == diversity(feats, 300, 5));
  }
  SUBCASE("fewer than two motions rejected") {
    CHECK_THROWS_AS(diversity(Matd::Ones(1, 3), 10, 0), InvalidArgument);
  }
}

TEST_CASE("mmodality") {
  Rng rng(17);
  SUBCASE("deterministic generator gives zero") {
    std::vector<Matd> groups = {Matd::Ones(4, 3), Matd::Constant(3, 3, 2.0)};
    CHECK(mmodality(groups, 50, 1) == 0.0);
  }
  SUBCASE("mutual distance d gives d") {
    Matd g1(2, 2);
    g1 << 0, 0, 3, 4;  // distance 5
    std::vector<Matd> groups = {g1};
    CHECK(mmodality(groups, 100, 1) == doctest::Approx(5.0));
  }
  SUBCASE("groups with fewer than 2 generations rejected") {
    std::vector<Matd> groups = {Matd::Ones(1, 3)};
    CHECK_THROWS_AS(mmodality(groups, 10, 0), InvalidArgument);
  }
}

TEST_CASE("retrieval encoders produce unit embeddings and train on a toy task") {
  RetrievalConfig cfg;
  cfg.d_motion = 10;
  cfg.d_t = 6;
  cfg.joint_dim = 8;
  cfg.width = 16;
  Rng rng(19);
  RetrievalModel<double> model(cfg, rng);

  Rng drng(23);
  Matd motion = drng.gaussian<double>(16, 10);
  auto z = model.embed_motion(motion);
  CHECK(z.cols() == 8);
  CHECK(std::abs(z.norm() - 1.0) < 1e-5);
  auto zt = model.embed_text(drng.gaussian<double>(3, 6));
  CHECK(std::abs(zt.norm() - 1.0) < 1e-5);

  // two separable classes, a handful of InfoNCE steps pulls pairs together
  auto make_motion = [&](int cls, Rng& r) {
    Matd m = 0.1 * r.gaussian<double>(16, 10);
    m.col(cls).array() += 2.0;
    return m;
  };
  Matd text0 = Matd::Zero(2, 6), text1 = Matd::Zero(2, 6);
  text0(0, 0) = text0(1, 1) = 3.0;
  text1(0, 4) = text1(1, 5) = 3.0;

  nn::LrSchedule sched;
  sched.base_lr = 3e-3;
  sched.warmup_steps = 5;
  sched.total_steps = 120;
  nn::Adam<double> opt(model.parameters(), sched);
  for (int step = 0; step < 120; ++step) {
    nn::Graph<double> g;
    std::vector<nn::Node<double>*> zm, zt2;
    std::vector<Index> labels;
    for (int i = 0; i < 6; ++i) {
      const int cls = i % 2;
      zm.push_back(model.encode_motion(g, make_motion(cls, drng)));
      zt2.push_back(model.encode_text(g, cls == 0 ? text0 : text1));
      labels.push_back(cls);
    }
    auto* loss = info_nce(g, nn::concat_cols(g, zm), nn::concat_cols(g, zt2), labels,
                          cfg.temperature);
    opt.zero_grad();
    g.backward(loss);
    opt.step();
  }
  // after training, motions match their own class text
  int correct = 0;
  for (int i = 0; i < 20; ++i) {
    const int cls = i % 2;
    auto zm = model.embed_motion(make_motion(cls, drng));
    const double d0 = (zm - model.embed_text(text0)).norm();
    const double d1 = (zm - model.embed_text(text1)).norm();
    if ((cls == 0) == (d0 < d1)) ++correct;
  }
  CHECK(correct >= 18);
}
