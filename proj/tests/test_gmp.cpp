#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "mogen/gmp/gmp.hpp"
#include "mogen/motion/synthetic.hpp"
#include "test_util.hpp"

using namespace mogen;
using namespace mogen::gmp;
using mogen::testutil::rel_error;

namespace {

GmpConfig tiny_cfg() {
  GmpConfig cfg;
  cfg.n_layers = 1;
  cfg.width = 8;
  cfg.heads = 2;
  cfg.aux_position_weight = 0.5;
  return cfg;
}

}  // namespace

TEST_CASE("gmp output shape and determinism") {
  Rng rng(3);
  GlobalMotionPredictor<double> gmp(tiny_cfg(), rng);
  Rng drng(5);
  const Index L = 6;
  Matd j_p = drng.gaussian<double>(L, 21 * 3);
  Matd j_v = drng.gaussian<double>(L, 22 * 3);
  Matd v1 = gmp.predict(j_p, j_v);
  CHECK(v1.rows() == L);
  CHECK(v1.cols() == 2);
  Matd v2 = gmp.predict(j_p, j_v);
  CHECK((v1 - v2).cwiseAbs().maxCoeff() == 0.0);

  CHECK_THROWS_AS(gmp.predict(j_p.leftCols(10), j_v), InvalidArgument);
}

TEST_CASE("gmp loss values") {
  Rng rng(7);
  Matd gt = rng.gaussian<double>(10, 2);
  SUBCASE("perfect prediction") {
    CHECK(gmp_loss_value(gt, gt, 0.5) == 0.0);
  }
  SUBCASE("aux weight 0 gives pure huber") {
    Matd pred = gt;
    pred.array() += 0.1;
    const double withw = gmp_loss_value(pred, gt, 0.0);
    double huber = 0.0;
    for (Index i = 0; i < pred.size(); ++i) huber += 0.5 * 0.1 * 0.1;
    huber /= static_cast<double>(pred.size());
    CHECK(withw == doctest::Approx(huber).epsilon(1e-9));
  }
  SUBCASE("constant bias: auxiliary term has the closed form") {
    const Index T = 17;
    const double b = 0.03, w = 0.7;
    Matd pred = Matd::Zero(T, 2);
    Matd gtz = Matd::Zero(T, 2);
    pred.array() += b;
    // brute-force cumulative-sum oracle
    double aux_oracle = 0.0;
    for (Index t = 1; t <= T; ++t) aux_oracle += 2.0 * std::pow(b * static_cast<double>(t), 2);
    aux_oracle /= static_cast<double>(2 * T);
    const double closed = b * b * static_cast<double>((T + 1) * (2 * T + 1)) / 6.0;
    CHECK(aux_oracle == doctest::Approx(closed).epsilon(1e-12));
    const double total = gmp_loss_value(pred, gtz, w);
    const double huber_part = 0.5 * b * b;
    CHECK(total == doctest::Approx(huber_part + w * closed).epsilon(1e-9));
  }
}

TEST_CASE("gmp gradient matches finite differences") {
  for (std::uint64_t seed : {1ull, 2ull, 3ull, 4ull, 5ull, 6ull, 7ull, 8ull, 9ull, 10ull}) {
    Rng rng(seed);
    GmpConfig cfg = tiny_cfg();
    GlobalMotionPredictor<double> gmp(cfg, rng);
    Rng drng(seed + 100);
    const Index L = 3;
    Matd j_p = drng.gaussian<double>(L, 21 * 3);
    Matd j_v = drng.gaussian<double>(L, 22 * 3);
    Matd gt = drng.gaussian<double>(2, L);  // (2 x L) to match the forward node

    auto eval = [&] {
      nn::Graph<double> g;
      auto* pred = gmp.forward(g, j_p, j_v);
      return gmp_loss(g, pred, gt, cfg)->value(0, 0);
    };

    nn::Graph<double> g;
    auto* pred = gmp.forward(g, j_p, j_v);
    auto* loss = gmp_loss(g, pred, gt, cfg);
    for (auto* p : gmp.parameters()) p->zero_grad();
    g.backward(loss);

    double worst = 0.0;
    for (auto* p : gmp.parameters()) {
      Matd analytic = p->grad;
      Matd fd = testutil::fd_gradient(*p, eval, 1e-6);
      worst = std::max(worst, rel_error(analytic, fd));
    }
    CAPTURE(seed);
    CHECK(worst < 1e-4);
  }
}

TEST_CASE("prediction ignores the excluded r_x r_z features") {
  // the predictor consumes only j_p/j_v: a clip's excluded root-plane
  // velocities can change without affecting the prediction
  auto clip = motion::generate_synthetic_clip(11, 0, 32);
  const auto& lay = clip.motion.layout;
  const auto jp_span = lay.span("j_p");
  const auto jv_span = lay.span("j_v");
  Matd j_p_all = clip.motion.data.middleCols(jp_span.start, jp_span.length);
  Matd j_v_all = clip.motion.data.middleCols(jv_span.start, jv_span.length);
  Matd j_p = j_p_all.leftCols(21 * 3);
  Matd j_v = j_v_all.leftCols(22 * 3);

  Rng rng(13);
  GlobalMotionPredictor<double> gmp(tiny_cfg(), rng);
  Matd v1 = gmp.predict(j_p, j_v);
  // mutate r_x/r_z in the source sequence: inputs to the predictor unchanged
  clip.motion.data.col(lay.span("r_x").start).array() += 123.0;
  clip.motion.data.col(lay.span("r_z").start).array() -= 55.0;
  Matd j_p2 = clip.motion.data.middleCols(jp_span.start, jp_span.length).leftCols(21 * 3);
  Matd v2 = gmp.predict(j_p2, j_v);
  CHECK((v1 - v2).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("attach_translation inverts the exclusion") {
  auto clip = motion::generate_synthetic_clip(17, 1, 24);
  const auto& lay = clip.motion.layout;
  motion::MotionSequence local = clip.motion;
  Matd gt_vel(clip.motion.frames(), 2);
  gt_vel.col(0) = clip.motion.data.col(lay.span("r_x").start);
  gt_vel.col(1) = clip.motion.data.col(lay.span("r_z").start);
  local.data.col(lay.span("r_x").start).setZero();
  local.data.col(lay.span("r_z").start).setZero();

  motion::MotionSequence back = gmp::attach_translation(local, gt_vel);
  CHECK((back.data - clip.motion.data).cwiseAbs().maxCoeff() == 0.0);

  motion::MotionSequence zeroed = gmp::attach_translation(local, Matd::Zero(local.frames(), 2));
  Matd traj = motion::integrate_root(
      zeroed.data.col(lay.span("r_a").start), zeroed.data.col(lay.span("r_x").start),
      zeroed.data.col(lay.span("r_z").start), zeroed.data.col(lay.span("r_y").start));
  CHECK(traj.col(0).cwiseAbs().maxCoeff() == 0.0);  // in-place motion
  CHECK(traj.col(2).cwiseAbs().maxCoeff() == 0.0);

  CHECK_THROWS_AS(gmp::attach_translation(local, Matd::Zero(3, 2)), InvalidArgument);
}
