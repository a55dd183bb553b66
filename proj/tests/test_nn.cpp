#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "mogen/nn/attention.hpp"
#include "mogen/nn/conv.hpp"
#include "mogen/nn/graph.hpp"
#include "mogen/nn/ops.hpp"
#include "mogen/nn/optimizer.hpp"
#include "test_util.hpp"

using namespace mogen;
using namespace mogen::nn;
using mogen::testutil::fd_gradient;
using mogen::testutil::rel_error;

namespace {

// Checks one op's analytic gradient against central differences for every
// parameter the builder touches.
void check_grads(const std::function<Node<double>*(Graph<double>&)>& build,
                 std::vector<Param<double>*> params, double tol = 1e-7) {
  Graph<double> g;
  Node<double>* loss = build(g);
  for (auto* p : params) p->zero_grad();
  g.backward(loss);
  std::vector<Matd> analytic;
  for (auto* p : params) analytic.push_back(p->grad);

  for (std::size_t i = 0; i < params.size(); ++i) {
    Matd fd = fd_gradient(*params[i], [&] {
      Graph<double> g2;
      return build(g2)->value(0, 0);
    });
    CAPTURE(i);
    CHECK(rel_error(analytic[i], fd) < tol);
  }
}

}  // namespace

TEST_CASE("elementwise and matmul gradients") {
  Rng rng(7);
  Param<double> a("a", rng.gaussian<double>(4, 5));
  Param<double> b("b", rng.gaussian<double>(4, 5));
  Param<double> w("w", rng.gaussian<double>(3, 4));

  check_grads(
      [&](Graph<double>& g) {
        auto* na = g.leaf(a);
        auto* nb = g.leaf(b);
        auto* s = add(g, mul(g, na, nb), sub(g, na, scale(g, nb, 0.3)));
        auto* y = matmul(g, g.leaf(w), s);
        return mean_all(g, mul(g, y, y));
      },
      {&a, &b, &w});
}

TEST_CASE("activation gradients") {
  Rng rng(11);
  Param<double> x("x", rng.gaussian<double>(6, 3));
  for (int which = 0; which < 4; ++which) {
    check_grads(
        [&, which](Graph<double>& g) {
          auto* n = g.leaf(x);
          Node<double>* y = nullptr;
          switch (which) {
            case 0: y = relu(g, n); break;
            case 1: y = gelu(g, n); break;
            case 2: y = sigmoid(g, n); break;
            default: y = tanh_op(g, n); break;
          }
          return mean_all(g, mul(g, y, y));
        },
        {&x}, 1e-6);
  }
}

TEST_CASE("layer norm gradient") {
  Rng rng(13);
  Param<double> x("x", rng.gaussian<double>(8, 5));
  Param<double> gain("g", Matd::Ones(8, 1) + 0.1 * rng.gaussian<double>(8, 1));
  Param<double> bias("b", 0.1 * rng.gaussian<double>(8, 1));
  check_grads(
      [&](Graph<double>& g) {
        auto* y = layer_norm(g, g.leaf(x), g.leaf(gain), g.leaf(bias));
        return mean_all(g, mul(g, y, y));
      },
      {&x, &gain, &bias}, 1e-6);
}

TEST_CASE("softmax and cross entropy gradients") {
  Rng rng(17);
  Param<double> x("x", rng.gaussian<double>(7, 4));
  check_grads(
      [&](Graph<double>& g) {
        auto* y = softmax_cols(g, g.leaf(x));
        return mean_all(g, mul(g, y, y));
      },
      {&x}, 1e-6);

  std::vector<Index> labels = {2, 0, 6, 3};
  std::vector<double> weights = {1, 0, 1, 1};
  check_grads(
      [&](Graph<double>& g) {
        return cross_entropy_cols(g, g.leaf(x), labels, weights);
      },
      {&x}, 1e-6);
}

TEST_CASE("bce huber mse gradients") {
  Rng rng(19);
  Param<double> x("x", rng.gaussian<double>(5, 4));
  Matd targets(5, 4);
  for (Index c = 0; c < 4; ++c)
    for (Index r = 0; r < 5; ++r) targets(r, c) = (rng.uniform() < 0.5) ? 0.0 : 1.0;
  check_grads(
      [&](Graph<double>& g) {
        return bce_from_probs(g, sigmoid(g, g.leaf(x)), targets);
      },
      {&x}, 1e-6);

  Param<double> p("p", rng.gaussian<double>(6, 6) * 2.0);
  Param<double> t("t", rng.gaussian<double>(6, 6));
  check_grads([&](Graph<double>& g) { return huber(g, g.leaf(p), g.leaf(t), 1.0); },
              {&p, &t}, 1e-5);
  check_grads([&](Graph<double>& g) { return mse(g, g.leaf(p), g.leaf(t)); }, {&p, &t},
              1e-6);
}

TEST_CASE("shape op gradients") {
  Rng rng(23);
  Param<double> x("x", rng.gaussian<double>(4, 9));
  std::vector<Index> idx = {0, 3, 3, 7, 1};
  check_grads(
      [&](Graph<double>& g) {
        auto* n = g.leaf(x);
        auto* a = slice_cols(g, n, 1, 4);
        auto* b = gather_cols(g, n, idx);
        auto* c = concat_cols(g, {a, b});
        auto* d = cumsum_cols(g, c);
        auto* e = mean_pool_cols(g, d, 3);
        return mean_all(g, mul(g, e, e));
      },
      {&x}, 1e-6);
}

TEST_CASE("colwise scale and bias gradients") {
  Rng rng(29);
  Param<double> x("x", rng.gaussian<double>(5, 7));
  Param<double> v("v", rng.gaussian<double>(5, 1));
  Param<double> b("b", rng.gaussian<double>(5, 1));
  check_grads(
      [&](Graph<double>& g) {
        auto* y = add_bias(g, colwise_scale(g, g.leaf(x), g.leaf(v)), g.leaf(b));
        return mean_all(g, mul(g, y, y));
      },
      {&x, &v, &b}, 1e-6);
}

TEST_CASE("l2 normalize gradient") {
  Rng rng(31);
  Param<double> x("x", rng.gaussian<double>(6, 4));
  Matd t = rng.gaussian<double>(6, 4);
  check_grads(
      [&](Graph<double>& g) {
        auto* y = l2_normalize_cols(g, g.leaf(x));
        return mse(g, y, g.constant(t));
      },
      {&x}, 1e-6);
}

TEST_CASE("conv1d and upsample gradients") {
  Rng rng(37);
  const Index cin = 3, cout = 4, k = 3, t = 10;
  Param<double> x("x", rng.gaussian<double>(cin, t));
  Param<double> w("w", rng.gaussian<double>(cout, cin * k) * 0.5);
  Param<double> b("b", rng.gaussian<double>(cout, 1) * 0.1);

  SUBCASE("same padding") {
    check_grads(
        [&](Graph<double>& g) {
          auto* y = conv1d(g, g.leaf(x), g.leaf(w), g.leaf(b), k, 1, 1);
          return mean_all(g, mul(g, y, y));
        },
        {&x, &w, &b}, 1e-6);
  }
  SUBCASE("strided") {
    Param<double> w4("w4", rng.gaussian<double>(cout, cin * 4) * 0.5);
    check_grads(
        [&](Graph<double>& g) {
          auto* y = conv1d(g, g.leaf(x), g.leaf(w4), g.leaf(b), 4, 2, 1);
          return mean_all(g, mul(g, y, y));
        },
        {&x, &w4, &b}, 1e-6);
  }
  SUBCASE("upsample") {
    check_grads(
        [&](Graph<double>& g) {
          auto* y = upsample_repeat(g, g.leaf(x), 2);
          return mean_all(g, mul(g, y, y));
        },
        {&x}, 1e-6);
  }
}

TEST_CASE("grouped attention gradient") {
  Rng rng(41);
  const Index d = 8, heads = 2, n = 6, m = 5;
  Param<double> q("q", rng.gaussian<double>(d, n));
  Param<double> k("k", rng.gaussian<double>(d, m));
  Param<double> v("v", rng.gaussian<double>(d, m));
  // overlapping kv groups, like cross attention with a shared source
  std::vector<AttnGroup> groups = {
      {{0, 1, 2}, {0, 1, 2, 3, 4}},
      {{3, 4, 5}, {0, 1, 2, 3, 4}},
  };
  check_grads(
      [&](Graph<double>& g) {
        auto* y = grouped_attention(g, g.leaf(q), g.leaf(k), g.leaf(v), groups, heads);
        return mean_all(g, mul(g, y, y));
      },
      {&q, &k, &v}, 1e-6);

  // self attention with per-timestep spatial groups
  std::vector<AttnGroup> spatial;
  for (Index t = 0; t < 3; ++t) spatial.push_back({{t, t + 3}, {t, t + 3}});
  Param<double> x("x", rng.gaussian<double>(d, 6));
  check_grads(
      [&](Graph<double>& g) {
        auto* n0 = g.leaf(x);
        auto* y = grouped_attention(g, n0, n0, n0, spatial, heads);
        return mean_all(g, mul(g, y, y));
      },
      {&x}, 1e-6);
}

TEST_CASE("straight through routes gradient unchanged") {
  Rng rng(43);
  Param<double> x("x", rng.gaussian<double>(3, 3));
  Matd q = rng.gaussian<double>(3, 3);

  Graph<double> g;
  auto* n = g.leaf(x);
  auto* st = straight_through(g, q, n);
  CHECK(st->value == q);
  auto* loss = mean_all(g, mul(g, st, st));
  x.zero_grad();
  g.backward(loss);
  // d/dst mean(st^2) = 2 st / n, routed into x unchanged
  Matd expect = 2.0 * q / 9.0;
  CHECK(rel_error(x.grad, expect) < 1e-12);
}

TEST_CASE("adam descends a quadratic") {
  Param<float> p("p", Matf::Constant(2, 2, 5.0f));
  LrSchedule sched;
  sched.base_lr = 0.1;
  sched.warmup_steps = 0;
  sched.total_steps = 400;
  Adam<float> opt({&p}, sched);
  for (int i = 0; i < 400; ++i) {
    opt.zero_grad();
    Graph<float> g;
    auto* loss = mse(g, g.leaf(p), g.constant(Matf::Zero(2, 2)));
    g.backward(loss);
    opt.step();
  }
  CHECK(p.value.cwiseAbs().maxCoeff() < 0.05f);
}

TEST_CASE("lr schedule warmup and decay") {
  LrSchedule s;
  s.base_lr = 1.0;
  s.warmup_steps = 10;
  s.total_steps = 110;
  s.min_lr_ratio = 0.1;
  CHECK(s.at(0) == doctest::Approx(0.1));
  CHECK(s.at(9) == doctest::Approx(1.0));
  CHECK(s.at(10) == doctest::Approx(1.0));
  CHECK(s.at(110) == doctest::Approx(0.1));
  for (Index i = 10; i < 110; ++i) CHECK(s.at(i) >= s.at(i + 1) - 1e-12);
}
