#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "mogen/sampler/sampler.hpp"

using namespace mogen;
using namespace mogen::sampler;
using mogen::gen::ConditionBundle;
using mogen::gen::GeneratorConfig;
using mogen::gen::MaskedGenerator;
using mogen::vq::TokenGrid;

namespace {

GeneratorConfig tiny_cfg(Index K = 8) {
  GeneratorConfig cfg;
  cfg.n_blocks = 1;
  cfg.width = 16;
  cfg.heads = 2;
  cfg.film_every = 1;
  cfg.K = K;
  cfg.d_t = 4;
  cfg.d_a = 4;
  cfg.audio_width = 4;
  cfg.max_positions = 128;
  return cfg;
}

ConditionBundle make_cond(Rng& rng, Index l, const GeneratorConfig& cfg) {
  ConditionBundle c;
  c.text_tokens = {rng.gaussian<double>(2, cfg.d_t)};
  c.audio_tokens = rng.gaussian<double>(l, cfg.d_a);
  return c;
}

}  // namespace

TEST_CASE("cfg_combine identities") {
  Rng rng(3);
  Matd c = rng.gaussian<double>(8, 5);
  Matd u = rng.gaussian<double>(8, 5);

  // s = 0: bitwise equality with the conditional logits
  Matd g0 = cfg_combine(c, u, 0.0);
  CHECK((g0.array() == c.array()).all());

  // c = u: identity for any s
  for (double s : {0.0, 1.0, 6.0}) {
    Matd gs = cfg_combine(c, c, s);
    CHECK((gs - c).cwiseAbs().maxCoeff() < 1e-12);
  }

  Matd c1(1, 1), u1(1, 1);
  c1 << 2.0;
  u1 << 1.0;
  CHECK(cfg_combine(c1, u1, 6.0)(0, 0) == doctest::Approx(8.0));

  CHECK_THROWS_AS(cfg_combine(c, Matd::Zero(8, 4), 1.0), InvalidArgument);
}

TEST_CASE("one step with steps=1 commits everything") {
  Rng rng(5);
  GeneratorConfig gcfg = tiny_cfg();
  MaskedGenerator<double> model(gcfg, rng);
  SamplerConfig cfg;
  cfg.steps = 1;
  cfg.seed = 7;
  Sampler<double> sampler(model, cfg);
  Rng crng(9);
  ConditionBundle cond = make_cond(crng, 12, gcfg);
  TokenGrid out = sampler.generate(cond, 12);
  CHECK_FALSE(out.has_mask());
  CHECK(out.length() == 12);
}

TEST_CASE("committed count follows the schedule when it progresses") {
  Rng rng(11);
  GeneratorConfig gcfg = tiny_cfg();
  MaskedGenerator<double> model(gcfg, rng);
  SamplerConfig cfg;
  cfg.steps = 4;
  cfg.seed = 3;
  Sampler<double> sampler(model, cfg);
  Rng crng(13);
  const Index l = 30;
  ConditionBundle cond = make_cond(crng, l, gcfg);

  SamplerState st = sampler.init_state(TokenGrid::all_mask(l, 8));
  Rng step_rng(cfg.seed);
  for (Index i = 0; i < cfg.steps; ++i) {
    sampler.sample_step(st, cond, step_rng);
    const Index expected = l - gen::cosine_mask_count(l, static_cast<double>(i + 1) / cfg.steps);
    // schedule strictly progresses at (l=30, steps=4), so no forced floor
    for (Index p = 0; p < 3; ++p) {
      Index committed = 0;
      for (Index t = 0; t < l; ++t) committed += st.committed(t, p);
      CHECK(committed == expected);
    }
  }
  CHECK_FALSE(st.grid.has_mask());
}

TEST_CASE("generation is deterministic in the seed") {
  Rng rng(17);
  GeneratorConfig gcfg = tiny_cfg();
  MaskedGenerator<double> model(gcfg, rng);
  SamplerConfig cfg;
  cfg.steps = 6;
  cfg.seed = 42;
  Sampler<double> sampler(model, cfg);
  Rng crng(19);
  ConditionBundle cond = make_cond(crng, 10, gcfg);
  TokenGrid a = sampler.generate(cond, 10);
  TokenGrid b = sampler.generate(cond, 10);
  CHECK(a.tokens == b.tokens);

  SamplerConfig cfg2 = cfg;
  cfg2.seed = 43;
  Sampler<double> sampler2(model, cfg2);
  TokenGrid c = sampler.generate(cond, 10);
  CHECK(a.tokens == c.tokens);
}

TEST_CASE("sampler invariants over fuzzed sizes") {
  Rng rng(23);
  GeneratorConfig gcfg = tiny_cfg();
  gcfg.n_blocks = 1;
  MaskedGenerator<double> model(gcfg, rng);
  Rng fuzz(29);
  for (int trial = 0; trial < 6; ++trial) {
    const Index l = 1 + fuzz.uniform_int(64);
    SamplerConfig cfg;
    cfg.steps = 1 + fuzz.uniform_int(32);
    cfg.seed = fuzz.next_u64();
    Sampler<double> sampler(model, cfg);
    ConditionBundle cond = make_cond(fuzz, l, gcfg);

    SamplerState st = sampler.init_state(TokenGrid::all_mask(l, 8));
    Rng step_rng(cfg.seed);
    Mati prev_tokens = st.grid.tokens;
    Mati prev_committed = st.committed;
    Veci prev_mask_count(3);
    for (Index p = 0; p < 3; ++p) prev_mask_count(p) = static_cast<int>(l);

    for (Index i = 0; i < cfg.steps && st.grid.has_mask(); ++i) {
      sample_checkpoint:;
      sampler.sample_step(st, cond, step_rng);
      for (Index p = 0; p < 3; ++p) {
        int mask_count = 0;
        for (Index t = 0; t < l; ++t) {
          // committed tokens never change
          if (prev_committed(t, p)) {
            CHECK(st.committed(t, p) == 1);
            CHECK(st.grid.tokens(t, p) == prev_tokens(t, p));
          }
          if (st.grid.tokens(t, p) == 8) ++mask_count;
        }
        // MASK count strictly decreases until zero
        if (prev_mask_count(p) > 0) CHECK(mask_count < prev_mask_count(p));
        prev_mask_count(p) = mask_count;
      }
      prev_tokens = st.grid.tokens;
      prev_committed = st.committed;
    }
    CHECK_FALSE(st.grid.has_mask());
    CAPTURE(l);
    CAPTURE(cfg.steps);
  }
}

TEST_CASE("extend keeps the overlap bit-exactly and windows add up") {
  Rng rng(31);
  GeneratorConfig gcfg = tiny_cfg();
  MaskedGenerator<double> model(gcfg, rng);
  SamplerConfig cfg;
  cfg.steps = 4;
  cfg.seed = 5;
  cfg.overlap_tokens = 3;
  Sampler<double> sampler(model, cfg);
  Rng crng(37);
  ConditionBundle cond = make_cond(crng, 30, gcfg);

  TokenGrid cur = sampler.generate(cond, 30);
  for (int w = 0; w < 5; ++w) {
    const Index prev_len = cur.length();
    Mati before = cur.tokens;
    cur = sampler.extend(cur, cond, 27);
    CHECK(cur.length() == prev_len + 27);
    // the prior content, including the overlap source rows, is untouched
    CHECK((cur.tokens.topRows(prev_len) - before).cwiseAbs().maxCoeff() == 0);
    CHECK_FALSE(cur.has_mask());
  }
  CHECK(cur.length() == 30 + 5 * 27);  // 165 tokens = 660 frames = 22 s at 30 fps

  SUBCASE("zero overlap works") {
    SamplerConfig c0 = cfg;
    c0.overlap_tokens = 0;
    Sampler<double> s0(model, c0);
    ConditionBundle cond8 = make_cond(crng, 8, gcfg);
    TokenGrid base = s0.generate(cond8, 8);
    TokenGrid ext = s0.extend(base, cond8, 8);
    CHECK(ext.length() == 16);
    CHECK((ext.tokens.topRows(8) - base.tokens).cwiseAbs().maxCoeff() == 0);
  }
  SUBCASE("overlap larger than prev rejected") {
    SamplerConfig c9 = cfg;
    c9.overlap_tokens = 9;
    Sampler<double> s9(model, c9);
    ConditionBundle cond8 = make_cond(crng, 8, gcfg);
    TokenGrid small = sampler.generate(cond8, 8);
    CHECK_THROWS_AS(s9.extend(small, cond8, 4), InvalidArgument);
  }
}

TEST_CASE("inpaint preserves given tokens") {
  Rng rng(41);
  GeneratorConfig gcfg = tiny_cfg();
  MaskedGenerator<double> model(gcfg, rng);
  SamplerConfig cfg;
  cfg.steps = 5;
  cfg.seed = 11;
  Sampler<double> sampler(model, cfg);
  Rng crng(43);
  ConditionBundle cond = make_cond(crng, 18, gcfg);

  TokenGrid full = sampler.generate(cond, 18);
  SUBCASE("no MASK is the identity") {
    TokenGrid out = sampler.inpaint(full, cond);
    CHECK(out.tokens == full.tokens);
  }
  SUBCASE("middle third refilled, rest bit-exact") {
    TokenGrid partial = full;
    for (Index t = 6; t < 12; ++t)
      for (Index p = 0; p < 3; ++p) partial.tokens(t, p) = 8;
    TokenGrid out = sampler.inpaint(partial, cond);
    CHECK_FALSE(out.has_mask());
    for (Index t = 0; t < 18; ++t)
      for (Index p = 0; p < 3; ++p)
        if (t < 6 || t >= 12) CHECK(out.tokens(t, p) == full.tokens(t, p));
  }
}

TEST_CASE("capacity limit and forward-pair budget") {
  Rng rng(47);
  GeneratorConfig gcfg = tiny_cfg();
  gcfg.max_positions = 32;
  MaskedGenerator<double> model(gcfg, rng);
  SamplerConfig cfg;  // defaults: 24 steps
  cfg.seed = 1;
  Sampler<double> sampler(model, cfg);
  Rng crng(53);
  ConditionBundle cond = make_cond(crng, 30, gcfg);

  CHECK_THROWS_AS(sampler.generate(cond, 33), InvalidArgument);

  model.reset_forward_counters();
  TokenGrid out = sampler.generate(cond, 30);
  CHECK_FALSE(out.has_mask());
  // one conditional + one unconditional generator forward per iteration
  CHECK(model.generator_forwards() <= 2 * 24);
  CHECK(model.generator_forwards() % 2 == 0);
  CHECK(model.critic_forwards() <= 24);
}
