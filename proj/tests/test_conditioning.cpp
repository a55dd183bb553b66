#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "mogen/cond/conditioning.hpp"
#include "mogen/cond/providers.hpp"

using namespace mogen;
using namespace mogen::cond;

TEST_CASE("text stub determinism and vocabulary separation") {
  HashedTextStub stub(64);
  auto a = stub.embed("walk");
  auto b = stub.embed("walk");
  CHECK(a.tokens == b.tokens);
  CHECK(a.tokens.rows() == 1);
  CHECK(a.tokens.cols() == 64);

  auto w = stub.embed("wave");
  const double cosine = a.tokens.row(0).dot(w.tokens.row(0)) /
                        (a.tokens.row(0).norm() * w.tokens.row(0).norm());
  CHECK(std::abs(cosine) < 0.5);

  auto empty = stub.embed("");
  CHECK(empty.tokens.rows() == 1);
  CHECK(empty.tokens.cwiseAbs().maxCoeff() == 0.0);

  auto multi = stub.embed("open and close hands");
  CHECK(multi.tokens.rows() == 4);
  // token-wise: same word embeds identically wherever it appears
  auto multi2 = stub.embed("close and open hands");
  CHECK((multi.tokens.row(1) - multi2.tokens.row(1)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("audio stub frame rate") {
  EnergyAudioStub stub(64);
  const int sr = 4000;
  SUBCASE("two seconds gives 60 frames") {
    std::vector<float> wave(static_cast<std::size_t>(2.0 * sr), 0.1f);
    auto e = stub.embed(wave, sr);
    CHECK(e.frames.rows() == 60);
    CHECK(e.frames.cols() == 64);
  }
  SUBCASE("frame count tracks duration within one frame") {
    Rng rng(3);
    for (double dur : {0.31, 0.5, 1.27, 3.333, 7.77}) {
      std::vector<float> wave(static_cast<std::size_t>(dur * sr));
      for (auto& s : wave) s = static_cast<float>(rng.normal());
      auto e = stub.embed(wave, sr);
      CHECK(std::abs(static_cast<double>(e.frames.rows()) - 30.0 * dur) <= 1.0);
    }
  }
  SUBCASE("silence gives constant rows") {
    std::vector<float> wave(8000, 0.0f);
    auto e = stub.embed(wave, sr);
    for (Index i = 1; i < e.frames.rows(); ++i)
      CHECK((e.frames.row(i) - e.frames.row(0)).cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("empty waveform rejected") {
    CHECK_THROWS_AS(stub.embed({}, sr), InvalidArgument);
  }
  SUBCASE("determinism") {
    std::vector<float> wave(4000);
    Rng rng(5);
    for (auto& s : wave) s = static_cast<float>(rng.normal());
    auto e1 = stub.embed(wave, sr);
    auto e2 = stub.embed(wave, sr);
    CHECK(e1.frames == e2.frames);
  }
}

TEST_CASE("2 Hz amplitude modulation shows up with period 15 frames") {
  EnergyAudioStub stub(16);
  const int sr = 4000;
  const double dur = 4.0;
  std::vector<float> wave(static_cast<std::size_t>(dur * sr));
  for (std::size_t i = 0; i < wave.size(); ++i) {
    const double t = static_cast<double>(i) / sr;
    const double env = 0.55 + 0.45 * std::sin(2.0 * M_PI * 2.0 * t);
    wave[i] = static_cast<float>(env * std::sin(2.0 * M_PI * 440.0 * t));
  }
  auto e = stub.embed(wave, sr);
  REQUIRE(e.frames.rows() == 120);
  Vecd energy = e.frames.col(0);
  energy.array() -= energy.mean();
  // autocorrelation peak across candidate lags must land at ~15
  double best = -1e9;
  Index best_lag = 0;
  for (Index lag = 5; lag <= 40; ++lag) {
    double acc = 0.0;
    for (Index i = 0; i + lag < energy.size(); ++i) acc += energy(i) * energy(i + lag);
    if (acc > best) {
      best = acc;
      best_lag = lag;
    }
  }
  CHECK(best_lag >= 14);
  CHECK(best_lag <= 16);
}

TEST_CASE("align audio to token rate") {
  AudioEmbedding a;
  a.provider_id = "audio-stub-v1";
  SUBCASE("120 frames pool to 30 tokens") {
    Rng rng(9);
    a.frames = rng.gaussian<double>(120, 8);
    Matd out = align_audio_to_tokens(a, 30, 4);
    CHECK(out.rows() == 30);
    CHECK(out.cols() == 8);
    // pooled values equal the mean of each 4-frame group
    for (Index j = 0; j < 30; ++j)
      CHECK((out.row(j) - a.frames.middleRows(j * 4, 4).colwise().mean()).cwiseAbs().maxCoeff() <
            1e-12);
  }
  SUBCASE("constant input stays constant") {
    a.frames = Matd::Constant(120, 4, 2.5);
    Matd out = align_audio_to_tokens(a, 30, 4);
    CHECK((out.array() - 2.5).abs().maxCoeff() < 1e-12);
  }
  SUBCASE("short input pads by edge replication") {
    a.frames = Matd::Ones(118, 4);
    Matd out = align_audio_to_tokens(a, 30, 4);
    CHECK(out.rows() == 30);
  }
  SUBCASE("grossly short input rejected") {
    a.frames = Matd::Ones(20, 4);
    CHECK_THROWS_AS(align_audio_to_tokens(a, 30, 4), InvalidArgument);
  }
}

TEST_CASE("precomputed embedding archive") {
  namespace fs = std::filesystem;
  const std::string dir = "/tmp/mogen_test_emb";
  fs::create_directories(dir);
  Rng rng(17);
  std::map<std::string, Matd> items;
  items["walk"] = rng.gaussian<double>(3, 16);
  items["wave"] = rng.gaussian<double>(2, 16);
  PrecomputedEmbeddings::write(dir, "t5-large-export", 16, items);

  PrecomputedEmbeddings store(dir);
  CHECK(store.provider_id() == "t5-large-export");
  CHECK(store.dim() == 16);
  CHECK(store.has("walk"));
  CHECK_FALSE(store.has("run"));
  Matd m = store.load("walk");
  CHECK(m.rows() == 3);
  CHECK((m - items["walk"]).cwiseAbs().maxCoeff() < 1e-6);
  CHECK_THROWS_AS(store.load("run"), MissingArtifact);

  // dimension mismatch between manifest and array is a load error
  PrecomputedEmbeddings::write(dir, "t5-large-export", 8, items);
  PrecomputedEmbeddings bad(dir);
  CHECK_THROWS_AS(bad.load("walk"), ConfigError);

  PrecomputedTextProvider prov(dir);
  CHECK(prov.id() == "t5-large-export");
  CHECK_THROWS_AS(PrecomputedEmbeddings("/tmp/mogen_missing_emb_dir"), MissingArtifact);
}
