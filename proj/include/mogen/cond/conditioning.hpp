#pragma once

#include <cmath>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "mogen/core/hash.hpp"
#include "mogen/core/rng.hpp"
#include "mogen/core/types.hpp"

namespace mogen::cond {

struct TextEmbedding {
  Matd tokens;  // n_t x d_t, full sequence (not pooled)
  std::string provider_id;
};

struct AudioEmbedding {
  Matd frames;  // T x d_a at exactly 30 Hz
  std::string provider_id;
};

class TextProvider {
 public:
  virtual ~TextProvider() = default;
  virtual TextEmbedding embed(const std::string& text) const = 0;
  virtual Index dim() const = 0;
  virtual std::string id() const = 0;
};

class AudioProvider {
 public:
  virtual ~AudioProvider() = default;
  virtual AudioEmbedding embed(const std::vector<float>& waveform, int sample_rate) const = 0;
  virtual Index dim() const = 0;
  virtual std::string id() const = 0;
};

// Desk-scale text encoder: each whitespace token maps through a seeded hash to
// a fixed random vector, so embeddings are reproducible and distinct across a
// small label vocabulary. Empty text yields a single null row.
class HashedTextStub : public TextProvider {
 public:
  explicit HashedTextStub(Index d_t = 64, std::uint64_t table_seed = 0x7461626c65ULL,
                          int max_tokens = 32)
      : d_t_(d_t), table_seed_(table_seed), max_tokens_(max_tokens) {}

  TextEmbedding embed(const std::string& text) const override {
    std::vector<std::string> toks;
    std::istringstream ss(text);
    std::string t;
    while (ss >> t && static_cast<int>(toks.size()) < max_tokens_) toks.push_back(t);
    TextEmbedding e;
    e.provider_id = id();
    if (toks.empty()) {
      e.tokens = Matd::Zero(1, d_t_);
      return e;
    }
    e.tokens.resize(static_cast<Index>(toks.size()), d_t_);
    for (std::size_t i = 0; i < toks.size(); ++i) {
      Rng rng(fnv1a_u64(toks[i]) ^ table_seed_);
      for (Index k = 0; k < d_t_; ++k) e.tokens(static_cast<Index>(i), k) = rng.normal();
    }
    return e;
  }

  Index dim() const override { return d_t_; }
  std::string id() const override { return "text-stub-v1"; }

 private:
  Index d_t_;
  std::uint64_t table_seed_;
  int max_tokens_;
};

// Desk-scale audio encoder: 30 Hz frames of windowed energy, log energy, zero
// crossing rate and a bank of Goertzel band powers; remaining dims stay zero.
class EnergyAudioStub : public AudioProvider {
 public:
  explicit EnergyAudioStub(Index d_a = 64) : d_a_(d_a) {
    require(d_a_ >= 4, "EnergyAudioStub: d_a >= 4");
  }

  AudioEmbedding embed(const std::vector<float>& wave, int sample_rate) const override {
    require(sample_rate > 0, "embed_audio: sample_rate must be positive");
    require(!wave.empty(), "embed_audio: empty waveform");
    const double dur = static_cast<double>(wave.size()) / sample_rate;
    Index frames = static_cast<Index>(std::lround(dur * 30.0));
    if (frames < 1) frames = 1;
    AudioEmbedding e;
    e.provider_id = id();
    e.frames = Matd::Zero(frames, d_a_);
    const Index n_bands = std::min<Index>(8, d_a_ - 3);
    std::vector<double> band_hz(static_cast<std::size_t>(n_bands));
    const double f_lo = 100.0, f_hi = std::min(1800.0, 0.45 * sample_rate);
    for (Index b = 0; b < n_bands; ++b)
      band_hz[static_cast<std::size_t>(b)] =
          f_lo * std::pow(f_hi / f_lo, n_bands > 1 ? static_cast<double>(b) / (n_bands - 1) : 0.0);

    for (Index i = 0; i < frames; ++i) {
      const auto s0 = static_cast<std::size_t>(
          std::min<double>(static_cast<double>(wave.size() - 1),
                           std::floor(static_cast<double>(i) * sample_rate / 30.0)));
      auto s1 = static_cast<std::size_t>(
          std::min<double>(static_cast<double>(wave.size()),
                           std::floor(static_cast<double>(i + 1) * sample_rate / 30.0)));
      if (s1 <= s0) s1 = s0 + 1;
      double energy = 0.0;
      Index zc = 0;
      for (std::size_t s = s0; s < s1; ++s) {
        energy += static_cast<double>(wave[s]) * wave[s];
        if (s > s0 && (wave[s] >= 0.0f) != (wave[s - 1] >= 0.0f)) ++zc;
      }
      const auto n = static_cast<double>(s1 - s0);
      const double rms = std::sqrt(energy / n);
      e.frames(i, 0) = rms;
      e.frames(i, 1) = std::log1p(rms);
      e.frames(i, 2) = static_cast<double>(zc) / n;
      for (Index b = 0; b < n_bands; ++b) {
        // Goertzel power at the band frequency
        const double w = 2.0 * M_PI * band_hz[static_cast<std::size_t>(b)] / sample_rate;
        const double coeff = 2.0 * std::cos(w);
        double q0 = 0.0, q1 = 0.0, q2 = 0.0;
        for (std::size_t s = s0; s < s1; ++s) {
          q0 = coeff * q1 - q2 + wave[s];
          q2 = q1;
          q1 = q0;
        }
        const double power = q1 * q1 + q2 * q2 - coeff * q1 * q2;
        e.frames(i, 3 + b) = std::sqrt(std::max(0.0, power)) / n;
      }
    }
    return e;
  }

  Index dim() const override { return d_a_; }
  std::string id() const override { return "audio-stub-v1"; }

 private:
  Index d_a_;
};

// Average-pool 30 Hz audio frames to the token rate. Tolerates inputs short by
// less than one pooling group via edge replication; rejects grossly short ones.
inline Matd align_audio_to_tokens(const AudioEmbedding& a, Index l, Index downsample) {
  require(l >= 1 && downsample >= 1, "align_audio_to_tokens: bad sizes");
  const Index need = l * downsample;
  const Index have = a.frames.rows();
  require(have * 2 >= need, "align_audio_to_tokens: audio too short for token grid");
  Matd padded(need, a.frames.cols());
  for (Index i = 0; i < need; ++i) padded.row(i) = a.frames.row(std::min(i, have - 1));
  Matd out(l, a.frames.cols());
  for (Index j = 0; j < l; ++j)
    out.row(j) = padded.middleRows(j * downsample, downsample).colwise().mean();
  return out;
}

}  // namespace mogen::cond
