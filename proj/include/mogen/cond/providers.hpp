#pragma once

#include <fstream>
#include <map>
#include <string>

#include <json.hpp>

#include "mogen/cond/conditioning.hpp"
#include "mogen/io/npy.hpp"

namespace mogen::cond {

// Archive of precomputed embeddings keyed by clip id: a directory holding
// embeddings.json ({provider_id, dim, entries: {id: file.npy}}) next to the
// arrays. This is the adapter surface for real encoders; arrays are produced
// offline and loaded here without any model dependency.
class PrecomputedEmbeddings {
 public:
  explicit PrecomputedEmbeddings(const std::string& dir) : dir_(dir) {
    const std::string path = dir + "/embeddings.json";
    std::ifstream f(path);
    if (!f) throw MissingArtifact("precomputed embeddings: missing " + path);
    nlohmann::json j;
    f >> j;
    provider_id_ = j.at("provider_id").get<std::string>();
    dim_ = j.at("dim").get<Index>();
    for (const auto& [id, file] : j.at("entries").items())
      entries_[id] = file.get<std::string>();
  }

  bool has(const std::string& id) const { return entries_.count(id) > 0; }

  Matd load(const std::string& id) const {
    auto it = entries_.find(id);
    if (it == entries_.end())
      throw MissingArtifact("precomputed embeddings: no entry for id " + id);
    Matd m = io::load_npy(dir_ + "/" + it->second);
    if (m.cols() != dim_)
      throw ConfigError("precomputed embeddings: dimension mismatch for " + id + ": got " +
                        std::to_string(m.cols()) + ", manifest says " + std::to_string(dim_));
    return m;
  }

  const std::string& provider_id() const { return provider_id_; }
  Index dim() const { return dim_; }

  static void write(const std::string& dir, const std::string& provider_id, Index dim,
                    const std::map<std::string, Matd>& items) {
    nlohmann::json j;
    j["provider_id"] = provider_id;
    j["dim"] = dim;
    nlohmann::json entries = nlohmann::json::object();
    int k = 0;
    for (const auto& [id, m] : items) {
      const std::string file = "emb_" + std::to_string(k++) + ".npy";
      io::save_npy_f32(dir + "/" + file, m);
      entries[id] = file;
    }
    j["entries"] = entries;
    std::ofstream f(dir + "/embeddings.json");
    f << j.dump(2);
  }

 private:
  std::string dir_;
  std::string provider_id_;
  Index dim_ = 0;
  std::map<std::string, std::string> entries_;
};

// Text provider backed by a precomputed archive (keyed by the raw text).
class PrecomputedTextProvider : public TextProvider {
 public:
  explicit PrecomputedTextProvider(const std::string& dir) : store_(dir) {}
  TextEmbedding embed(const std::string& text) const override {
    return TextEmbedding{store_.load(text), store_.provider_id()};
  }
  Index dim() const override { return store_.dim(); }
  std::string id() const override { return store_.provider_id(); }

 private:
  PrecomputedEmbeddings store_;
};

}  // namespace mogen::cond
