#pragma once

#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "mogen/core/types.hpp"

namespace mogen::io {

// Versioned single-file checkpoint: magic, version, JSON header (kind, config
// echo, metadata, upstream hashes, tensor directory), raw tensor payload and a
// trailing content hash. Loaders reject wrong magic, version or hash.
constexpr std::uint32_t kCheckpointVersion = 1;

class CheckpointWriter {
 public:
  explicit CheckpointWriter(std::string kind) : kind_(std::move(kind)) {}

  void set_config(nlohmann::json cfg) { config_ = std::move(cfg); }
  void set_meta(nlohmann::json meta) { meta_ = std::move(meta); }

  void add_tensor_f32(const std::string& name, const Matd& m);
  void add_tensor_f64(const std::string& name, const Matd& m);
  template <class S>
  void add_param(const std::string& name, const MatX<S>& m) {
    add_tensor_f32(name, m.template cast<double>());
  }

  // Returns the content hash (hex).
  std::string write(const std::string& path);

 private:
  struct Entry {
    std::string name;
    std::string dtype;
    Index rows, cols;
    std::vector<char> bytes;
  };
  std::string kind_;
  nlohmann::json config_ = nlohmann::json::object();
  nlohmann::json meta_ = nlohmann::json::object();
  std::vector<Entry> tensors_;
};

class CheckpointReader {
 public:
  CheckpointReader(const std::string& path, const std::string& expected_kind);

  const nlohmann::json& config() const { return config_; }
  const nlohmann::json& meta() const { return meta_; }
  const std::string& content_hash() const { return hash_; }
  const std::string& kind() const { return kind_; }

  bool has(const std::string& name) const { return tensors_.count(name) > 0; }
  Matd tensor(const std::string& name) const;
  std::vector<std::string> tensor_names() const;

 private:
  struct Entry {
    std::string dtype;
    Index rows, cols;
    std::vector<char> bytes;
  };
  std::string kind_;
  nlohmann::json config_, meta_;
  std::map<std::string, Entry> tensors_;
  std::string hash_;
};

}  // namespace mogen::io
