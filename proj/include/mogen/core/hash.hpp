#pragma once

#include <cstdint>
#include <cstring>
#include <string>

namespace mogen {

// FNV-1a 64-bit, used for content hashes in checkpoints and manifests.
class Fnv1a {
 public:
  void update(const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      state_ ^= p[i];
      state_ *= 0x100000001b3ULL;
    }
  }
  void update(const std::string& s) { update(s.data(), s.size()); }

  std::uint64_t digest() const { return state_; }

  std::string hex() const {
    static const char* k = "0123456789abcdef";
    std::string out(16, '0');
    std::uint64_t v = state_;
    for (int i = 15; i >= 0; --i) {
      out[static_cast<std::size_t>(i)] = k[v & 0xf];
      v >>= 4;
    }
    return out;
  }

 private:
  std::uint64_t state_ = 0xcbf29ce484222325ULL;
};

inline std::string fnv1a_hex(const void* data, std::size_t n) {
  Fnv1a h;
  h.update(data, n);
  return h.hex();
}

inline std::string fnv1a_hex(const std::string& s) { return fnv1a_hex(s.data(), s.size()); }

inline std::uint64_t fnv1a_u64(const std::string& s) {
  Fnv1a h;
  h.update(s);
  return h.digest();
}

}  // namespace mogen
