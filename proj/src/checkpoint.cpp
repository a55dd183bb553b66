#include "mogen/io/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "mogen/core/hash.hpp"

namespace mogen::io {

namespace {
constexpr char kMagic[4] = {'M', 'O', 'G', 'N'};

template <class T>
std::vector<char> pack(const Matd& m) {
  std::vector<char> out(static_cast<std::size_t>(m.size()) * sizeof(T));
  T* p = reinterpret_cast<T*>(out.data());
  for (Index r = 0; r < m.rows(); ++r)
    for (Index c = 0; c < m.cols(); ++c) *p++ = static_cast<T>(m(r, c));
  return out;
}

template <class T>
Matd unpack(const std::vector<char>& bytes, Index rows, Index cols) {
  Matd m(rows, cols);
  const T* p = reinterpret_cast<const T*>(bytes.data());
  for (Index r = 0; r < rows; ++r)
    for (Index c = 0; c < cols; ++c) m(r, c) = static_cast<double>(*p++);
  return m;
}
}  // namespace

void CheckpointWriter::add_tensor_f32(const std::string& name, const Matd& m) {
  tensors_.push_back({name, "f32", m.rows(), m.cols(), pack<float>(m)});
}

void CheckpointWriter::add_tensor_f64(const std::string& name, const Matd& m) {
  tensors_.push_back({name, "f64", m.rows(), m.cols(), pack<double>(m)});
}

std::string CheckpointWriter::write(const std::string& path) {
  nlohmann::json header;
  header["kind"] = kind_;
  header["config"] = config_;
  header["meta"] = meta_;
  nlohmann::json dir = nlohmann::json::array();
  std::size_t offset = 0;
  for (const auto& t : tensors_) {
    dir.push_back({{"name", t.name},
                   {"dtype", t.dtype},
                   {"rows", t.rows},
                   {"cols", t.cols},
                   {"offset", offset},
                   {"bytes", t.bytes.size()}});
    offset += t.bytes.size();
  }
  header["tensors"] = dir;
  const std::string hj = header.dump();

  std::ofstream f(path, std::ios::binary);
  if (!f) throw InvalidArgument("checkpoint: cannot open for write: " + path);
  Fnv1a hash;
  auto put = [&](const void* data, std::size_t n) {
    f.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
    hash.update(data, n);
  };
  put(kMagic, 4);
  const std::uint32_t ver = kCheckpointVersion;
  put(&ver, 4);
  const std::uint64_t hlen = hj.size();
  put(&hlen, 8);
  put(hj.data(), hj.size());
  for (const auto& t : tensors_) put(t.bytes.data(), t.bytes.size());
  const std::string hex = hash.hex();
  f.write(hex.data(), 16);
  if (!f) throw InvalidArgument("checkpoint: write failed: " + path);
  return hex;
}

CheckpointReader::CheckpointReader(const std::string& path, const std::string& expected_kind) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw MissingArtifact("checkpoint: cannot open " + path);
  std::vector<char> all((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  require(all.size() > 32, "checkpoint: truncated file " + path);

  if (std::memcmp(all.data(), kMagic, 4) != 0)
    throw InvalidArgument("checkpoint: bad magic in " + path);
  std::uint32_t ver;
  std::memcpy(&ver, all.data() + 4, 4);
  if (ver != kCheckpointVersion)
    throw InvalidArgument("checkpoint: unsupported version " + std::to_string(ver) + " in " +
                          path);
  std::uint64_t hlen;
  std::memcpy(&hlen, all.data() + 8, 8);
  require(16 + hlen + 16 <= all.size(), "checkpoint: corrupt header length in " + path);

  const std::size_t body_end = all.size() - 16;
  hash_ = std::string(all.data() + body_end, 16);
  Fnv1a check;
  check.update(all.data(), body_end);
  if (check.hex() != hash_)
    throw InvalidArgument("checkpoint: content hash mismatch in " + path);

  nlohmann::json header = nlohmann::json::parse(
      std::string(all.data() + 16, static_cast<std::size_t>(hlen)));
  kind_ = header.at("kind").get<std::string>();
  if (kind_ != expected_kind)
    throw InvalidArgument("checkpoint: expected kind '" + expected_kind + "' but found '" +
                          kind_ + "' in " + path);
  config_ = header.at("config");
  meta_ = header.at("meta");

  const std::size_t payload = 16 + static_cast<std::size_t>(hlen);
  for (const auto& tj : header.at("tensors")) {
    Entry e;
    e.dtype = tj.at("dtype").get<std::string>();
    e.rows = tj.at("rows").get<Index>();
    e.cols = tj.at("cols").get<Index>();
    const auto off = tj.at("offset").get<std::size_t>();
    const auto n = tj.at("bytes").get<std::size_t>();
    require(payload + off + n <= body_end, "checkpoint: tensor out of bounds in " + path);
    e.bytes.assign(all.begin() + static_cast<std::ptrdiff_t>(payload + off),
                   all.begin() + static_cast<std::ptrdiff_t>(payload + off + n));
    tensors_.emplace(tj.at("name").get<std::string>(), std::move(e));
  }
}

Matd CheckpointReader::tensor(const std::string& name) const {
  auto it = tensors_.find(name);
  if (it == tensors_.end())
    throw InvalidArgument("checkpoint: missing tensor " + name);
  const Entry& e = it->second;
  if (e.dtype == "f32") return unpack<float>(e.bytes, e.rows, e.cols);
  if (e.dtype == "f64") return unpack<double>(e.bytes, e.rows, e.cols);
  throw InvalidArgument("checkpoint: unknown dtype " + e.dtype);
}

std::vector<std::string> CheckpointReader::tensor_names() const {
  std::vector<std::string> names;
  names.reserve(tensors_.size());
  for (const auto& [n, e] : tensors_) names.push_back(n);
  return names;
}

}  // namespace mogen::io
