#include "mogen/io/npy.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

namespace mogen::io {

namespace {

struct Header {
  std::string descr;
  std::vector<Index> shape;
};

std::string make_header(const std::string& descr, const std::vector<Index>& shape) {
  std::ostringstream dict;
  dict << "{'descr': '" << descr << "', 'fortran_order': False, 'shape': (";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    dict << shape[i];
    if (shape.size() == 1 || i + 1 < shape.size()) dict << (shape.size() == 1 ? "," : "");
    if (i + 1 < shape.size()) dict << ", ";
  }
  dict << "), }";
  std::string d = dict.str();
  // pad with spaces so that magic(6)+ver(2)+len(2)+dict is a multiple of 64
  std::size_t total = 10 + d.size() + 1;
  std::size_t pad = (64 - total % 64) % 64;
  d.append(pad, ' ');
  d.push_back('\n');
  return d;
}

void write_file(const std::string& path, const std::string& descr,
                const std::vector<Index>& shape, const void* data, std::size_t bytes) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw InvalidArgument("npy: cannot open for write: " + path);
  const std::string d = make_header(descr, shape);
  const char magic[] = "\x93NUMPY";
  f.write(magic, 6);
  char ver[2] = {1, 0};
  f.write(ver, 2);
  const std::uint16_t hlen = static_cast<std::uint16_t>(d.size());
  f.write(reinterpret_cast<const char*>(&hlen), 2);
  f.write(d.data(), static_cast<std::streamsize>(d.size()));
  f.write(static_cast<const char*>(data), static_cast<std::streamsize>(bytes));
  if (!f) throw InvalidArgument("npy: write failed: " + path);
}

Header read_header(std::ifstream& f, const std::string& path) {
  char magic[6];
  f.read(magic, 6);
  if (!f || std::memcmp(magic, "\x93NUMPY", 6) != 0)
    throw InvalidArgument("npy: bad magic in " + path);
  char ver[2];
  f.read(ver, 2);
  std::uint32_t hlen = 0;
  if (ver[0] == 1) {
    std::uint16_t h16;
    f.read(reinterpret_cast<char*>(&h16), 2);
    hlen = h16;
  } else {
    f.read(reinterpret_cast<char*>(&hlen), 4);
  }
  std::string dict(hlen, '\0');
  f.read(dict.data(), hlen);

  Header h;
  auto dpos = dict.find("'descr':");
  auto q1 = dict.find('\'', dpos + 8);
  auto q2 = dict.find('\'', q1 + 1);
  h.descr = dict.substr(q1 + 1, q2 - q1 - 1);
  if (dict.find("'fortran_order': False") == std::string::npos)
    throw InvalidArgument("npy: fortran order unsupported: " + path);
  auto spos = dict.find("'shape':");
  auto p1 = dict.find('(', spos);
  auto p2 = dict.find(')', p1);
  std::string nums = dict.substr(p1 + 1, p2 - p1 - 1);
  std::istringstream ns(nums);
  std::string tok;
  while (std::getline(ns, tok, ',')) {
    bool has_digit = false;
    for (char c : tok)
      if (c >= '0' && c <= '9') has_digit = true;
    if (has_digit) h.shape.push_back(static_cast<Index>(std::stoll(tok)));
  }
  return h;
}

template <class T>
Matd read_as_double(std::ifstream& f, Index rows, Index cols) {
  std::vector<T> buf(static_cast<std::size_t>(rows * cols));
  f.read(reinterpret_cast<char*>(buf.data()),
         static_cast<std::streamsize>(buf.size() * sizeof(T)));
  Matd m(rows, cols);
  for (Index r = 0; r < rows; ++r)
    for (Index c = 0; c < cols; ++c)
      m(r, c) = static_cast<double>(buf[static_cast<std::size_t>(r * cols + c)]);
  return m;
}

}  // namespace

void save_npy(const std::string& path, const Matd& m) {
  std::vector<double> buf(static_cast<std::size_t>(m.size()));
  for (Index r = 0; r < m.rows(); ++r)
    for (Index c = 0; c < m.cols(); ++c)
      buf[static_cast<std::size_t>(r * m.cols() + c)] = m(r, c);
  write_file(path, "<f8", {m.rows(), m.cols()}, buf.data(), buf.size() * 8);
}

void save_npy_f32(const std::string& path, const Matd& m) {
  std::vector<float> buf(static_cast<std::size_t>(m.size()));
  for (Index r = 0; r < m.rows(); ++r)
    for (Index c = 0; c < m.cols(); ++c)
      buf[static_cast<std::size_t>(r * m.cols() + c)] = static_cast<float>(m(r, c));
  write_file(path, "<f4", {m.rows(), m.cols()}, buf.data(), buf.size() * 4);
}

void save_npy(const std::string& path, const Mati& m) {
  std::vector<std::int32_t> buf(static_cast<std::size_t>(m.size()));
  for (Index r = 0; r < m.rows(); ++r)
    for (Index c = 0; c < m.cols(); ++c)
      buf[static_cast<std::size_t>(r * m.cols() + c)] = m(r, c);
  write_file(path, "<i4", {m.rows(), m.cols()}, buf.data(), buf.size() * 4);
}

void save_npy(const std::string& path, const std::vector<float>& v) {
  write_file(path, "<f4", {static_cast<Index>(v.size())}, v.data(), v.size() * 4);
}

Matd load_npy(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw MissingArtifact("npy: cannot open " + path);
  Header h = read_header(f, path);
  Index rows = 1, cols = 1;
  if (h.shape.size() == 1) {
    rows = h.shape[0];
  } else if (h.shape.size() == 2) {
    rows = h.shape[0];
    cols = h.shape[1];
  } else {
    throw InvalidArgument("npy: only 1-D/2-D supported: " + path);
  }
  if (h.descr == "<f4") return read_as_double<float>(f, rows, cols);
  if (h.descr == "<f8") return read_as_double<double>(f, rows, cols);
  if (h.descr == "<i4") return read_as_double<std::int32_t>(f, rows, cols);
  if (h.descr == "<i8") return read_as_double<std::int64_t>(f, rows, cols);
  throw InvalidArgument("npy: unsupported dtype " + h.descr + " in " + path);
}

Mati load_npy_int(const std::string& path) {
  Matd d = load_npy(path);
  Mati m(d.rows(), d.cols());
  for (Index r = 0; r < d.rows(); ++r)
    for (Index c = 0; c < d.cols(); ++c) m(r, c) = static_cast<int>(d(r, c));
  return m;
}

bool file_exists(const std::string& path) {
  std::ifstream f(path);
  return f.good();
}

}  // namespace mogen::io
