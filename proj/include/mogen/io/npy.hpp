#pragma once

#include <string>
#include <vector>

#include "mogen/core/types.hpp"

namespace mogen::io {

// Minimal NumPy .npy reader/writer (format version 1.0, C order).
// Supports 1-D and 2-D arrays of float32/float64/int32/int64.
// Matrices are written row-major with shape (rows, cols).

void save_npy(const std::string& path, const Matd& m);
void save_npy_f32(const std::string& path, const Matd& m);
void save_npy(const std::string& path, const Mati& m);
void save_npy(const std::string& path, const std::vector<float>& v);

Matd load_npy(const std::string& path);       // any supported dtype, cast to double
Mati load_npy_int(const std::string& path);   // int32/int64 only

bool file_exists(const std::string& path);

}  // namespace mogen::io
