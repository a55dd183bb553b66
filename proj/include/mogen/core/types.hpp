#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace mogen {

// Dense dynamic-size aliases used throughout. Column-major (Eigen default);
// sequence data inside the nn stack is laid out features x time, one column
// per position.
template <class S>
using MatX = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
template <class S>
using VecX = Eigen::Matrix<S, Eigen::Dynamic, 1>;
template <class S>
using RowVecX = Eigen::Matrix<S, 1, Eigen::Dynamic>;

using Index = Eigen::Index;

using Matd = MatX<double>;
using Vecd = VecX<double>;
using Matf = MatX<float>;
using Vecf = VecX<float>;
using Mati = MatX<int>;
using Veci = VecX<int>;

// Error for violated operation preconditions (maps to CLI exit code 2/4
// depending on context).
class InvalidArgument : public std::invalid_argument {
 public:
  explicit InvalidArgument(const std::string& what) : std::invalid_argument(what) {}
};

class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

class MissingArtifact : public std::runtime_error {
 public:
  explicit MissingArtifact(const std::string& what) : std::runtime_error(what) {}
};

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw InvalidArgument(msg);
}

}  // namespace mogen
