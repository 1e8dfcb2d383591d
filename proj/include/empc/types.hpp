#pragma once

#include <Eigen/Core>

#include <limits>
#include <stdexcept>
#include <string>

namespace empc {

// State/control vectors are tiny; cap the dimension so they live on the stack.
inline constexpr int kMaxDim = 4;
using Vec = Eigen::Matrix<double, Eigen::Dynamic, 1, Eigen::ColMajor, kMaxDim, 1>;

inline constexpr double kInf = std::numeric_limits<double>::infinity();

// Relative tolerance (fraction of a cell) below which an interpolation
// coordinate is snapped onto a node. Keeps node queries exact and makes
// lattice-aligned dynamics (e.g. x+u on commensurate grids) hit nodes.
inline constexpr double kSnapEps = 1e-9;

struct ContractViolation : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct InversionFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DataCorruption : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct CalibrationFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct InfeasibleSplit : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline Vec make_vec(std::initializer_list<double> xs) {
  Vec v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v[i++] = x;
  return v;
}

inline Vec scalar_vec(double x) {
  Vec v(1);
  v[0] = x;
  return v;
}

}  // namespace empc
