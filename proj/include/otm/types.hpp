#pragma once

#include <Eigen/Dense>

#include <string>

#include "otm/errors.hpp"

namespace otm {

template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

using Vector = VectorX<double>;
using Matrix = MatrixX<double>;

/// Time discretization used by an action functional or a diagnostic.
enum class Scheme { continuous, midpoint };

namespace detail {

template <typename DA, typename DB>
void require_same_dim(const Eigen::MatrixBase<DA> &a,
                      const Eigen::MatrixBase<DB> &b, const char *what) {
  if (a.size() == 0 || a.size() != b.size())
    throw DimensionError(std::string(what) + ": dimension mismatch (" +
                         std::to_string(a.size()) + " vs " +
                         std::to_string(b.size()) + ")");
}

} // namespace detail
} // namespace otm
