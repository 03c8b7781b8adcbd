#pragma once

#include <cmath>
#include <utility>

#include "otm/time_grid.hpp"

namespace otm {

/// A point (x, v) of phase space R^n x R^n.
template <typename Scalar> struct PhasePointTpl {
  VectorX<Scalar> x;
  VectorX<Scalar> v;

  PhasePointTpl(VectorX<Scalar> position, VectorX<Scalar> velocity)
      : x(std::move(position)), v(std::move(velocity)) {
    detail::require_same_dim(x, v, "PhasePoint");
  }
};

using PhasePoint = PhasePointTpl<double>;

/**
 * Piecewise-affine curve subordinate to a time grid, stored by its nodal
 * values as the columns of an n x (l+1) matrix. The velocity on
 * (tau_{j-1}, tau_j) is the difference quotient of the adjacent nodes.
 */
template <typename Scalar> class PathTpl {
public:
  using Vec = VectorX<Scalar>;
  using Mat = MatrixX<Scalar>;
  using Grid = TimeGridTpl<Scalar>;

  PathTpl(Grid grid, Mat nodal) : grid_(std::move(grid)), nodal_(std::move(nodal)) {
    if (nodal_.cols() != grid_.size())
      throw DimensionError("Path: " + std::to_string(nodal_.cols()) +
                           " nodal values for a grid of " +
                           std::to_string(grid_.size()) + " nodes");
    if (nodal_.rows() < 1)
      throw DimensionError("Path: dimension must be >= 1");
    if (!nodal_.allFinite())
      throw InvalidArgument("Path: non-finite nodal value");
  }

  /// Affine interpolation of x -> y sampled on `grid`.
  static PathTpl line(const Grid &grid, const Vec &x, const Vec &y) {
    detail::require_same_dim(x, y, "Path::line");
    Mat nodal(x.size(), grid.size());
    const Scalar a = grid.start();
    const Scalar span = grid.span();
    for (Eigen::Index j = 0; j < grid.size(); ++j) {
      const Scalar s = (grid.node(j) - a) / span;
      nodal.col(j) = x + s * (y - x);
    }
    nodal.col(0) = x;
    nodal.col(grid.size() - 1) = y;
    return PathTpl(grid, std::move(nodal));
  }

  /// Nodal interpolation of a curve t -> f(t).
  template <typename F> static PathTpl sample(const Grid &grid, F &&f) {
    Vec first = f(grid.node(0));
    Mat nodal(first.size(), grid.size());
    nodal.col(0) = first;
    for (Eigen::Index j = 1; j < grid.size(); ++j)
      nodal.col(j) = f(grid.node(j));
    return PathTpl(grid, std::move(nodal));
  }

  Eigen::Index dim() const { return nodal_.rows(); }
  const Grid &grid() const { return grid_; }
  const Mat &nodes() const { return nodal_; }
  auto node(Eigen::Index j) const { return nodal_.col(j); }
  auto front() const { return nodal_.col(0); }
  auto back() const { return nodal_.col(nodal_.cols() - 1); }

  /// Constant velocity on interval j (1-based).
  Vec velocity(Eigen::Index j) const {
    return (nodal_.col(j) - nodal_.col(j - 1)) / grid_.step(j);
  }

  /// Position at time t (piecewise-affine evaluation).
  Vec at(Scalar t) const {
    const Eigen::Index j = grid_.locate(t);
    const Scalar t0 = grid_.node(j - 1);
    const Scalar t1 = grid_.node(j);
    if (t == t0)
      return nodal_.col(j - 1);
    if (t == t1)
      return nodal_.col(j);
    const Scalar s = (t - t0) / (t1 - t0);
    return (Scalar(1) - s) * nodal_.col(j - 1) + s * nodal_.col(j);
  }

  /// Largest nodal norm; the whole curve stays in this ball.
  Scalar max_norm() const { return nodal_.colwise().norm().maxCoeff(); }

private:
  Grid grid_;
  Mat nodal_;
};

using Path = PathTpl<double>;

} // namespace otm
