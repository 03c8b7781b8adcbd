#pragma once

#include <algorithm>
#include <cmath>
#include <string>

#include "otm/types.hpp"

namespace otm {

/// Partition a = tau_0 < tau_1 < ... < tau_l = b of a time interval.
template <typename Scalar> class TimeGridTpl {
public:
  using Vec = VectorX<Scalar>;

  explicit TimeGridTpl(Vec nodes) : nodes_(std::move(nodes)) {
    if (nodes_.size() < 2)
      throw InvalidArgument("TimeGrid: need at least two nodes");
    for (Eigen::Index j = 0; j < nodes_.size(); ++j) {
      if (!std::isfinite(static_cast<double>(nodes_(j))))
        throw InvalidArgument("TimeGrid: non-finite node");
      if (j > 0 && !(nodes_(j) > nodes_(j - 1)))
        throw InvalidArgument("TimeGrid: nodes must be strictly increasing");
    }
  }

  /// `intervals` equal steps on [a, b]; the end nodes are exactly a and b.
  static TimeGridTpl uniform(Scalar a, Scalar b, Eigen::Index intervals) {
    if (intervals < 1)
      throw InvalidArgument("TimeGrid::uniform: need at least one interval");
    if (!(b > a))
      throw InvalidArgument("TimeGrid::uniform: need b > a");
    Vec t(intervals + 1);
    for (Eigen::Index j = 0; j <= intervals; ++j)
      t(j) = a + (b - a) * Scalar(j) / Scalar(intervals);
    t(intervals) = b;
    return TimeGridTpl(std::move(t));
  }

  /// Fewest uniform intervals with step <= h.
  static TimeGridTpl with_max_step(Scalar a, Scalar b, Scalar h) {
    if (!(h > 0))
      throw InvalidArgument("TimeGrid::with_max_step: need h > 0");
    using std::ceil;
    const double ratio = static_cast<double>((b - a) / h);
    const auto l = static_cast<Eigen::Index>(std::max(1.0, std::ceil(ratio - 1e-9)));
    return uniform(a, b, l);
  }

  Eigen::Index intervals() const { return nodes_.size() - 1; }
  Eigen::Index size() const { return nodes_.size(); }
  Scalar start() const { return nodes_(0); }
  Scalar end() const { return nodes_(nodes_.size() - 1); }
  Scalar span() const { return end() - start(); }
  Scalar node(Eigen::Index j) const { return nodes_(j); }
  const Vec &nodes() const { return nodes_; }

  /// Length of interval j, i.e. tau_j - tau_{j-1}, for j in 1..l.
  Scalar step(Eigen::Index j) const { return nodes_(j) - nodes_(j - 1); }

  /// Mesh size h = max_j (tau_j - tau_{j-1}).
  Scalar max_step() const {
    Scalar h = step(1);
    for (Eigen::Index j = 2; j <= intervals(); ++j)
      h = std::max(h, step(j));
    return h;
  }

  /// Index j in 1..l of the interval [tau_{j-1}, tau_j) containing t; the end
  /// point belongs to the last interval.
  Eigen::Index locate(Scalar t) const {
    if (t < start() || t > end())
      throw InvalidArgument("TimeGrid::locate: time outside the grid span");
    const Scalar *first = nodes_.data();
    const Scalar *last = first + nodes_.size();
    auto it = std::upper_bound(first + 1, last, t);
    Eigen::Index j = static_cast<Eigen::Index>(it - first);
    return std::min<Eigen::Index>(std::max<Eigen::Index>(j, 1), intervals());
  }

  bool operator==(const TimeGridTpl &other) const {
    return nodes_.size() == other.nodes_.size() && nodes_ == other.nodes_;
  }

private:
  Vec nodes_;
};

using TimeGrid = TimeGridTpl<double>;

} // namespace otm
