#pragma once

#include <cstddef>
#include <vector>

#include "otm/integrators.hpp"

namespace otm {

/// Uniform empirical measure (1/N) sum_i delta_{x_i} on R^n.
class PointCloud {
public:
  explicit PointCloud(std::vector<Vector> points);

  std::size_t size() const { return points_.size(); }
  Eigen::Index dim() const { return points_.front().size(); }
  const Vector &operator[](std::size_t i) const { return points_[i]; }
  const std::vector<Vector> &points() const { return points_; }

private:
  std::vector<Vector> points_;
};

/// Row i is matched to column perm[i].
struct AssignmentPlan {
  std::vector<int> perm;
  double total_cost = 0;
  double average_cost = 0;
};

enum class CostKind { bvp, closed_form };

/// Closed-form Lagrangian cost for the free particle and the harmonic
/// oscillator, with `time` the interval length. Throws for other models, and
/// for harmonic spans at or beyond half a period.
double closed_form_cost(const LagrangianModel &model, const Vector &x, const Vector &y,
                        double time);
bool has_closed_form_cost(const LagrangianModel &model);

/// Continuous minimizing extremal for the closed-form models, sampled on `grid`.
Path closed_form_extremal(const LagrangianModel &model, const Vector &x, const Vector &y,
                          const TimeGrid &grid);

/// Matrix of costs c(x_i, y_j); BVP entries are the discrete costs (midpoint
/// action of the discrete extremal). Entries are computed concurrently.
Matrix cost_matrix(const LagrangianModel &model, const PointCloud &source,
                   const PointCloud &target, const TimeGrid &grid, CostKind kind,
                   const BvpOptions &bvp = {}, int threads = 1);

/// Optimal assignment by the Hungarian algorithm (O(N^3)).
AssignmentPlan solve_assignment(const Matrix &costs);

/// Exhaustive search over all permutations, N <= 9. Ties go to the
/// lexicographically smallest permutation.
AssignmentPlan brute_force_assignment(const Matrix &costs);

/// Plan for a given permutation, summed in row order.
AssignmentPlan make_plan(const Matrix &costs, std::vector<int> perm);

} // namespace otm
