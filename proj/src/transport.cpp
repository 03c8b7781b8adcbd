#include "otm/transport.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <string>

#include "otm/parallel.hpp"

namespace otm {

PointCloud::PointCloud(std::vector<Vector> points) : points_(std::move(points)) {
  if (points_.empty())
    throw InvalidArgument("PointCloud: empty point set");
  const auto n = points_.front().size();
  if (n == 0)
    throw DimensionError("PointCloud: zero-dimensional points");
  for (const auto &p : points_) {
    if (p.size() != n)
      throw DimensionError("PointCloud: mixed dimensions");
    if (!p.allFinite())
      throw InvalidArgument("PointCloud: non-finite coordinate");
  }
}

namespace {

double harmonic_omega(const LagrangianModel &model) {
  return std::sqrt(model.param("k").value() / model.mass());
}

void check_time(double time, const char *what) {
  if (!(time > 0) || !std::isfinite(time))
    throw InvalidArgument(std::string(what) + ": interval length must be positive");
}

} // namespace

bool has_closed_form_cost(const LagrangianModel &model) {
  return model.kind() == ModelKind::free_particle ||
         (model.kind() == ModelKind::harmonic && model.param("k").has_value());
}

double closed_form_cost(const LagrangianModel &model, const Vector &x, const Vector &y,
                        double time) {
  detail::require_same_dim(x, y, "closed_form_cost");
  check_time(time, "closed_form_cost");
  const double m = model.mass();
  if (model.kind() == ModelKind::free_particle)
    return m * (y - x).squaredNorm() / (2 * time);
  if (!has_closed_form_cost(model))
    throw InvalidArgument("closed_form_cost: no closed form for model '" + model.name() + "'");
  const double w = harmonic_omega(model);
  if (w * time >= std::numbers::pi)
    throw InvalidArgument("closed_form_cost: harmonic span reaches half a period");
  return m * w * ((x.squaredNorm() + y.squaredNorm()) * std::cos(w * time) - 2 * x.dot(y)) /
         (2 * std::sin(w * time));
}

Path closed_form_extremal(const LagrangianModel &model, const Vector &x, const Vector &y,
                          const TimeGrid &grid) {
  detail::require_same_dim(x, y, "closed_form_extremal");
  if (model.kind() == ModelKind::free_particle)
    return Path::line(grid, x, y);
  if (!has_closed_form_cost(model))
    throw InvalidArgument("closed_form_extremal: no closed form for model '" +
                          model.name() + "'");
  const double w = harmonic_omega(model);
  const double T = grid.span();
  if (w * T >= std::numbers::pi)
    throw InvalidArgument("closed_form_extremal: harmonic span reaches half a period");
  const Vector b = (y - x * std::cos(w * T)) / std::sin(w * T);
  Matrix nodes(x.size(), grid.size());
  for (Eigen::Index j = 0; j < grid.size(); ++j) {
    const double s = grid.node(j) - grid.start();
    nodes.col(j) = x * std::cos(w * s) + b * std::sin(w * s);
  }
  nodes.col(0) = x;
  nodes.col(grid.size() - 1) = y;
  return Path(grid, std::move(nodes));
}

Matrix cost_matrix(const LagrangianModel &model, const PointCloud &source,
                   const PointCloud &target, const TimeGrid &grid, CostKind kind,
                   const BvpOptions &bvp, int threads) {
  const std::size_t n = source.size();
  if (target.size() != n)
    throw InvalidArgument("cost_matrix: source has " + std::to_string(n) +
                          " points, target has " + std::to_string(target.size()));
  if (source.dim() != target.dim())
    throw DimensionError("cost_matrix: source and target dimensions differ");
  Matrix costs(n, n);
  if (kind == CostKind::closed_form) {
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        costs(i, j) = closed_form_cost(model, source[i], target[j], grid.span());
    return costs;
  }
  parallel_for(n * n, threads, [&](std::size_t k) {
    const std::size_t i = k / n;
    const std::size_t j = k % n;
    const auto r = solve_bvp(model, source[i], target[j], grid, bvp);
    if (!r.converged)
      throw ConvergenceError("cost_matrix: boundary value problem failed for pair (" +
                                 std::to_string(i) + ", " + std::to_string(j) +
                                 "): " + r.diagnostic,
                             r.residual);
    costs(i, j) = r.cost;
  });
  return costs;
}

AssignmentPlan make_plan(const Matrix &costs, std::vector<int> perm) {
  const auto n = costs.rows();
  if (static_cast<Eigen::Index>(perm.size()) != n)
    throw InvalidArgument("make_plan: permutation has the wrong length");
  std::vector<char> seen(perm.size(), 0);
  double total = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const int j = perm[i];
    if (j < 0 || j >= n || seen[j])
      throw InvalidArgument("make_plan: not a permutation");
    seen[j] = 1;
    total += costs(i, j);
  }
  return {std::move(perm), total, total / static_cast<double>(n)};
}

namespace {

void check_square(const Matrix &costs, const char *what) {
  if (costs.rows() == 0 || costs.rows() != costs.cols())
    throw InvalidArgument(std::string(what) + ": cost matrix must be square and nonempty");
  if (!costs.allFinite())
    throw InvalidArgument(std::string(what) + ": cost matrix has non-finite entries");
}

} // namespace

AssignmentPlan solve_assignment(const Matrix &costs) {
  check_square(costs, "solve_assignment");
  const Eigen::Index n = costs.rows();
  const Matrix a = costs.array() - costs.minCoeff();
  const double inf = std::numeric_limits<double>::infinity();

  // Shortest augmenting paths with dual potentials; 1-based, index 0 is a sentinel.
  std::vector<double> u(n + 1, 0), v(n + 1, 0);
  std::vector<Eigen::Index> p(n + 1, 0), way(n + 1, 0);
  for (Eigen::Index i = 1; i <= n; ++i) {
    p[0] = i;
    Eigen::Index j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const Eigen::Index i0 = p[j0];
      double delta = inf;
      Eigen::Index j1 = 0;
      for (Eigen::Index j = 1; j <= n; ++j) {
        if (used[j])
          continue;
        const double cur = a(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (Eigen::Index j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const Eigen::Index j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<int> perm(n);
  for (Eigen::Index j = 1; j <= n; ++j)
    perm[p[j] - 1] = static_cast<int>(j - 1);
  return make_plan(costs, std::move(perm));
}

AssignmentPlan brute_force_assignment(const Matrix &costs) {
  check_square(costs, "brute_force_assignment");
  if (costs.rows() > 9)
    throw InvalidArgument("brute_force_assignment: N must be at most 9");
  std::vector<int> perm(costs.rows());
  std::iota(perm.begin(), perm.end(), 0);
  std::vector<int> best = perm;
  double best_total = std::numeric_limits<double>::infinity();
  do {
    double total = 0;
    for (std::size_t i = 0; i < perm.size(); ++i)
      total += costs(static_cast<Eigen::Index>(i), perm[i]);
    if (total < best_total) {
      best_total = total;
      best = perm;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  return make_plan(costs, std::move(best));
}

} // namespace otm
