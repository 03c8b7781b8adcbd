#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <sstream>

#include "otm/parallel.hpp"
#include "otm/pipeline.hpp"

namespace otm {

void check_horizon(const LagrangianModel &model, double span, bool allow_long_horizon) {
  if (allow_long_horizon || model.bounded_potential())
    return;
  const double horizon = admissible_horizon(model, Scheme::midpoint);
  if (span > horizon * (1 + 1e-12)) {
    std::ostringstream msg;
    msg.precision(6);
    msg << "time span " << span << " exceeds the admissible horizon sqrt(m/(32 c2)) = "
        << horizon << " for model '" << model.name() << "' (c2 = " << model.c2() << ")";
    throw HorizonError(msg.str());
  }
}

namespace {

bool closed_form_usable(const LagrangianModel &model, double span) {
  if (!has_closed_form_cost(model))
    return false;
  if (model.kind() == ModelKind::harmonic)
    return std::sqrt(model.param("k").value() / model.mass()) * span < std::numbers::pi;
  return true;
}

} // namespace

OtmSolution solve_discrete_otm(const LagrangianModel &model, const PointCloud &source,
                               const PointCloud &target, const TimeGrid &grid,
                               const OtmOptions &opts) {
  if (source.size() != target.size())
    throw InvalidArgument("solve_discrete_otm: source and target sizes differ");
  if (source.dim() != target.dim())
    throw DimensionError("solve_discrete_otm: source and target dimensions differ");
  check_horizon(model, grid.span(), opts.allow_long_horizon);

  CostKind kind = CostKind::bvp;
  if (opts.cost == CostChoice::closed_form ||
      (opts.cost == CostChoice::automatic && closed_form_usable(model, grid.span())))
    kind = CostKind::closed_form;
  const Matrix costs = cost_matrix(model, source, target, grid, kind, opts.bvp, opts.threads);
  const AssignmentPlan assignment = solve_assignment(costs);

  const std::size_t n = source.size();
  std::vector<std::optional<BvpResult>> solved(n);
  parallel_for(n, opts.threads, [&](std::size_t i) {
    auto r = solve_bvp(model, source[i], target[static_cast<std::size_t>(assignment.perm[i])],
                       grid, opts.bvp);
    if (!r.converged)
      throw ConvergenceError("solve_discrete_otm: extremal for pair " + std::to_string(i) +
                                 " failed: " + r.diagnostic,
                             r.residual);
    solved[i].emplace(std::move(r));
  });

  std::vector<Path> paths;
  paths.reserve(n);
  double total = 0;
  for (std::size_t i = 0; i < n; ++i) {
    total += solved[i]->cost;
    paths.push_back(std::move(solved[i]->path));
  }
  return {EmpiricalPathMeasure(std::move(paths)), assignment,
          total / static_cast<double>(n)};
}

EmpiricalPathMeasure build_recovery_measure(const EmpiricalPathMeasure &templates,
                                            const PointCloud &source,
                                            const PointCloud &target, double eps) {
  const std::size_t n = source.size();
  if (target.size() != n)
    throw InvalidArgument("build_recovery_measure: source and target sizes differ");
  if (source.dim() != templates.dim() || target.dim() != templates.dim())
    throw DimensionError("build_recovery_measure: dimension mismatch");
  const double a = templates.start();
  const double b = templates.end();
  const double span = b - a;
  if (!(eps > 0) || !(eps < span / 2))
    throw InvalidArgument("build_recovery_measure: eps must lie in (0, (b - a)/2)");

  // Nearest template by starting point; ties go to the lower index.
  std::vector<std::size_t> chosen(n);
  for (std::size_t i = 0; i < n; ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < templates.size(); ++k) {
      const double d = (templates[k].front() - source[i]).squaredNorm();
      if (d < best) {
        best = d;
        chosen[i] = k;
      }
    }
  }
  // Targets go to the chosen templates' end points.
  Matrix gap(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      gap(i, j) = (templates[chosen[i]].back() - target[j]).squaredNorm();
  const auto match = solve_assignment(gap);

  std::vector<Path> paths;
  paths.reserve(n);
  const double squeeze = (span - 2 * eps) / span;
  for (std::size_t i = 0; i < n; ++i) {
    const Path &tpl = templates[chosen[i]];
    const Eigen::Index nodes = tpl.grid().size();
    Vector times(nodes + 2);
    Matrix values(tpl.dim(), nodes + 2);
    times(0) = a;
    values.col(0) = source[i];
    for (Eigen::Index j = 0; j < nodes; ++j) {
      times(j + 1) = a + eps + (tpl.grid().node(j) - tpl.grid().start()) * squeeze;
      values.col(j + 1) = tpl.node(j);
    }
    times(nodes + 1) = b;
    values.col(nodes + 1) = target[static_cast<std::size_t>(match.perm[i])];
    paths.emplace_back(TimeGrid(std::move(times)), std::move(values));
  }
  return EmpiricalPathMeasure(std::move(paths));
}

} // namespace otm
