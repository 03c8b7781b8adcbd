#include "otm/path_measures.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>

#include "otm/parallel.hpp"

namespace otm {

EmpiricalPathMeasure::EmpiricalPathMeasure(std::vector<Path> paths)
    : paths_(std::move(paths)) {
  if (paths_.empty())
    throw InvalidArgument("EmpiricalPathMeasure: no paths");
  const auto &first = paths_.front();
  for (const auto &p : paths_) {
    if (p.dim() != first.dim())
      throw DimensionError("EmpiricalPathMeasure: mixed dimensions");
    if (!detail::same_span(p.grid(), first.grid()))
      throw InvalidArgument("EmpiricalPathMeasure: paths live on different time spans");
  }
}

PhaseMeasure::PhaseMeasure(std::vector<PhasePoint> states) : states_(std::move(states)) {
  if (states_.empty())
    throw InvalidArgument("PhaseMeasure: no states");
  for (const auto &s : states_)
    if (s.x.size() != states_.front().x.size())
      throw DimensionError("PhaseMeasure: mixed dimensions");
}

EmpiricalPathMeasure push_forward_flow(const LagrangianModel &model, const PhaseMeasure &eta,
                                       const TimeGrid &grid, FlowKind kind,
                                       const FlowOptions &opts, int threads) {
  std::vector<std::optional<Path>> slots(eta.size());
  parallel_for(eta.size(), threads, [&](std::size_t i) {
    auto r = kind == FlowKind::reference ? reference_flow(model, eta[i], grid, opts)
                                         : discrete_flow(model, eta[i], grid, opts);
    slots[i].emplace(std::move(r.path));
  });
  std::vector<Path> paths;
  paths.reserve(slots.size());
  for (auto &s : slots)
    paths.push_back(std::move(*s));
  return EmpiricalPathMeasure(std::move(paths));
}

PointCloud marginal_at_time(const EmpiricalPathMeasure &pi, double t) {
  if (!(t >= pi.start() && t <= pi.end()))
    throw InvalidArgument("marginal_at_time: t = " + std::to_string(t) +
                          " lies outside the time span");
  std::vector<Vector> points;
  points.reserve(pi.size());
  for (const auto &p : pi.paths())
    points.push_back(p.at(std::clamp(t, p.grid().start(), p.grid().end())));
  return PointCloud(std::move(points));
}

double d_bl_upper(const EmpiricalPathMeasure &p, const EmpiricalPathMeasure &q, int threads) {
  const std::size_t n = p.size();
  if (q.size() != n)
    throw InvalidArgument("d_bl_upper: measures have different sizes");
  Matrix ground(n, n);
  parallel_for(n * n, threads, [&](std::size_t k) {
    const std::size_t i = k / n;
    const std::size_t j = k % n;
    ground(i, j) = std::min(d_gamma(p[i], q[j]), 2.0);
  });
  return solve_assignment(ground).average_cost;
}

SummaryStats summarize(std::vector<double> values) {
  if (values.empty())
    return {};
  SummaryStats s;
  double sum = 0;
  for (double v : values)
    sum += v;
  s.mean = sum / static_cast<double>(values.size());
  std::sort(values.begin(), values.end());
  s.max = values.back();
  // Linear interpolation between order statistics.
  auto quantile = [&](double q) {
    const double pos = q * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, values.size() - 1);
    return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
  };
  s.p50 = quantile(0.5);
  s.p90 = quantile(0.9);
  return s;
}

PhasePoint initial_phase_point(const Path &path) {
  return PhasePoint(path.node(0), (path.node(1) - path.node(0)) / path.grid().step(1));
}

ConcentrationReport concentration_diagnostics(const LagrangianModel &model,
                                              const EmpiricalPathMeasure &pi,
                                              const FlowOptions &opts, int threads) {
  ConcentrationReport r;
  const std::size_t n = pi.size();
  r.residuals.assign(n, 0);
  r.reconstruction.assign(n, 0);
  r.actions.assign(n, 0);
  parallel_for(n, threads, [&](std::size_t i) {
    const Path &path = pi[i];
    if (path.grid().intervals() >= 2)
      r.residuals[i] = el_residual(model, path);
    const auto ref = reference_flow(model, initial_phase_point(path), path.grid(), opts);
    r.reconstruction[i] = d_gamma(path, ref.path);
    r.actions[i] = midpoint_action(model, path);
  });
  r.residual = summarize(r.residuals);
  r.reconstruction_stats = summarize(r.reconstruction);
  r.action = summarize(r.actions);
  return r;
}

} // namespace otm
