#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "otm/lagrangian.hpp"
#include "otm/path.hpp"
#include "otm/quadrature.hpp"

namespace otm {

/// Integral of |gamma'|^2 over the path (exact for piecewise-affine curves).
template <typename Scalar> Scalar kinetic_integral(const PathTpl<Scalar> &path) {
  Scalar sum = 0;
  for (Eigen::Index j = 1; j <= path.grid().intervals(); ++j)
    sum += (path.node(j) - path.node(j - 1)).squaredNorm() / path.grid().step(j);
  return sum;
}

/**
 * Action A(gamma) of the piecewise-affine path: the kinetic part is exact per
 * interval, the potential part uses composite Gauss-Legendre quadrature with
 * `quad_points` nodes per interval.
 */
template <typename Scalar>
Scalar continuous_action(const LagrangianModelTpl<Scalar> &model,
                         const PathTpl<Scalar> &path, int quad_points = 5) {
  if (quad_points < 1)
    throw InvalidArgument("continuous_action: need at least one quadrature point");
  const auto rule = gauss_legendre<Scalar>(quad_points);
  const auto &grid = path.grid();
  Scalar kinetic = 0;
  Scalar potential = 0;
  VectorX<Scalar> x(path.dim());
  for (Eigen::Index j = 1; j <= grid.intervals(); ++j) {
    const Scalar dt = grid.step(j);
    const auto x0 = path.node(j - 1);
    const auto x1 = path.node(j);
    kinetic += (x1 - x0).squaredNorm() / dt;
    Scalar interval = 0;
    for (int q = 0; q < quad_points; ++q) {
      const Scalar s = (rule.nodes(q) + Scalar(1)) / Scalar(2);
      x = (Scalar(1) - s) * x0 + s * x1;
      interval += rule.weights(q) * model.potential(x);
    }
    potential += interval * dt / Scalar(2);
  }
  return model.mass() / Scalar(2) * kinetic - potential;
}

/// Midpoint-rule action
///   sum_j (m/2)|g_j - g_{j-1}|^2 / dt_j - V((g_j + g_{j-1})/2) dt_j.
template <typename Scalar>
Scalar midpoint_action(const LagrangianModelTpl<Scalar> &model,
                       const PathTpl<Scalar> &path) {
  const auto &grid = path.grid();
  const Scalar half_m = model.mass() / Scalar(2);
  Scalar sum = 0;
  VectorX<Scalar> mid(path.dim());
  for (Eigen::Index j = 1; j <= grid.intervals(); ++j) {
    const Scalar dt = grid.step(j);
    mid = (path.node(j) + path.node(j - 1)) / Scalar(2);
    sum += half_m * (path.node(j) - path.node(j - 1)).squaredNorm() / dt -
           model.potential(mid) * dt;
  }
  return sum;
}

/// Per-particle action (1/N) sum_i A(gamma_i) in the requested scheme.
template <typename Scalar>
Scalar many_particle_action(const LagrangianModelTpl<Scalar> &model,
                            std::span<const PathTpl<Scalar>> paths, Scheme scheme,
                            int quad_points = 5) {
  if (paths.empty())
    throw InvalidArgument("many_particle_action: no paths");
  const auto dim = paths.front().dim();
  Scalar sum = 0;
  for (const auto &p : paths) {
    if (p.dim() != dim)
      throw DimensionError("many_particle_action: mixed dimensions");
    if (scheme == Scheme::midpoint) {
      if (!(p.grid() == paths.front().grid()))
        throw InvalidArgument("many_particle_action: midpoint scheme needs a common grid");
      sum += midpoint_action(model, p);
    } else {
      sum += continuous_action(model, p, quad_points);
    }
  }
  return sum / Scalar(paths.size());
}

/// Error bound h^2 sup|D^2 V| int |gamma'|^2 for the midpoint quadrature of the
/// potential; the supremum uses the model's Hessian bound on the ball that
/// contains the path.
template <typename Scalar>
Scalar midpoint_quadrature_bound(const LagrangianModelTpl<Scalar> &model,
                                 const PathTpl<Scalar> &path) {
  const Scalar h = path.grid().max_step();
  return h * h * model.hessian_bound(path.max_norm()) * kinetic_integral(path);
}

namespace detail {

template <typename Scalar>
bool same_span(const TimeGridTpl<Scalar> &a, const TimeGridTpl<Scalar> &b) {
  using std::abs;
  using std::max;
  const Scalar tol = Scalar(1e-12) * max(Scalar(1), max(abs(a.start()), abs(a.end())));
  return abs(a.start() - b.start()) <= tol && abs(a.end() - b.end()) <= tol;
}

} // namespace detail

/**
 * Uniform distance sup_t |p(t) - q(t)|. For two piecewise-affine paths the
 * pointwise distance is convex between consecutive merged nodes, so the
 * maximum over the merged node set is exact; `probe_points` extra samples per
 * merged interval are evaluated as well.
 */
template <typename Scalar>
Scalar d_gamma(const PathTpl<Scalar> &p, const PathTpl<Scalar> &q,
               int probe_points = 0) {
  if (!detail::same_span(p.grid(), q.grid()))
    throw InvalidArgument("d_gamma: paths live on different time spans");
  if (p.dim() != q.dim())
    throw DimensionError("d_gamma: dimension mismatch");
  const Scalar a = std::max(p.grid().start(), q.grid().start());
  const Scalar b = std::min(p.grid().end(), q.grid().end());
  std::vector<Scalar> times;
  times.reserve(static_cast<std::size_t>(p.grid().size() + q.grid().size()));
  for (auto *g : {&p.grid(), &q.grid()})
    for (Eigen::Index j = 0; j < g->size(); ++j)
      times.push_back(std::clamp(g->node(j), a, b));
  std::sort(times.begin(), times.end());
  times.erase(std::unique(times.begin(), times.end()), times.end());

  auto eval = [](const PathTpl<Scalar> &path, Scalar t) {
    return path.at(std::clamp(t, path.grid().start(), path.grid().end()));
  };
  Scalar best = 0;
  for (std::size_t k = 0; k < times.size(); ++k) {
    best = std::max(best, (eval(p, times[k]) - eval(q, times[k])).norm());
    if (probe_points > 0 && k + 1 < times.size()) {
      for (int s = 1; s <= probe_points; ++s) {
        const Scalar t = times[k] + (times[k + 1] - times[k]) * Scalar(s) /
                                        Scalar(probe_points + 1);
        best = std::max(best, (eval(p, t) - eval(q, t)).norm());
      }
    }
  }
  return best;
}

} // namespace otm
