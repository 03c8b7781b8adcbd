#pragma once

#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "otm/action.hpp"
#include "otm/lagrangian.hpp"
#include "otm/path.hpp"
#include "otm/rng.hpp"

namespace otm {

struct FlowOptions {
  int min_substeps = 16;      // RK4 substeps per grid interval, at least
  double max_substep = 1e-3;  // further refinement of long intervals
  double guard_radius = 1e6;  // |x| beyond this is reported as blow-up
  double newton_tol = 1e-12;
  int newton_max_iterations = 50;
};

template <typename Scalar> struct FlowResultTpl {
  PathTpl<Scalar> path;
  PhasePointTpl<Scalar> final_state;
  int newton_iterations_max = 0;
  /// Nodal velocities (columns); filled by the reference flow only.
  MatrixX<Scalar> velocities;
};

using FlowResult = FlowResultTpl<double>;

/**
 * Reference Euler-Lagrange flow m x'' = -grad V(x), integrated with classical
 * RK4 and sampled on the grid nodes.
 */
template <typename Scalar>
FlowResultTpl<Scalar> reference_flow(const LagrangianModelTpl<Scalar> &model,
                                     const PhasePointTpl<Scalar> &start,
                                     const TimeGridTpl<Scalar> &grid,
                                     const FlowOptions &opts = {}) {
  using Vec = VectorX<Scalar>;
  const Eigen::Index n = start.x.size();
  const Scalar inv_m = Scalar(1) / model.mass();
  MatrixX<Scalar> xs(n, grid.size());
  MatrixX<Scalar> vs(n, grid.size());
  Vec x = start.x;
  Vec v = start.v;
  xs.col(0) = x;
  vs.col(0) = v;
  auto accel = [&](const Vec &p) -> Vec { return -inv_m * model.gradient(p); };
  for (Eigen::Index j = 1; j <= grid.intervals(); ++j) {
    const Scalar dt_total = grid.step(j);
    const auto by_length = static_cast<long>(
        std::ceil(static_cast<double>(dt_total) / opts.max_substep));
    const long substeps = std::max<long>(opts.min_substeps, by_length);
    const Scalar dt = dt_total / Scalar(substeps);
    for (long s = 0; s < substeps; ++s) {
      const Vec k1x = v;
      const Vec k1v = accel(x);
      const Vec k2x = v + dt / 2 * k1v;
      const Vec k2v = accel(x + dt / 2 * k1x);
      const Vec k3x = v + dt / 2 * k2v;
      const Vec k3v = accel(x + dt / 2 * k2x);
      const Vec k4x = v + dt * k3v;
      const Vec k4v = accel(x + dt * k3x);
      x += dt / 6 * (k1x + 2 * k2x + 2 * k3x + k4x);
      v += dt / 6 * (k1v + 2 * k2v + 2 * k3v + k4v);
    }
    if (!x.allFinite() || !v.allFinite() ||
        static_cast<double>(x.norm()) > opts.guard_radius)
      throw BlowUpError("reference_flow: trajectory left the guard radius at t = " +
                        std::to_string(static_cast<double>(grid.node(j))));
    xs.col(j) = x;
    vs.col(j) = v;
  }
  return {PathTpl<Scalar>(grid, std::move(xs)), PhasePointTpl<Scalar>(x, v), 0,
          std::move(vs)};
}

/**
 * One step of the discrete Euler-Lagrange recurrence: given gamma_{j-1},
 * gamma_j and the adjacent steps, solve
 *   m (z - curr)/dt_next + (dt_next/2) grad V((curr + z)/2)
 *     = m (curr - prev)/dt_prev - (dt_prev/2) grad V((prev + curr)/2)
 * for z = gamma_{j+1} by Newton iteration.
 */
template <typename Scalar, typename DP, typename DC>
VectorX<Scalar> discrete_el_step(const LagrangianModelTpl<Scalar> &model,
                                 const Eigen::MatrixBase<DP> &prev,
                                 const Eigen::MatrixBase<DC> &curr, Scalar dt_prev,
                                 Scalar dt_next, const FlowOptions &opts = {},
                                 int *iterations = nullptr) {
  using Vec = VectorX<Scalar>;
  using Mat = MatrixX<Scalar>;
  using std::abs;
  using std::max;
  detail::require_same_dim(prev, curr, "discrete_el_step");
  if (!(dt_prev > 0) || !(dt_next > 0))
    throw InvalidArgument("discrete_el_step: time steps must be positive");
  const Scalar m = model.mass();
  const Vec p = prev;
  const Vec c = curr;
  const Vec rhs = m * (c - p) / dt_prev - dt_prev / 2 * model.gradient(Vec((p + c) / 2));
  const Eigen::Index n = c.size();

  Vec scale(n);
  for (Eigen::Index i = 0; i < n; ++i)
    scale(i) = max({Scalar(1), abs(rhs(i)), m * abs(c(i)) / dt_next});

  auto residual = [&](const Vec &z) -> Vec {
    return m * (z - c) / dt_next + dt_next / 2 * model.gradient(Vec((c + z) / 2)) - rhs;
  };

  Vec z = c + dt_next / m * rhs;
  const Scalar eps = std::numeric_limits<Scalar>::epsilon();
  Scalar last = std::numeric_limits<Scalar>::infinity();
  for (int it = 0; it <= opts.newton_max_iterations; ++it) {
    const Vec f = residual(z);
    last = (f.array().abs() / scale.array()).maxCoeff();
    if (last <= Scalar(opts.newton_tol)) {
      if (iterations)
        *iterations = it;
      return z;
    }
    if (it == opts.newton_max_iterations)
      break;
    const Mat jac = m / dt_next * Mat::Identity(n, n) +
                    dt_next / 4 * model.hessian(Vec((c + z) / 2));
    const Vec dz = jac.partialPivLu().solve(-f);
    z += dz;
    if (!z.allFinite())
      break;
    if (dz.template lpNorm<Eigen::Infinity>() <=
        Scalar(16) * eps * (Scalar(1) + z.template lpNorm<Eigen::Infinity>())) {
      // Update at machine precision: accept if the defect is near roundoff.
      const Scalar r = (residual(z).array().abs() / scale.array()).maxCoeff();
      if (r <= Scalar(1e4) * Scalar(opts.newton_tol)) {
        if (iterations)
          *iterations = it + 1;
        return z;
      }
    }
  }
  throw ConvergenceError("discrete_el_step: Newton did not converge (scaled residual " +
                             std::to_string(static_cast<double>(last)) + ")",
                         static_cast<double>(last));
}

/// Discrete flow: gamma(a) = x, first difference quotient = v, then the
/// discrete Euler-Lagrange recurrence.
template <typename Scalar>
FlowResultTpl<Scalar> discrete_flow(const LagrangianModelTpl<Scalar> &model,
                                    const PhasePointTpl<Scalar> &start,
                                    const TimeGridTpl<Scalar> &grid,
                                    const FlowOptions &opts = {}) {
  const Eigen::Index l = grid.intervals();
  MatrixX<Scalar> xs(start.x.size(), grid.size());
  xs.col(0) = start.x;
  xs.col(1) = start.x + start.v * grid.step(1);
  int worst = 0;
  for (Eigen::Index j = 1; j < l; ++j) {
    int iters = 0;
    xs.col(j + 1) = discrete_el_step(model, xs.col(j - 1), xs.col(j), grid.step(j),
                                     grid.step(j + 1), opts, &iters);
    worst = std::max(worst, iters);
    if (static_cast<double>(xs.col(j + 1).norm()) > opts.guard_radius)
      throw BlowUpError("discrete_flow: trajectory left the guard radius");
  }
  VectorX<Scalar> v_end = (xs.col(l) - xs.col(l - 1)) / grid.step(l);
  VectorX<Scalar> x_end = xs.col(l);
  return {PathTpl<Scalar>(grid, std::move(xs)),
          PhasePointTpl<Scalar>(std::move(x_end), std::move(v_end)), worst,
          MatrixX<Scalar>()};
}

/// Discrete Euler-Lagrange defects at the interior nodes j = 1..l-1 (columns);
/// column j-1 is the gradient of the midpoint action with respect to node j.
template <typename Scalar>
MatrixX<Scalar> el_defects(const LagrangianModelTpl<Scalar> &model,
                           const PathTpl<Scalar> &path) {
  using Vec = VectorX<Scalar>;
  const auto &grid = path.grid();
  const Eigen::Index l = grid.intervals();
  const Scalar m = model.mass();
  MatrixX<Scalar> forces(path.dim(), l); // dt_j/2 * grad V(mid_j), column j-1
  MatrixX<Scalar> momenta(path.dim(), l);
  for (Eigen::Index j = 1; j <= l; ++j) {
    const Scalar dt = grid.step(j);
    forces.col(j - 1) =
        dt / 2 * model.gradient(Vec((path.node(j) + path.node(j - 1)) / 2));
    momenta.col(j - 1) = m * (path.node(j) - path.node(j - 1)) / dt;
  }
  MatrixX<Scalar> defects(path.dim(), std::max<Eigen::Index>(l - 1, 0));
  for (Eigen::Index j = 1; j < l; ++j)
    defects.col(j - 1) =
        momenta.col(j - 1) - momenta.col(j) - forces.col(j - 1) - forces.col(j);
  return defects;
}

/// Largest Euclidean norm of the discrete Euler-Lagrange defect.
template <typename Scalar>
Scalar el_residual(const LagrangianModelTpl<Scalar> &model, const PathTpl<Scalar> &path) {
  if (path.grid().intervals() < 2)
    throw InvalidArgument("el_residual: need at least two intervals");
  return el_defects(model, path).colwise().norm().maxCoeff();
}

/// Energy (m/2)|v|^2 + V(x) at interior nodes, with the centred velocity
/// (gamma_{j+1} - gamma_{j-1}) / (tau_{j+1} - tau_{j-1}).
template <typename Scalar>
VectorX<Scalar> nodal_energy(const LagrangianModelTpl<Scalar> &model,
                             const PathTpl<Scalar> &path) {
  const auto &grid = path.grid();
  const Eigen::Index l = grid.intervals();
  if (l < 2)
    throw InvalidArgument("nodal_energy: need at least two intervals");
  VectorX<Scalar> e(l - 1);
  for (Eigen::Index j = 1; j < l; ++j) {
    const VectorX<Scalar> v =
        (path.node(j + 1) - path.node(j - 1)) / (grid.node(j + 1) - grid.node(j - 1));
    e(j - 1) = energy(model, path.node(j), v);
  }
  return e;
}

// -----------------------------------------------------------------------------
// Two-point boundary value problem
// -----------------------------------------------------------------------------

struct BvpOptions {
  double tol = 1e-12;         // on the defect, relative to the momentum scale
  int max_iterations = 50;
  double armijo = 1e-4;
  double min_step = 1e-10;
  bool check_minimality = true;
  int perturbation_trials = 20;
  int restarts = 5;           // extra randomized warm starts
  double cluster_threshold = 1e-3;
  std::uint64_t seed = 0x6f746d2d627670ULL;
};

template <typename Scalar> struct BvpResultTpl {
  PathTpl<Scalar> path;
  Scalar cost = 0;      // midpoint action of `path`
  Scalar residual = 0;  // el_residual of `path` (0 for a single interval)
  bool converged = false;
  int iterations = 0;
  int clusters = 0;     // distinct stationary points found across starts
  std::string diagnostic;
};

using BvpResult = BvpResultTpl<double>;

namespace detail {

template <typename Scalar> struct NewtonOutcome {
  PathTpl<Scalar> path;
  Scalar residual;
  int iterations;
  bool converged;
  std::string diagnostic;
};

template <typename Scalar>
Scalar momentum_scale(const LagrangianModelTpl<Scalar> &model, const PathTpl<Scalar> &path) {
  using Vec = VectorX<Scalar>;
  using std::max;
  Scalar s = 1;
  const auto &grid = path.grid();
  for (Eigen::Index j = 1; j <= grid.intervals(); ++j) {
    const Scalar dt = grid.step(j);
    s = max(s, model.mass() * (path.node(j) - path.node(j - 1)).norm() / dt);
    s = max(s, dt * model.gradient(Vec((path.node(j) + path.node(j - 1)) / 2)).norm());
  }
  return s;
}

/// Damped Newton on the stacked interior defects, endpoints pinned.
template <typename Scalar>
NewtonOutcome<Scalar> bvp_newton(const LagrangianModelTpl<Scalar> &model,
                                 PathTpl<Scalar> path, const BvpOptions &opts) {
  using Mat = MatrixX<Scalar>;
  using Vec = VectorX<Scalar>;
  const auto &grid = path.grid();
  const Eigen::Index l = grid.intervals();
  const Eigen::Index n = path.dim();
  if (l < 2)
    return {std::move(path), Scalar(0), 0, true, {}};
  const Eigen::Index unknowns = n * (l - 1);
  const Scalar m = model.mass();
  const Scalar eps = std::numeric_limits<Scalar>::epsilon();

  auto merit = [](const Mat &d) { return d.squaredNorm() / 2; };

  Mat defects = el_defects(model, path);
  Scalar residual = defects.colwise().norm().maxCoeff();
  std::vector<Eigen::Triplet<Scalar>> triplets;
  Eigen::SparseMatrix<Scalar> jac(unknowns, unknowns);
  Eigen::SparseLU<Eigen::SparseMatrix<Scalar>> lu;

  for (int it = 0;; ++it) {
    const Scalar scale = momentum_scale(model, path);
    if (residual <= Scalar(opts.tol) * scale)
      return {std::move(path), residual, it, true, {}};
    if (it == opts.max_iterations)
      return {std::move(path), residual, it, false,
              "newton: iteration limit reached (residual " +
                  std::to_string(static_cast<double>(residual)) + ")"};

    // Hessian of the midpoint action, one 2x2 block pattern per interval.
    triplets.clear();
    triplets.reserve(static_cast<std::size_t>(4 * l * n * n));
    for (Eigen::Index j = 1; j <= l; ++j) {
      const Scalar dt = grid.step(j);
      const Mat hv = dt / 4 * model.hessian(Vec((path.node(j) + path.node(j - 1)) / 2));
      const Mat diag = m / dt * Mat::Identity(n, n) - hv;
      const Mat off = -m / dt * Mat::Identity(n, n) - hv;
      const Eigen::Index nodes[2] = {j - 1, j};
      for (int r = 0; r < 2; ++r) {
        if (nodes[r] == 0 || nodes[r] == l)
          continue;
        for (int c = 0; c < 2; ++c) {
          if (nodes[c] == 0 || nodes[c] == l)
            continue;
          const Mat &block = (r == c) ? diag : off;
          const Eigen::Index r0 = (nodes[r] - 1) * n;
          const Eigen::Index c0 = (nodes[c] - 1) * n;
          for (Eigen::Index a = 0; a < n; ++a)
            for (Eigen::Index b = 0; b < n; ++b)
              if (block(a, b) != Scalar(0))
                triplets.emplace_back(r0 + a, c0 + b, block(a, b));
        }
      }
    }
    jac.setFromTriplets(triplets.begin(), triplets.end());
    lu.compute(jac);
    if (lu.info() != Eigen::Success)
      return {std::move(path), residual, it, false, "newton: singular Jacobian"};
    const Vec rhs = -Eigen::Map<const Vec>(defects.data(), unknowns);
    const Vec step = lu.solve(rhs);
    if (lu.info() != Eigen::Success || !step.allFinite())
      return {std::move(path), residual, it, false, "newton: linear solve failed"};

    // Armijo backtracking on the squared residual.
    const Scalar phi0 = merit(defects);
    Scalar alpha = 1;
    bool accepted = false;
    Mat trial_nodes = path.nodes();
    Mat trial_defects;
    while (alpha >= Scalar(opts.min_step)) {
      trial_nodes = path.nodes();
      trial_nodes.middleCols(1, l - 1) +=
          alpha * Eigen::Map<const Mat>(step.data(), n, l - 1);
      PathTpl<Scalar> trial(grid, trial_nodes);
      trial_defects = el_defects(model, trial);
      if (merit(trial_defects) <= (Scalar(1) - Scalar(2 * opts.armijo) * alpha) * phi0) {
        path = std::move(trial);
        accepted = true;
        break;
      }
      alpha /= 2;
    }
    const Scalar step_size = alpha * step.template lpNorm<Eigen::Infinity>();
    if (!accepted) {
      // Newton direction exhausted at roundoff: accept a defect near the noise floor.
      if (residual <= Scalar(1e4) * Scalar(opts.tol) * scale)
        return {std::move(path), residual, it, true, {}};
      return {std::move(path), residual, it, false, "newton: line search failed"};
    }
    defects = std::move(trial_defects);
    residual = defects.colwise().norm().maxCoeff();
    if (step_size <= Scalar(16) * eps * (Scalar(1) + path.nodes().template lpNorm<Eigen::Infinity>()) &&
        residual <= Scalar(1e4) * Scalar(opts.tol) * momentum_scale(model, path))
      return {std::move(path), residual, it + 1, true, {}};
  }
}

/// Smooth random perturbation with nodal size `size`, vanishing at both ends.
template <typename Scalar>
MatrixX<Scalar> smooth_perturbation(const TimeGridTpl<Scalar> &grid, Eigen::Index dim,
                                    Scalar size, Rng &rng, int modes = 3) {
  MatrixX<Scalar> coeff(dim, modes);
  for (Eigen::Index i = 0; i < coeff.size(); ++i)
    coeff.data()[i] = Scalar(rng.normal());
  MatrixX<Scalar> delta = MatrixX<Scalar>::Zero(dim, grid.size());
  for (Eigen::Index j = 1; j < grid.intervals(); ++j) {
    const Scalar s = (grid.node(j) - grid.start()) / grid.span();
    for (int k = 1; k <= modes; ++k)
      delta.col(j) += coeff.col(k - 1) / Scalar(k) *
                      Scalar(std::sin(static_cast<double>(k) * std::numbers::pi *
                                      static_cast<double>(s)));
  }
  const Scalar biggest = delta.colwise().norm().maxCoeff();
  if (biggest > Scalar(0))
    delta *= size / biggest;
  return delta;
}

/// True when no perturbation lowers the midpoint action beyond roundoff.
template <typename Scalar>
bool passes_minimality(const LagrangianModelTpl<Scalar> &model,
                       const PathTpl<Scalar> &path, const BvpOptions &opts) {
  const auto &grid = path.grid();
  if (grid.intervals() < 2 || opts.perturbation_trials <= 0)
    return true;
  const Scalar h = grid.max_step();
  const Scalar base = midpoint_action(model, path);
  Scalar magnitude = 0;
  {
    using Vec = VectorX<Scalar>;
    using std::abs;
    for (Eigen::Index j = 1; j <= grid.intervals(); ++j) {
      const Scalar dt = grid.step(j);
      magnitude += model.mass() / 2 * (path.node(j) - path.node(j - 1)).squaredNorm() / dt +
                   abs(model.potential(Vec((path.node(j) + path.node(j - 1)) / 2))) * dt;
    }
  }
  const Scalar tol = Scalar(4) * std::numeric_limits<Scalar>::epsilon() *
                     Scalar(grid.size()) * (Scalar(1) + magnitude);
  Rng rng(mix_seed(opts.seed ^ 0x6d696eULL));
  for (int trial = 0; trial < opts.perturbation_trials; ++trial) {
    MatrixX<Scalar> nodes = path.nodes() + smooth_perturbation(grid, path.dim(), h * h, rng);
    PathTpl<Scalar> moved(grid, std::move(nodes));
    if (midpoint_action(model, moved) < base - tol)
      return false;
  }
  return true;
}

} // namespace detail

/**
 * Discrete minimizing extremal between x and y: a stationary point of the
 * midpoint action with pinned endpoints, found by damped Newton on the
 * stacked discrete Euler-Lagrange system.
 *
 * The solve is repeated from `restarts` randomized warm starts; distinct
 * stationary points (by d_gamma) are counted and the lowest-cost one that
 * survives the perturbation test is returned. With `check_minimality` off any
 * stationary point is accepted.
 */
template <typename Scalar>
BvpResultTpl<Scalar> solve_bvp(const LagrangianModelTpl<Scalar> &model,
                               const VectorX<Scalar> &x, const VectorX<Scalar> &y,
                               const TimeGridTpl<Scalar> &grid,
                               const BvpOptions &opts = {},
                               const PathTpl<Scalar> *warm_start = nullptr) {
  detail::require_same_dim(x, y, "solve_bvp");
  using Mat = MatrixX<Scalar>;
  const Eigen::Index n = x.size();

  Mat init;
  if (warm_start) {
    if (warm_start->dim() != n)
      throw DimensionError("solve_bvp: warm start has the wrong dimension");
    if (warm_start->grid() == grid) {
      init = warm_start->nodes();
    } else {
      if (!detail::same_span(warm_start->grid(), grid))
        throw InvalidArgument("solve_bvp: warm start spans a different interval");
      init.resize(n, grid.size());
      for (Eigen::Index j = 0; j < grid.size(); ++j)
        init.col(j) = warm_start->at(std::clamp(grid.node(j), warm_start->grid().start(),
                                                warm_start->grid().end()));
    }
    init.col(0) = x;
    init.col(grid.size() - 1) = y;
  } else {
    init = PathTpl<Scalar>::line(grid, x, y).nodes();
  }

  struct Candidate {
    detail::NewtonOutcome<Scalar> outcome;
    Scalar cost;
    bool minimal;
  };
  std::vector<Candidate> candidates;
  Rng rng(mix_seed(opts.seed));
  const Scalar amplitude = Scalar(0.25) * (Scalar(1) + (y - x).norm());
  for (int attempt = 0; attempt <= std::max(opts.restarts, 0); ++attempt) {
    Mat start = init;
    if (attempt > 0)
      start += detail::smooth_perturbation(grid, n, amplitude, rng);
    auto outcome = detail::bvp_newton(model, PathTpl<Scalar>(grid, std::move(start)), opts);
    const Scalar cost = midpoint_action(model, outcome.path);
    const bool minimal = outcome.converged &&
                         (!opts.check_minimality ||
                          detail::passes_minimality(model, outcome.path, opts));
    candidates.push_back({std::move(outcome), cost, minimal});
  }

  // Cluster the converged stationary points.
  std::vector<std::size_t> reps;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (!candidates[i].outcome.converged)
      continue;
    bool fresh = true;
    for (std::size_t r : reps)
      if (d_gamma(candidates[i].outcome.path, candidates[r].outcome.path) <=
          Scalar(opts.cluster_threshold)) {
        fresh = false;
        break;
      }
    if (fresh)
      reps.push_back(i);
  }

  auto pick = [&](bool need_minimal) -> std::optional<std::size_t> {
    std::optional<std::size_t> best;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
      const auto &c = candidates[i];
      if (!c.outcome.converged || (need_minimal && !c.minimal))
        continue;
      if (!best || c.cost < candidates[*best].cost)
        best = i;
    }
    return best;
  };

  std::size_t chosen = 0;
  bool ok = false;
  std::string diagnostic;
  if (auto b = pick(true)) {
    chosen = *b;
    ok = true;
  } else if (auto s = pick(false)) {
    chosen = *s;
    diagnostic = "stationary point is not a minimizer: the midpoint action "
                 "decreased under a small perturbation";
  } else {
    diagnostic = candidates.front().outcome.diagnostic;
  }
  auto &c = candidates[chosen];
  BvpResultTpl<Scalar> result{std::move(c.outcome.path), c.cost, Scalar(0), ok,
                              c.outcome.iterations, static_cast<int>(reps.size()),
                              std::move(diagnostic)};
  result.residual = grid.intervals() >= 2 ? el_residual(model, result.path) : Scalar(0);
  return result;
}

} // namespace otm
