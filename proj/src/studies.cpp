#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <optional>

#include <boost/math/special_functions/erf.hpp>

#include "otm/parallel.hpp"
#include "otm/pipeline.hpp"
#include "otm/quadrature.hpp"

namespace otm {

std::optional<double> fit_order(const std::vector<double> &hs,
                                const std::vector<double> &errors) {
  if (hs.size() != errors.size())
    throw InvalidArgument("fit_order: size mismatch");
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < hs.size(); ++i)
    if (hs[i] > 0 && errors[i] > 0 && std::isfinite(hs[i]) && std::isfinite(errors[i])) {
      lx.push_back(std::log(hs[i]));
      ly.push_back(std::log(errors[i]));
    }
  if (lx.size() < 2)
    return std::nullopt;
  const double n = static_cast<double>(lx.size());
  const double mx = std::accumulate(lx.begin(), lx.end(), 0.0) / n;
  const double my = std::accumulate(ly.begin(), ly.end(), 0.0) / n;
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    sxx += (lx[i] - mx) * (lx[i] - mx);
    sxy += (lx[i] - mx) * (ly[i] - my);
  }
  if (sxx <= 1e-24)
    return std::nullopt;
  return sxy / sxx;
}

namespace {

// Quantile function of a 1-D marginal on (0,1).
std::optional<double> marginal_quantile(const MarginalSpec &s, double u) {
  if (s.kind == MarginalKind::uniform_box)
    return s.lower(0) + u * (s.upper(0) - s.lower(0));
  if (s.kind == MarginalKind::gaussian) {
    auto cdf = [](double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); };
    const double lo = cdf(-s.truncation);
    const double hi = cdf(s.truncation);
    const double z =
        std::numbers::sqrt2 * boost::math::erf_inv(2 * (lo + u * (hi - lo)) - 1);
    return s.mean(0) + std::sqrt(s.covariance(0, 0)) * z;
  }
  return std::nullopt;
}

} // namespace

std::optional<double> continuum_reference(const LagrangianModel &model,
                                          const MarginalSpec &spec_a,
                                          const MarginalSpec &spec_b, double span) {
  if (!has_closed_form_cost(model) || spec_a.dim() != 1 || spec_b.dim() != 1)
    return std::nullopt;
  if (spec_a.kind == MarginalKind::custom_points || spec_b.kind == MarginalKind::custom_points)
    return std::nullopt;
  if (model.kind() == ModelKind::harmonic &&
      std::sqrt(model.param("k").value() / model.mass()) * span >= std::numbers::pi)
    return std::nullopt;
  // Both costs are submodular in (x, y), so the monotone coupling is optimal.
  const auto rule = gauss_legendre<double>(8);
  const int panels = 256;
  double sum = 0;
  Vector x(1), y(1);
  for (int p = 0; p < panels; ++p) {
    const double lo = static_cast<double>(p) / panels;
    const double width = 1.0 / panels;
    for (Eigen::Index q = 0; q < rule.nodes.size(); ++q) {
      const double u = lo + width * (rule.nodes(q) + 1) / 2;
      x(0) = *marginal_quantile(spec_a, u);
      y(0) = *marginal_quantile(spec_b, u);
      sum += rule.weights(q) * width / 2 * closed_form_cost(model, x, y, span);
    }
  }
  return sum;
}

bool ConvergenceReport::all_ok() const {
  return std::all_of(rows.begin(), rows.end(),
                     [](const ConvergenceRow &r) { return r.status == "ok"; });
}

namespace {

MarginalSpec reseeded(MarginalSpec spec, std::uint64_t seed, std::size_t n, int side) {
  spec.seed = mix_seed(mix_seed(seed ^ mix_seed(spec.seed)) + 2 * n + static_cast<unsigned>(side));
  return spec;
}

// Each path repeated `factor` times, preserving order.
EmpiricalPathMeasure replicate(const EmpiricalPathMeasure &pi, std::size_t factor) {
  std::vector<Path> paths;
  paths.reserve(pi.size() * factor);
  for (const auto &p : pi.paths())
    for (std::size_t r = 0; r < factor; ++r)
      paths.push_back(p);
  return EmpiricalPathMeasure(std::move(paths));
}

} // namespace

ConvergenceReport run_convergence_study(const LagrangianModel &model,
                                        const MarginalSpec &spec_a,
                                        const MarginalSpec &spec_b,
                                        const std::vector<std::size_t> &ns,
                                        const std::vector<double> &hs, double a, double b,
                                        const ConvergenceOptions &opts) {
  if (ns.empty() || ns.size() != hs.size())
    throw InvalidArgument("run_convergence_study: schedules must be nonempty and of equal length");
  if (!(b > a))
    throw InvalidArgument("run_convergence_study: need a < b");
  spec_a.validate();
  spec_b.validate();
  if (spec_a.dim() != spec_b.dim())
    throw DimensionError("run_convergence_study: marginal dimensions differ");

  std::vector<std::size_t> order(ns.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t i, std::size_t j) { return ns[i] < ns[j]; });

  const double nan = std::numeric_limits<double>::quiet_NaN();
  ConvergenceReport report;
  std::vector<std::optional<EmpiricalPathMeasure>> measures;
  for (std::size_t k : order) {
    ConvergenceRow row;
    row.n = ns[k];
    row.h_requested = hs[k];
    row.d_bl_upper_to_finest = nan;
    row.min_action = nan;
    row.max_el_residual = nan;
    row.max_flow_reconstruction_dist = nan;
    const auto t0 = std::chrono::steady_clock::now();
    std::optional<EmpiricalPathMeasure> pi;
    try {
      if (!(hs[k] > 0))
        throw InvalidArgument("mesh size must be positive");
      const TimeGrid grid = TimeGrid::with_max_step(a, b, hs[k]);
      row.h = grid.max_step();
      row.intervals = static_cast<long>(grid.intervals());
      const auto src = sample_marginal(reseeded(spec_a, opts.seed, ns[k], 0), ns[k]);
      const auto tgt = sample_marginal(reseeded(spec_b, opts.seed, ns[k], 1), ns[k]);
      auto sol = solve_discrete_otm(model, src, tgt, grid, opts.otm);
      row.min_action = sol.min_action;
      const auto diag = concentration_diagnostics(model, sol.paths, opts.flow, opts.otm.threads);
      row.max_el_residual = diag.residual.max;
      row.max_flow_reconstruction_dist = diag.reconstruction_stats.max;
      pi.emplace(std::move(sol.paths));
    } catch (const HorizonError &e) {
      row.status = std::string("horizon_error: ") + e.what();
    } catch (const InvalidArgument &e) {
      row.status = std::string("invalid_argument: ") + e.what();
    } catch (const std::exception &e) {
      row.status = std::string("solver_error: ") + e.what();
    }
    row.wall_time =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    report.rows.push_back(std::move(row));
    measures.push_back(std::move(pi));
  }

  // Finest level: largest N among the successful rows (last in sorted order).
  std::optional<std::size_t> finest;
  for (std::size_t r = 0; r < report.rows.size(); ++r)
    if (report.rows[r].status == "ok")
      finest = r;
  if (finest) {
    const auto &ref = *measures[*finest];
    for (std::size_t r = 0; r < report.rows.size(); ++r) {
      if (report.rows[r].status != "ok")
        continue;
      if (r == *finest) {
        report.rows[r].d_bl_upper_to_finest = 0;
        continue;
      }
      const std::size_t n = measures[r]->size();
      if (ref.size() % n != 0)
        continue;
      report.rows[r].d_bl_upper_to_finest =
          d_bl_upper(replicate(*measures[r], ref.size() / n), ref, opts.otm.threads);
    }
  }

  if (opts.reference) {
    report.reference = opts.reference;
    report.reference_source = "supplied";
  } else if (auto analytic = continuum_reference(model, spec_a, spec_b, b - a)) {
    report.reference = analytic;
    report.reference_source = "analytic";
  } else if (finest) {
    report.reference = report.rows[*finest].min_action;
    report.reference_source = "finest";
  } else {
    report.reference_source = "none";
  }

  std::vector<double> h_ok, action_err, traj_err;
  for (std::size_t r = 0; r < report.rows.size(); ++r) {
    const auto &row = report.rows[r];
    if (row.status != "ok")
      continue;
    if (report.reference && !(report.reference_source == "finest" && r == *finest)) {
      h_ok.push_back(row.h);
      const double err = std::abs(row.min_action - *report.reference);
      // Errors at round-off level carry no rate information.
      action_err.push_back(err <= 1e-12 * std::max(1.0, std::abs(*report.reference)) ? 0.0 : err);
    }
  }
  if (!h_ok.empty())
    report.action_order = fit_order(h_ok, action_err);
  std::vector<double> h_all;
  for (const auto &row : report.rows)
    if (row.status == "ok") {
      h_all.push_back(row.h);
      traj_err.push_back(row.max_flow_reconstruction_dist <= 1e-12
                             ? 0.0
                             : row.max_flow_reconstruction_dist);
    }
  report.trajectory_order = fit_order(h_all, traj_err);
  return report;
}

StationarityReport run_stationarity_study(const LagrangianModel &model,
                                          const EmpiricalPathMeasure &pi0,
                                          const std::vector<double> &hs,
                                          const StationarityOptions &opts) {
  if (hs.empty())
    throw InvalidArgument("run_stationarity_study: empty mesh schedule");
  for (double h : hs)
    if (!(h > 0))
      throw InvalidArgument("run_stationarity_study: mesh sizes must be positive");

  StationarityReport report;
  std::vector<Path> current = pi0.paths();
  const std::size_t n = current.size();
  for (std::size_t level = 0; level < hs.size(); ++level) {
    const TimeGrid grid = TimeGrid::with_max_step(pi0.start(), pi0.end(), hs[level]);
    std::vector<std::optional<BvpResult>> solved(n);
    std::vector<double> reconstruction(n, 0);
    parallel_for(n, opts.threads, [&](std::size_t i) {
      auto r = solve_bvp(model, Vector(current[i].front()), Vector(current[i].back()), grid,
                         opts.bvp, &current[i]);
      const auto ref = reference_flow(model, initial_phase_point(r.path), grid, opts.flow);
      reconstruction[i] = d_gamma(r.path, ref.path);
      solved[i].emplace(std::move(r));
    });

    StationarityLevel lv;
    lv.h_requested = hs[level];
    lv.h = grid.max_step();
    lv.intervals = static_cast<long>(grid.intervals());
    double sum = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const auto &r = *solved[i];
      lv.max_el_residual = std::max(lv.max_el_residual, r.residual);
      lv.max_reconstruction = std::max(lv.max_reconstruction, reconstruction[i]);
      sum += reconstruction[i];
      lv.max_newton_iterations = std::max(lv.max_newton_iterations, r.iterations);
      lv.converged = lv.converged && r.converged;
    }
    lv.mean_reconstruction = sum / static_cast<double>(n);
    if (level > 0 && lv.max_reconstruction > 0)
      lv.ratio_to_previous = report.levels.back().max_reconstruction / lv.max_reconstruction;
    report.levels.push_back(lv);
    for (std::size_t i = 0; i < n; ++i)
      current[i] = std::move(solved[i]->path);
  }

  report.fitted_c = report.levels.front().max_reconstruction / report.levels.front().h;
  for (auto &lv : report.levels) {
    lv.within_bound = lv.max_reconstruction <= 2 * report.fitted_c * lv.h + 1e-12;
    report.scaling_ok = report.scaling_ok && lv.within_bound && lv.converged;
  }
  return report;
}

} // namespace otm
