// Acceptance checks: one PASS/FAIL line per criterion. Exit status is the
// number of failing criteria.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include <otm/cli.hpp>
#include <otm/pipeline.hpp>

#include "support.hpp"

using namespace otm;
using otm::testing::Gen;
namespace fs = std::filesystem;

namespace {

int failures = 0;

void report(int id, bool ok, const std::string &detail) {
  std::printf("criterion %2d: %s  %s\n", id, ok ? "PASS" : "FAIL", detail.c_str());
  std::fflush(stdout);
  failures += !ok;
}

std::string fmt(const char *f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

Vector v1(double x) { return Vector::Constant(1, x); }

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// 1. Free-particle cost against m|y - x|^2 / (2 span).
void free_particle_cost() {
  Gen gen(101);
  double worst = 0;
  for (int i = 0; i < 20; ++i) {
    const double m = gen.uniform(0.2, 5);
    const int dim = gen.integer(1, 3);
    const Vector x = gen.vector(dim, -3, 3), y = gen.vector(dim, -3, 3);
    const double a = gen.uniform(-1, 1), span = gen.uniform(0.1, 4);
    const auto r = solve_bvp(free_particle(m), x, y,
                             TimeGrid::uniform(a, a + span, gen.integer(1, 40)));
    const double exact = m * (y - x).squaredNorm() / (2 * span);
    worst = std::max(worst, std::abs(r.cost - exact) / exact);
    if (!r.converged)
      worst = INFINITY;
  }
  report(1, worst <= 1e-10, fmt("max relative error %.3e over 20 draws (tol 1e-10)", worst));
}

// 2. Harmonic cost against the closed form; the closed form against descent.
void harmonic_cost() {
  const auto model = harmonic(1.0, 1.0);
  const std::pair<double, double> ends[] = {{0, 1}, {0.5, -0.3}, {1, 1}, {-2, 0.7}};
  double worst = 0;
  bool converged = true;
  for (double T : {0.3, 0.8, std::numbers::pi / 2})
    for (auto [x, y] : ends) {
      const auto r = solve_bvp(model, v1(x), v1(y), TimeGrid::uniform(0, T, 999));
      converged = converged && r.converged;
      worst = std::max(worst, std::abs(r.cost - otm::testing::harmonic_cost_oracle(1, 1, x, y, T)));
    }
  const double closed = otm::testing::harmonic_cost_oracle(1, 1, 0.5, -0.3, 0.8);
  const double descent = otm::testing::harmonic_cost_by_descent(1, 1, 0.5, -0.3, 0.8, 5000);
  const double cross = std::abs(closed - descent);
  report(2, converged && worst <= 1e-4 && cross <= 1e-6,
         fmt("max |c_h - c| %.3e (tol 1e-4); closed form vs 5000-node descent %.3e", worst,
             cross));
}

// Exact action of a piecewise-affine path under V = k|x|^2/2, written out.
double affine_harmonic_action(double m, double k, const Path &p) {
  double s = 0;
  for (Eigen::Index j = 1; j <= p.grid().intervals(); ++j) {
    const double h = p.grid().step(j);
    const Vector a = p.node(j - 1);
    const Vector d = Vector(p.node(j)) - a;
    s += m / 2 * d.squaredNorm() / h -
         k / 2 * h * (a.squaredNorm() + a.dot(d) + d.squaredNorm() / 3);
  }
  return s;
}

// 3. Midpoint quadrature error on interpolated harmonic extremals.
void quadrature_error() {
  const double k = 1;
  const auto model = harmonic(1.0, k);
  const std::pair<double, double> ends[] = {{0, 1}, {1, -1}, {0.3, 2}};
  bool bound_ok = true;
  double lo = INFINITY, hi = -INFINITY;
  for (double T : {0.3, 0.8, std::numbers::pi / 2})
    for (auto [x, y] : ends) {
      std::vector<double> err;
      for (double h : {0.1, 0.05, 0.025}) {
        const auto g = TimeGrid::with_max_step(0, T, h);
        const Path p = closed_form_extremal(model, v1(x), v1(y), g);
        const double e = std::abs(midpoint_action(model, p) - affine_harmonic_action(1, k, p));
        const double bound = g.max_step() * g.max_step() * k * kinetic_integral(p);
        bound_ok = bound_ok && e <= bound;
        err.push_back(e);
      }
      for (std::size_t i = 1; i < err.size(); ++i) {
        const double order = std::log2(err[i - 1] / err[i]);
        lo = std::min(lo, order);
        hi = std::max(hi, order);
      }
    }
  report(3, bound_ok && lo >= 1.8 && hi <= 2.2,
         fmt("error bound %s on all 27 instances; observed orders in [%.3f, %.3f] (need [1.8, 2.2])",
             bound_ok ? "holds" : "VIOLATED", lo, hi));
}

// 4. Discrete flow against the exact orbit of the oscillator.
void discrete_vs_continuous() {
  const auto model = harmonic(1.0, 1.0);
  auto sup_error = [&](double x0, double v0, double h) {
    const auto g = TimeGrid::with_max_step(0, std::numbers::pi / 2, h);
    const auto r = discrete_flow(model, PhasePoint(v1(x0), v1(v0)), g);
    double e = 0;
    for (Eigen::Index j = 0; j < g.size(); ++j) {
      const double t = g.node(j);
      e = std::max(e, std::abs(r.path.node(j)(0) - (x0 * std::cos(t) + v0 * std::sin(t))));
    }
    return e;
  };
  auto min_order = [&](double x0, double v0, std::string &errs) {
    double order = INFINITY, prev = 0;
    for (double h : {0.04, 0.02, 0.01, 0.005}) {
      const double e = sup_error(x0, v0, h);
      errs += fmt("%s%.3e", errs.empty() ? "" : ", ", e);
      if (prev > 0)
        order = std::min(order, std::log2(prev / e));
      prev = e;
    }
    return order;
  };
  std::string errs, errs_alt;
  const double order = min_order(1, 0, errs);
  const double order_alt = min_order(0, 1, errs_alt);
  report(4, order >= 1.8,
         fmt("start (1,0): sup errors [%s], min order %.3f (need >= 1.8); "
             "for reference start (0,1): min order %.3f",
             errs.c_str(), order, order_alt));
}

// 5. Energy behaviour of the discrete flow over 1e5 steps.
void energy_conservation() {
  const auto t0 = std::chrono::steady_clock::now();
  const double h = 0.01;
  const long steps = 100000;
  const auto g = TimeGrid::uniform(0, h * steps, steps);
  const auto model = harmonic(1.0, 1.0);
  const auto r = discrete_flow(model, PhasePoint(v1(1), v1(0)), g);
  const Vector e = nodal_energy(model, r.path); // interior nodes 1..l-1
  const double e0 = e(0);
  double early = 0, whole = 0;
  for (Eigen::Index j = 0; j < e.size(); ++j) {
    const double d = std::abs(e(j) - e0);
    if (j < 100)
      early = std::max(early, d);
    whole = std::max(whole, d);
  }
  const double c = early / (h * h);
  // Least-squares slope of energy against time and its standard error.
  const double n = static_cast<double>(e.size());
  double mt = 0, me = 0;
  for (Eigen::Index j = 0; j < e.size(); ++j) {
    mt += g.node(j + 1) / n;
    me += e(j) / n;
  }
  double sxx = 0, sxy = 0;
  for (Eigen::Index j = 0; j < e.size(); ++j) {
    sxx += (g.node(j + 1) - mt) * (g.node(j + 1) - mt);
    sxy += (g.node(j + 1) - mt) * (e(j) - me);
  }
  const double slope = sxy / sxx;
  double ssr = 0;
  for (Eigen::Index j = 0; j < e.size(); ++j) {
    const double res = e(j) - me - slope * (g.node(j + 1) - mt);
    ssr += res * res;
  }
  const double se = std::sqrt(ssr / (n - 2) / sxx);
  const double elapsed = seconds_since(t0);
  const bool ok = whole <= 2 * c * h * h && std::abs(slope) <= 3 * se && elapsed <= 60;
  report(5, ok,
         fmt("max deviation %.3e vs 2*C*h^2 = %.3e (C = %.4f from first 100 steps); "
             "slope %.3e, 3*SE %.3e; %.1f s",
             whole, 2 * c * h * h, c, slope, 3 * se, elapsed));
}

// 6. Minimum of the discrete problem for the shift U[0,1] -> U[2,3].
void gamma_convergence() {
  const auto model = free_particle(1.0);
  const auto g = TimeGrid::uniform(0, 1, 4);
  double worst = 0;
  for (std::size_t n : {4, 16, 64, 256}) {
    const auto src = sample_marginal(MarginalSpec::uniform(0, 1, Sampler::quantile), n);
    const auto tgt = sample_marginal(MarginalSpec::uniform(2, 3, Sampler::quantile), n);
    worst = std::max(worst, std::abs(solve_discrete_otm(model, src, tgt, g).min_action - 2));
  }
  std::vector<double> medians;
  for (std::size_t n : {64, 256, 1024}) {
    std::vector<double> errs;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
      const auto src = sample_marginal(MarginalSpec::uniform(0, 1, Sampler::iid, seed), n);
      const auto tgt =
          sample_marginal(MarginalSpec::uniform(2, 3, Sampler::iid, seed + 1000), n);
      errs.push_back(std::abs(solve_discrete_otm(model, src, tgt, g).min_action - 2));
    }
    medians.push_back(otm::testing::median(errs));
  }
  const bool ok = worst <= 1e-10 && medians[0] > medians[1] && medians[1] > medians[2];
  report(6, ok,
         fmt("quantile max |min_action - 2| %.3e (tol 1e-10); iid medians %.3e, %.3e, %.3e", worst,
             medians[0], medians[1], medians[2]));
}

// 7. Trajectories of the discrete problem concentrate on the flow.
void flow_concentration() {
  const auto model = harmonic(1.0, 1.0, 0.5); // midpoint horizon 0.25
  const double span = 0.25;
  const std::size_t n = 32;
  const auto src = sample_marginal(MarginalSpec::uniform(0, 1, Sampler::quantile), n);
  const auto tgt = sample_marginal(MarginalSpec::uniform(1, 2.5, Sampler::quantile), n);
  double worst_residual = 0;
  std::vector<double> hs, dist;
  for (double h : {0.05, 0.025, 0.0125}) {
    const auto g = TimeGrid::with_max_step(0, span, h);
    const auto sol = solve_discrete_otm(model, src, tgt, g);
    const auto rep = concentration_diagnostics(model, sol.paths);
    worst_residual = std::max(worst_residual, rep.residual.max);
    hs.push_back(g.max_step());
    dist.push_back(rep.reconstruction_stats.max);
  }
  const double c = dist[0] / hs[0];
  const bool scaled = dist[1] <= 2 * c * hs[1] && dist[2] <= 2 * c * hs[2];
  report(7, worst_residual <= 1e-8 && scaled,
         fmt("max EL residual %.3e (tol 1e-8); reconstruction %.3e, %.3e, %.3e vs 2ch = -, %.3e, "
             "%.3e (c = %.4f)",
             worst_residual, dist[0], dist[1], dist[2], 2 * c * hs[1], 2 * c * hs[2], c));
}

// 8. Hungarian totals equal exhaustive search, bit for bit.
void assignment_exactness() {
  Gen gen(108);
  int mismatches = 0, total = 0;
  for (int n = 2; n <= 7; ++n)
    for (int trial = 0; trial < 200; ++trial) {
      const Matrix c = gen.matrix(n, n, -10, 10);
      mismatches += solve_assignment(c).total_cost != brute_force_assignment(c).total_cost;
      ++total;
    }
  report(8, mismatches == 0, fmt("%d of %d instances differ", mismatches, total));
}

// 9. Horizon guard in a convergence run.
void horizon_guard() {
  const auto model = harmonic(1.0, 1.0, 1.0);
  const auto a = MarginalSpec::uniform(0, 1, Sampler::quantile);
  const auto b = MarginalSpec::uniform(1, 2, Sampler::quantile);
  const auto bad = run_convergence_study(model, a, b, {8, 16}, {0.05, 0.025}, 0, 0.2);
  bool flagged = !bad.rows.empty();
  for (const auto &row : bad.rows)
    flagged = flagged && row.status.rfind("horizon_error", 0) == 0;
  const auto good = run_convergence_study(model, a, b, {8, 16}, {0.05, 0.025}, 0, 0.17);
  report(9, flagged && good.all_ok(),
         fmt("span 0.2 (> %.4f): %s; span 0.17: %s", std::sqrt(1.0 / 32),
             flagged ? "every row horizon_error" : "NOT flagged",
             good.all_ok() ? "all rows ok" : "rows failed"));
}

// 10. The family alpha sin t between 0 and 0 on [0, pi].
void long_interval_family() {
  const auto model = harmonic(1.0, 1.0);
  const auto g = TimeGrid::uniform(0, std::numbers::pi, 4000);
  bool ok = true;
  std::string detail;
  for (double alpha : {1.0, 10.0, 100.0}) {
    const auto r = reference_flow(model, PhasePoint(v1(0), v1(alpha)), g);
    const double end = std::abs(r.final_state.x(0));
    // Simpson on the nodal Lagrangian (v^2 - x^2)/2 from the flow's own states.
    const long l = g.intervals();
    double s = 0;
    for (long j = 0; j <= l; ++j) {
      const double x = r.path.node(j)(0), v = r.velocities(0, j);
      const double lag = 0.5 * v * v - 0.5 * x * x;
      s += (j == 0 || j == l ? 1.0 : (j % 2 ? 4.0 : 2.0)) * lag;
    }
    const double action = s * g.step(1) / 3;
    ok = ok && end <= 1e-6 * alpha && std::abs(action) <= 1e-6 * alpha * alpha;
    detail += fmt("%salpha=%g: |x(pi)| %.2e, action %.2e", detail.empty() ? "" : "; ", alpha, end,
                  action);
  }
  report(10, ok, detail + " (each action is exactly 0 for m = c = 1)");
}

// 11. Byte-identical converge CSV across repeats and thread counts.
void determinism() {
  const fs::path dir = fs::temp_directory_path() / "otm_acceptance_determinism";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const nlohmann::json doc = {
      {"model", {{"name", "harmonic"}, {"params", {{"m", 1}, {"k", 1}, {"c2", 1}}}}},
      {"seed", 20240601},
      {"converge",
       {{"marginal_a", {{"kind", "gaussian"}, {"mean", {0}}, {"covariance", {{0.2}}},
                        {"sampler", "iid"}}},
        {"marginal_b", {{"kind", "uniform_box"}, {"lower", {1}}, {"upper", {2}},
                        {"sampler", "iid"}}},
        {"Ns", {8, 16, 32}},
        {"hs", {0.04, 0.02, 0.01}},
        {"span", {0, 0.17}},
        {"cost", "bvp"}}}};
  const fs::path cfg = dir / "config.json";
  std::ofstream(cfg) << doc.dump(2);
  auto run = [&](const std::string &name, int threads) {
    const std::string out = (dir / name).string();
    const std::string th = std::to_string(threads);
    const char *argv[] = {"otm", "converge", "--config", cfg.c_str(), "--out", out.c_str(),
                          "--threads", th.c_str()};
    std::ostringstream sink, err;
    const int code = otm::cli::run(8, argv, sink, err);
    std::ifstream in(dir / name / "converge.csv", std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return std::make_pair(code, s.str());
  };
  const auto a = run("t1a", 1), b = run("t1b", 1), c = run("t8a", 8), d = run("t8b", 8);
  const bool ok = a.first == 0 && !a.second.empty() && a == b && a == c && a == d;
  fs::remove_all(dir);
  report(11, ok, fmt("4 runs (threads 1,1,8,8): exit codes %d %d %d %d, CSV %s", a.first, b.first,
                     c.first, d.first, ok ? "byte-identical" : "DIFFERS"));
}

} // namespace

int main() {
  const std::vector<std::function<void()>> criteria{
      free_particle_cost, harmonic_cost,       quadrature_error, discrete_vs_continuous,
      energy_conservation, gamma_convergence,  flow_concentration, assignment_exactness,
      horizon_guard,       long_interval_family, determinism};
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    try {
      criteria[i]();
    } catch (const std::exception &e) {
      report(static_cast<int>(i + 1), false, std::string("exception: ") + e.what());
    }
  }
  std::printf("%d of %zu criteria failed\n", failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
