#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "otm/path_measures.hpp"
#include "otm/transport.hpp"

namespace otm {

enum class MarginalKind { uniform_box, gaussian, custom_points };
enum class Sampler { quantile, grid, iid };

/**
 * Description of a compactly supported marginal and of how to discretize it.
 * Gaussians are truncated in whitened coordinates z = L^{-1}(x - mean),
 * L L^T = covariance, to the box |z_i| <= truncation; that box is their
 * compact support and the truncated law is a product measure in z.
 */
struct MarginalSpec {
  MarginalKind kind = MarginalKind::uniform_box;
  Vector lower;        // uniform_box
  Vector upper;        // uniform_box
  Vector mean;         // gaussian
  Matrix covariance;   // gaussian
  double truncation = 3.0;
  std::vector<Vector> points; // custom_points
  Sampler sampler = Sampler::quantile;
  std::uint64_t seed = 0;

  Eigen::Index dim() const;
  /// Throws InvalidArgument on malformed parameters.
  void validate() const;

  static MarginalSpec uniform(Vector lower, Vector upper, Sampler sampler,
                              std::uint64_t seed = 0);
  static MarginalSpec uniform(double lower, double upper, Sampler sampler,
                              std::uint64_t seed = 0);
};

/// Deterministic discretization of a marginal with N points.
PointCloud sample_marginal(const MarginalSpec &spec, std::size_t n);

enum class CostChoice { automatic, bvp, closed_form };

struct OtmOptions {
  CostChoice cost = CostChoice::automatic;
  BvpOptions bvp{};
  bool allow_long_horizon = false;
  int threads = 1;
};

struct OtmSolution {
  EmpiricalPathMeasure paths;
  AssignmentPlan plan;
  double min_action = 0; // (1/N) sum of discrete costs along the plan
};

/// Throws HorizonError when the span exceeds the midpoint horizon of an
/// unbounded potential (unless overridden).
void check_horizon(const LagrangianModel &model, double span, bool allow_long_horizon);

/**
 * Discrete optimal-transportation problem: cost matrix, optimal assignment,
 * then the discrete extremal for every matched pair. Path i starts exactly at
 * source[i] and ends exactly at target[plan.perm[i]].
 */
OtmSolution solve_discrete_otm(const LagrangianModel &model, const PointCloud &source,
                               const PointCloud &target, const TimeGrid &grid,
                               const OtmOptions &opts = {});

/**
 * Discrete measure with the prescribed marginals built from template paths:
 * each source point takes the template whose starting point is nearest, the
 * template is compressed onto [a + eps, b - eps], and straight segments
 * connect the source point to it and its end to an assigned target point.
 * Targets are assigned optimally to the chosen templates' end points.
 */
EmpiricalPathMeasure build_recovery_measure(const EmpiricalPathMeasure &templates,
                                            const PointCloud &source,
                                            const PointCloud &target, double eps);

/// Continuum minimum for 1-D free/harmonic models with uniform or gaussian
/// marginals, integrating the closed-form cost along the quantile coupling.
std::optional<double> continuum_reference(const LagrangianModel &model,
                                          const MarginalSpec &spec_a,
                                          const MarginalSpec &spec_b, double span);

struct ConvergenceRow {
  std::size_t n = 0;
  double h_requested = 0;
  double h = 0;        // realized mesh size
  long intervals = 0;
  std::string status = "ok";
  double min_action = 0;
  double d_bl_upper_to_finest = 0;
  double max_el_residual = 0;
  double max_flow_reconstruction_dist = 0;
  double wall_time = 0;
};

struct ConvergenceReport {
  std::vector<ConvergenceRow> rows;
  std::optional<double> reference;
  std::string reference_source; // "analytic", "supplied", "finest" or "none"
  std::optional<double> action_order;
  std::optional<double> trajectory_order;
  bool all_ok() const;
};

struct ConvergenceOptions {
  OtmOptions otm{};
  FlowOptions flow{};
  std::optional<double> reference; // overrides the analytic reference
  std::uint64_t seed = 0;          // marginal seeds derive from this
};

/**
 * For each level k: sample both marginals with N_k points, build the uniform
 * grid with step <= h_k, solve the discrete problem and record diagnostics.
 * Failures are recorded per row and the study continues.
 */
ConvergenceReport run_convergence_study(const LagrangianModel &model,
                                        const MarginalSpec &spec_a,
                                        const MarginalSpec &spec_b,
                                        const std::vector<std::size_t> &ns,
                                        const std::vector<double> &hs, double a, double b,
                                        const ConvergenceOptions &opts = {});

struct StationarityLevel {
  double h_requested = 0;
  double h = 0;
  long intervals = 0;
  double max_el_residual = 0;
  double max_reconstruction = 0;
  double mean_reconstruction = 0;
  int max_newton_iterations = 0;
  std::optional<double> ratio_to_previous; // previous max / this max
  bool within_bound = true;                // max <= 2 c h, c from level 0
  bool converged = true;
};

struct StationarityReport {
  std::vector<StationarityLevel> levels;
  double fitted_c = 0;
  bool scaling_ok = true;
};

struct StationarityOptions {
  BvpOptions bvp{.check_minimality = false, .restarts = 0};
  FlowOptions flow{};
  int threads = 1;
};

/// Re-solves every path's boundary value problem at each resolution, warm
/// started from the previous level, and tracks residuals and the distance to
/// the reference orbits.
StationarityReport run_stationarity_study(const LagrangianModel &model,
                                          const EmpiricalPathMeasure &pi0,
                                          const std::vector<double> &hs,
                                          const StationarityOptions &opts = {});

/// Least-squares slope of log(err) against log(h) over positive finite pairs.
std::optional<double> fit_order(const std::vector<double> &hs,
                                const std::vector<double> &errors);

} // namespace otm
