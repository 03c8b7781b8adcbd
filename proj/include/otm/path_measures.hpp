#pragma once

#include <vector>

#include "otm/integrators.hpp"
#include "otm/transport.hpp"

namespace otm {

/// pi = (1/N) sum_i delta_{gamma_i} on path space.
class EmpiricalPathMeasure {
public:
  explicit EmpiricalPathMeasure(std::vector<Path> paths);

  std::size_t size() const { return paths_.size(); }
  Eigen::Index dim() const { return paths_.front().dim(); }
  double start() const { return paths_.front().grid().start(); }
  double end() const { return paths_.front().grid().end(); }
  const Path &operator[](std::size_t i) const { return paths_[i]; }
  const std::vector<Path> &paths() const { return paths_; }

private:
  std::vector<Path> paths_;
};

/// eta = (1/N) sum_i delta_{(x_i, v_i)} on phase space.
class PhaseMeasure {
public:
  explicit PhaseMeasure(std::vector<PhasePoint> states);

  std::size_t size() const { return states_.size(); }
  const PhasePoint &operator[](std::size_t i) const { return states_[i]; }
  const std::vector<PhasePoint> &states() const { return states_; }

private:
  std::vector<PhasePoint> states_;
};

enum class FlowKind { reference, discrete };

/// Image of eta under the (reference or discrete) flow map; path i comes
/// from state i.
EmpiricalPathMeasure push_forward_flow(const LagrangianModel &model, const PhaseMeasure &eta,
                                       const TimeGrid &grid, FlowKind kind,
                                       const FlowOptions &opts = {}, int threads = 1);

/// Time marginal pr_t # pi.
PointCloud marginal_at_time(const EmpiricalPathMeasure &pi, double t);

/// Upper bound for the bounded-Lipschitz distance: optimal-assignment average
/// of min(d_gamma, 2). Requires equal sizes.
double d_bl_upper(const EmpiricalPathMeasure &p, const EmpiricalPathMeasure &q,
                  int threads = 1);

struct SummaryStats {
  double max = 0;
  double mean = 0;
  double p50 = 0;
  double p90 = 0;
};

SummaryStats summarize(std::vector<double> values);

struct ConcentrationReport {
  std::vector<double> residuals;        // discrete EL residual per path
  std::vector<double> reconstruction;   // d_gamma to the reference orbit
  std::vector<double> actions;          // midpoint action per path
  SummaryStats residual;
  SummaryStats reconstruction_stats;
  SummaryStats action;
};

/// Phase point read off a path: gamma(a) and the first difference quotient.
PhasePoint initial_phase_point(const Path &path);

/**
 * Per path: discrete Euler-Lagrange residual, distance to the reference orbit
 * launched from its own initial phase point, and midpoint action. Paths with a
 * single interval report residual 0.
 */
ConcentrationReport concentration_diagnostics(const LagrangianModel &model,
                                              const EmpiricalPathMeasure &pi,
                                              const FlowOptions &opts = {},
                                              int threads = 1);

} // namespace otm
