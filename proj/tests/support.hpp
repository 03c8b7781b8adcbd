#pragma once

// Test-side oracles and generators. Nothing here calls into the library's
// solvers, so the values they produce are independent checks.

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <random>
#include <vector>

#include <otm/lagrangian.hpp>
#include <otm/path.hpp>

namespace otm::testing {

/// Small seeded generator for property tests.
class Gen {
public:
  explicit Gen(std::uint64_t seed) : engine_(seed) {}
  double uniform(double lo = 0, double hi = 1) {
    return std::uniform_real_distribution<double>(lo, hi)(engine_);
  }
  int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(engine_); }
  Vector vector(Eigen::Index n, double lo = -1, double hi = 1) {
    Vector v(n);
    for (Eigen::Index i = 0; i < n; ++i)
      v(i) = uniform(lo, hi);
    return v;
  }
  Matrix matrix(Eigen::Index r, Eigen::Index c, double lo = -1, double hi = 1) {
    Matrix m(r, c);
    for (Eigen::Index i = 0; i < m.size(); ++i)
      m.data()[i] = uniform(lo, hi);
    return m;
  }
  /// Strictly increasing grid on [a, b] with `intervals` random steps.
  TimeGrid grid(double a, double b, int intervals) {
    Vector w(intervals);
    for (int i = 0; i < intervals; ++i)
      w(i) = uniform(0.2, 1.0);
    Vector t(intervals + 1);
    t(0) = a;
    double acc = 0;
    const double total = w.sum();
    for (int i = 0; i < intervals; ++i) {
      acc += w(i);
      t(i + 1) = a + (b - a) * acc / total;
    }
    t(intervals) = b;
    return TimeGrid(t);
  }
  Path path(const TimeGrid &grid, Eigen::Index n, double scale = 1) {
    return Path(grid, matrix(n, grid.size(), -scale, scale));
  }
  std::mt19937_64 &engine() { return engine_; }

private:
  std::mt19937_64 engine_;
};

/// V(x) = s * sum(x): affine potential, no analytic Hessian supplied.
inline LagrangianModel affine_model(double m, double s) {
  LagrangianModel::Definition d;
  d.mass = m;
  d.potential = [s](const Vector &x) { return s * x.sum(); };
  d.gradient = [s](const Vector &x) -> Vector { return Vector::Constant(x.size(), s); };
  d.hessian_bound = [](double) { return 0.0; };
  d.growth_c2 = std::abs(s) == 0 ? 1 : std::abs(s); // enough for dimension <= 4
  d.name = "affine";
  return LagrangianModel(std::move(d));
}

/// Harmonic oscillator cost written out independently of the library.
inline double harmonic_cost_oracle(double m, double k, double x, double y, double T) {
  const double w = std::sqrt(k / m);
  return m * w * ((x * x + y * y) * std::cos(w * T) - 2 * x * y) / (2 * std::sin(w * T));
}

/// Composite Simpson rule with `panels` (even) panels.
inline double simpson(const std::function<double(double)> &f, double a, double b, int panels) {
  if (panels % 2)
    ++panels;
  const double h = (b - a) / panels;
  double s = f(a) + f(b);
  for (int i = 1; i < panels; ++i)
    s += (i % 2 ? 4.0 : 2.0) * f(a + i * h);
  return s * h / 3;
}

/**
 * Direct minimization of the 1-D harmonic action with the trapezoid rule for
 * the potential on `nodes` equispaced nodes, by conjugate gradients on the
 * (quadratic) discrete functional. Returns the minimal discrete action.
 */
inline double harmonic_cost_by_descent(double m, double k, double x, double y, double T,
                                       int nodes) {
  const int l = nodes - 1;
  const double h = T / l;
  std::vector<double> g(nodes);
  for (int j = 0; j < nodes; ++j)
    g[j] = x + (y - x) * j / l;
  auto action = [&](const std::vector<double> &p) {
    double s = 0;
    for (int j = 1; j <= l; ++j) {
      const double d = p[j] - p[j - 1];
      s += m / 2 * d * d / h - h / 2 * (k / 2 * p[j] * p[j] + k / 2 * p[j - 1] * p[j - 1]);
    }
    return s;
  };
  // Gradient in the interior; the functional is quadratic so A r = grad(r) - grad(0).
  auto grad = [&](const std::vector<double> &p) {
    std::vector<double> r(nodes, 0.0);
    for (int j = 1; j < l; ++j)
      r[j] = m * (2 * p[j] - p[j - 1] - p[j + 1]) / h - h * k * p[j];
    return r;
  };
  auto apply = [&](const std::vector<double> &d) {
    std::vector<double> r(nodes, 0.0);
    for (int j = 1; j < l; ++j) {
      const double left = j > 1 ? d[j - 1] : 0.0;
      const double right = j < l - 1 ? d[j + 1] : 0.0;
      r[j] = m * (2 * d[j] - left - right) / h - h * k * d[j];
    }
    return r;
  };
  std::vector<double> r = grad(g);
  for (double &v : r)
    v = -v;
  std::vector<double> d = r;
  double rr = 0;
  for (double v : r)
    rr += v * v;
  for (int it = 0; it < 4 * nodes && rr > 1e-28; ++it) {
    const auto ad = apply(d);
    double dad = 0;
    for (int j = 0; j < nodes; ++j)
      dad += d[j] * ad[j];
    const double alpha = rr / dad;
    for (int j = 1; j < l; ++j) {
      g[j] += alpha * d[j];
      r[j] -= alpha * ad[j];
    }
    double rr_new = 0;
    for (double v : r)
      rr_new += v * v;
    for (int j = 1; j < l; ++j)
      d[j] = r[j] + rr_new / rr * d[j];
    rr = rr_new;
  }
  return action(g);
}

inline double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : (v[n / 2 - 1] + v[n / 2]) / 2;
}

} // namespace otm::testing
