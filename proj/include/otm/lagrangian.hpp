#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <type_traits>

#include "otm/types.hpp"

namespace otm {

enum class ModelKind { free_particle, harmonic, double_well, bounded_cosine, custom };

/**
 * Lagrangian of the form L(x, v) = (m/2)|v|^2 - V(x) on R^n.
 *
 * The model is immutable and cheap to copy (the callables are shared).
 * Strict convexity and the quadratic growth bound hold with c0 = m and
 * c1 = m/2; the potential growth constant c2 must satisfy
 * |V(x)| <= c2 (1 + |x|^2), with the reference point at the origin.
 */
template <typename Scalar> class LagrangianModelTpl {
public:
  using Vec = VectorX<Scalar>;
  using Mat = MatrixX<Scalar>;
  using Potential = std::function<Scalar(const Vec &)>;
  using Gradient = std::function<Vec(const Vec &)>;
  using Hessian = std::function<Mat(const Vec &)>;
  /// Operator-norm bound of the Hessian of V on the ball of the given radius.
  using HessianBound = std::function<Scalar(Scalar)>;

  struct Definition {
    Scalar mass{1};
    Potential potential;
    Gradient gradient;
    Hessian hessian; // optional; forward differences of `gradient` otherwise
    HessianBound hessian_bound;
    Scalar growth_c2{1};
    std::optional<Scalar> potential_bound; // sup |V| when V is bounded
    ModelKind kind{ModelKind::custom};
    std::string name{"custom"};
    std::map<std::string, Scalar> params;
  };

  explicit LagrangianModelTpl(Definition def)
      : def_(std::make_shared<const Definition>(std::move(def))) {
    if (!(def_->mass > 0) || !std::isfinite(static_cast<double>(def_->mass)))
      throw InvalidArgument("LagrangianModel: mass must be positive");
    if (!(def_->growth_c2 > 0))
      throw InvalidArgument("LagrangianModel: growth constant c2 must be positive");
    if (!def_->potential || !def_->gradient || !def_->hessian_bound)
      throw InvalidArgument(
          "LagrangianModel: potential, gradient and hessian bound are required");
  }

  Scalar mass() const { return def_->mass; }
  Scalar c0() const { return def_->mass; }
  Scalar c1() const { return def_->mass / Scalar(2); }
  Scalar c2() const { return def_->growth_c2; }
  bool bounded_potential() const { return def_->potential_bound.has_value(); }
  std::optional<Scalar> potential_bound() const { return def_->potential_bound; }
  ModelKind kind() const { return def_->kind; }
  const std::string &name() const { return def_->name; }
  bool has_analytic_hessian() const { return static_cast<bool>(def_->hessian); }

  /// Catalog parameter (e.g. "k" for the harmonic oscillator).
  std::optional<Scalar> param(const std::string &key) const {
    auto it = def_->params.find(key);
    if (it == def_->params.end())
      return std::nullopt;
    return it->second;
  }
  const std::map<std::string, Scalar> &params() const { return def_->params; }

  Scalar potential(const Vec &x) const { return def_->potential(x); }
  Vec gradient(const Vec &x) const { return def_->gradient(x); }
  Scalar hessian_bound(Scalar radius) const { return def_->hessian_bound(radius); }

  Mat hessian(const Vec &x) const {
    if (def_->hessian)
      return def_->hessian(x);
    const Eigen::Index n = x.size();
    Mat h(n, n);
    const Vec g0 = gradient(x);
    Vec probe = x;
    for (Eigen::Index i = 0; i < n; ++i) {
      using std::abs;
      using std::max;
      const Scalar step = Scalar(1e-7) * max(Scalar(1), abs(x(i)));
      probe(i) = x(i) + step;
      h.col(i) = (gradient(probe) - g0) / step;
      probe(i) = x(i);
    }
    return (h + h.transpose()) / Scalar(2);
  }

  /// Copy of the model with a different growth constant (validated by callers).
  LagrangianModelTpl with_c2(Scalar c2) const {
    Definition d = *def_;
    d.growth_c2 = c2;
    d.params["c2"] = c2;
    return LagrangianModelTpl(std::move(d));
  }

private:
  std::shared_ptr<const Definition> def_;
};

using LagrangianModel = LagrangianModelTpl<double>;

// -----------------------------------------------------------------------------
// Model catalog
// -----------------------------------------------------------------------------

template <typename Scalar = double>
LagrangianModelTpl<Scalar> free_particle(Scalar mass = 1) {
  using Model = LagrangianModelTpl<Scalar>;
  using Vec = typename Model::Vec;
  using Mat = typename Model::Mat;
  typename Model::Definition d;
  d.mass = mass;
  d.potential = [](const Vec &) { return Scalar(0); };
  d.gradient = [](const Vec &x) -> Vec { return Vec::Zero(x.size()); };
  d.hessian = [](const Vec &x) -> Mat { return Mat::Zero(x.size(), x.size()); };
  d.hessian_bound = [](Scalar) { return Scalar(0); };
  // Any positive constant bounds V = 0; the horizon is unbounded regardless.
  d.growth_c2 = 1;
  d.potential_bound = Scalar(0);
  d.kind = ModelKind::free_particle;
  d.name = "free";
  d.params = {{"mass", mass}};
  return Model(std::move(d));
}

/// V(x) = (k/2)|x|^2. The default growth constant c2 = k/2 is the smallest
/// admissible one; larger values may be requested explicitly.
template <typename Scalar = double>
LagrangianModelTpl<Scalar> harmonic(Scalar mass = 1, Scalar k = 1,
                                    std::type_identity_t<std::optional<Scalar>> c2 = std::nullopt) {
  using Model = LagrangianModelTpl<Scalar>;
  using Vec = typename Model::Vec;
  using Mat = typename Model::Mat;
  if (!(k > 0))
    throw InvalidArgument("harmonic: stiffness k must be positive");
  const Scalar growth = c2.value_or(k / Scalar(2));
  if (growth < k / Scalar(2))
    throw InvalidArgument("harmonic: c2 must be at least k/2");
  typename Model::Definition d;
  d.mass = mass;
  d.potential = [k](const Vec &x) { return k / Scalar(2) * x.squaredNorm(); };
  d.gradient = [k](const Vec &x) -> Vec { return k * x; };
  d.hessian = [k](const Vec &x) -> Mat {
    return k * Mat::Identity(x.size(), x.size());
  };
  d.hessian_bound = [k](Scalar) { return k; };
  d.growth_c2 = growth;
  d.kind = ModelKind::harmonic;
  d.name = "harmonic";
  d.params = {{"mass", mass}, {"k", k}, {"c2", growth}};
  return Model(std::move(d));
}

/// V(x) = (|x|^2 - 1)^2. Quartic growth: the quadratic bound only holds on the
/// ball of radius `check_radius`, and c2 is the smallest constant valid there.
template <typename Scalar = double>
LagrangianModelTpl<Scalar> double_well(Scalar mass = 1, Scalar check_radius = 3) {
  using Model = LagrangianModelTpl<Scalar>;
  using Vec = typename Model::Vec;
  using Mat = typename Model::Mat;
  if (!(check_radius > 0))
    throw InvalidArgument("double_well: check radius must be positive");
  typename Model::Definition d;
  d.mass = mass;
  d.potential = [](const Vec &x) {
    const Scalar s = x.squaredNorm() - Scalar(1);
    return s * s;
  };
  d.gradient = [](const Vec &x) -> Vec {
    return Scalar(4) * (x.squaredNorm() - Scalar(1)) * x;
  };
  d.hessian = [](const Vec &x) -> Mat {
    const Eigen::Index n = x.size();
    return Scalar(4) * (x.squaredNorm() - Scalar(1)) * Mat::Identity(n, n) +
           Scalar(8) * x * x.transpose();
  };
  d.hessian_bound = [](Scalar r) {
    using std::max;
    return max(Scalar(4), Scalar(12) * r * r - Scalar(4));
  };
  const Scalar r2 = check_radius * check_radius;
  {
    using std::max;
    d.growth_c2 = max(Scalar(1), (r2 - 1) * (r2 - 1) / (1 + r2));
  }
  d.kind = ModelKind::double_well;
  d.name = "double_well";
  d.params = {{"mass", mass}, {"check_radius", check_radius}, {"c2", d.growth_c2}};
  return Model(std::move(d));
}

/// V(x) = A * sum_i cos(omega x_i) in a fixed dimension; sup |V| = |A| dim.
template <typename Scalar = double>
LagrangianModelTpl<Scalar> bounded_cosine(Scalar mass, Scalar amplitude,
                                          Scalar omega, int dim) {
  using Model = LagrangianModelTpl<Scalar>;
  using Vec = typename Model::Vec;
  using Mat = typename Model::Mat;
  using std::abs;
  if (dim < 1)
    throw InvalidArgument("bounded_cosine: dimension must be >= 1");
  if (amplitude == Scalar(0))
    throw InvalidArgument("bounded_cosine: amplitude must be nonzero");
  auto check = [dim](const Vec &x) {
    if (x.size() != dim)
      throw DimensionError("bounded_cosine: model dimension is " +
                           std::to_string(dim));
  };
  typename Model::Definition d;
  d.mass = mass;
  d.potential = [=](const Vec &x) {
    check(x);
    return amplitude * (omega * x.array()).cos().sum();
  };
  d.gradient = [=](const Vec &x) -> Vec {
    check(x);
    return (-amplitude * omega * (omega * x.array()).sin()).matrix();
  };
  d.hessian = [=](const Vec &x) -> Mat {
    check(x);
    return (-amplitude * omega * omega * (omega * x.array()).cos())
        .matrix()
        .asDiagonal();
  };
  d.hessian_bound = [=](Scalar) { return abs(amplitude) * omega * omega; };
  d.growth_c2 = abs(amplitude) * Scalar(dim);
  d.potential_bound = abs(amplitude) * Scalar(dim);
  d.kind = ModelKind::bounded_cosine;
  d.name = "cosine";
  d.params = {{"mass", mass},
              {"amplitude", amplitude},
              {"omega", omega},
              {"dim", Scalar(dim)}};
  return Model(std::move(d));
}

// -----------------------------------------------------------------------------
// Pointwise quantities
// -----------------------------------------------------------------------------

template <typename Scalar, typename DX, typename DV>
Scalar eval_lagrangian(const LagrangianModelTpl<Scalar> &model,
                       const Eigen::MatrixBase<DX> &x,
                       const Eigen::MatrixBase<DV> &v) {
  detail::require_same_dim(x, v, "eval_lagrangian");
  return model.mass() / Scalar(2) * v.squaredNorm() -
         model.potential(x.template cast<Scalar>());
}

template <typename Scalar, typename DX, typename DV>
Scalar energy(const LagrangianModelTpl<Scalar> &model,
              const Eigen::MatrixBase<DX> &x, const Eigen::MatrixBase<DV> &v) {
  detail::require_same_dim(x, v, "energy");
  return model.mass() / Scalar(2) * v.squaredNorm() +
         model.potential(x.template cast<Scalar>());
}

template <typename Scalar> struct LegendreResult {
  Scalar value;              // H(x, p)
  VectorX<Scalar> velocity;  // maximizer v = p / m
};

/// H(x, p) = sup_v (p.v - L(x, v)) = |p|^2 / (2m) + V(x).
template <typename Scalar, typename DX, typename DP>
LegendreResult<Scalar> eval_hamiltonian(const LagrangianModelTpl<Scalar> &model,
                                        const Eigen::MatrixBase<DX> &x,
                                        const Eigen::MatrixBase<DP> &p) {
  detail::require_same_dim(x, p, "eval_hamiltonian");
  const Scalar m = model.mass();
  return {p.squaredNorm() / (Scalar(2) * m) + model.potential(x.template cast<Scalar>()),
          p.template cast<Scalar>() / m};
}

/// Fibre derivative (x, v) -> grad_v L(x, v) = m v.
template <typename Scalar, typename DV>
VectorX<Scalar> legendre_momentum(const LagrangianModelTpl<Scalar> &model,
                                  const Eigen::MatrixBase<DV> &v) {
  return model.mass() * v.template cast<Scalar>();
}

/// Largest interval length on which the action is coercive: unbounded for
/// bounded V, sqrt(c1 / (4 c2)) for the continuous action and
/// sqrt(m / (32 c2)) for the midpoint-discretized one.
template <typename Scalar>
Scalar admissible_horizon(const LagrangianModelTpl<Scalar> &model, Scheme scheme) {
  using std::sqrt;
  if (model.bounded_potential())
    return std::numeric_limits<Scalar>::infinity();
  if (scheme == Scheme::continuous)
    return sqrt(model.c1() / (Scalar(4) * model.c2()));
  return sqrt(model.mass() / (Scalar(32) * model.c2()));
}

/// Largest value of |V(x)| / (1 + |x|^2) - c2 over a tensor grid of
/// `points_per_axis`^dim points in the cube [-radius, radius]^dim.
/// Non-positive means the growth bound holds on the sample.
template <typename Scalar>
Scalar growth_violation(const LagrangianModelTpl<Scalar> &model, int dim,
                        Scalar radius, int points_per_axis = 41) {
  using std::abs;
  using std::max;
  if (dim < 1 || points_per_axis < 2)
    throw InvalidArgument("growth_violation: need dim >= 1 and >= 2 points per axis");
  long total = 1;
  for (int d = 0; d < dim; ++d) {
    total *= points_per_axis;
    if (total > 2'000'000)
      throw InvalidArgument("growth_violation: sample grid too large");
  }
  VectorX<Scalar> x(dim);
  Scalar worst = -std::numeric_limits<Scalar>::infinity();
  for (long idx = 0; idx < total; ++idx) {
    long rem = idx;
    for (int d = 0; d < dim; ++d) {
      const long k = rem % points_per_axis;
      rem /= points_per_axis;
      x(d) = -radius + Scalar(2) * radius * Scalar(k) / Scalar(points_per_axis - 1);
    }
    worst = max(worst, abs(model.potential(x)) / (Scalar(1) + x.squaredNorm()) -
                           model.c2());
  }
  return worst;
}

/// Throws InvalidArgument when the sampled growth bound fails.
template <typename Scalar>
void validate_growth(const LagrangianModelTpl<Scalar> &model, int dim,
                     Scalar radius, int points_per_axis = 41) {
  const Scalar v = growth_violation(model, dim, radius, points_per_axis);
  if (v > Scalar(1e-12) * model.c2())
    throw InvalidArgument("model '" + model.name() +
                          "' violates |V(x)| <= c2 (1 + |x|^2) on the sample grid");
}

} // namespace otm
