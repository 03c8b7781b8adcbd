#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include <Eigen/Cholesky>
#include <boost/math/special_functions/erf.hpp>

#include "otm/pipeline.hpp"
#include "otm/rng.hpp"

namespace otm {

namespace {

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

double normal_quantile(double p) {
  return std::numbers::sqrt2 * boost::math::erf_inv(2 * p - 1);
}

// Quantile of the standard normal truncated to [-tau, tau].
double truncated_normal_quantile(double u, double tau) {
  const double lo = normal_cdf(-tau);
  const double hi = normal_cdf(tau);
  return std::clamp(normal_quantile(lo + u * (hi - lo)), -tau, tau);
}

// Prime factors distributed over the axes, largest first onto the smallest
// running product.
std::vector<std::size_t> balanced_factors(std::size_t n, Eigen::Index dim) {
  std::vector<std::size_t> primes;
  std::size_t rest = n;
  for (std::size_t p = 2; p * p <= rest; ++p)
    while (rest % p == 0) {
      primes.push_back(p);
      rest /= p;
    }
  if (rest > 1)
    primes.push_back(rest);
  std::sort(primes.rbegin(), primes.rend());
  std::vector<std::size_t> counts(static_cast<std::size_t>(dim), 1);
  for (std::size_t p : primes)
    *std::min_element(counts.begin(), counts.end()) *= p;
  return counts;
}

Matrix cholesky_factor(const Matrix &cov) {
  Eigen::LLT<Matrix> llt(cov);
  if (llt.info() != Eigen::Success)
    throw InvalidArgument("MarginalSpec: covariance is not positive definite");
  return llt.matrixL();
}

// Maps a point of the unit cube (uniform) or of the whitened box (gaussian)
// into the marginal's coordinates.
Vector place_uniform(const MarginalSpec &s, const Vector &u) {
  return s.lower.array() + u.array() * (s.upper - s.lower).array();
}

} // namespace

Eigen::Index MarginalSpec::dim() const {
  switch (kind) {
  case MarginalKind::uniform_box:
    return lower.size();
  case MarginalKind::gaussian:
    return mean.size();
  case MarginalKind::custom_points:
    return points.empty() ? 0 : points.front().size();
  }
  return 0;
}

void MarginalSpec::validate() const {
  switch (kind) {
  case MarginalKind::uniform_box:
    if (lower.size() == 0 || lower.size() != upper.size())
      throw InvalidArgument("MarginalSpec: uniform bounds must be nonempty and of equal size");
    if (!lower.allFinite() || !upper.allFinite() || !(lower.array() < upper.array()).all())
      throw InvalidArgument("MarginalSpec: uniform bounds need lower < upper");
    break;
  case MarginalKind::gaussian:
    if (mean.size() == 0 || covariance.rows() != mean.size() ||
        covariance.cols() != mean.size())
      throw InvalidArgument("MarginalSpec: gaussian mean/covariance sizes disagree");
    if (!mean.allFinite() || !covariance.allFinite())
      throw InvalidArgument("MarginalSpec: gaussian parameters must be finite");
    if (!(truncation > 0) || !std::isfinite(truncation))
      throw InvalidArgument("MarginalSpec: truncation must be positive");
    if ((covariance - covariance.transpose()).cwiseAbs().maxCoeff() >
        1e-12 * (1 + covariance.cwiseAbs().maxCoeff()))
      throw InvalidArgument("MarginalSpec: covariance must be symmetric");
    cholesky_factor(covariance);
    break;
  case MarginalKind::custom_points:
    if (points.empty())
      throw InvalidArgument("MarginalSpec: custom point set is empty");
    for (const auto &p : points)
      if (p.size() != points.front().size() || p.size() == 0 || !p.allFinite())
        throw InvalidArgument("MarginalSpec: custom points must be finite with a common dimension");
    break;
  }
  if (sampler == Sampler::quantile && dim() != 1)
    throw InvalidArgument("MarginalSpec: quantile sampling needs dimension 1 (got " +
                          std::to_string(dim()) + ")");
}

MarginalSpec MarginalSpec::uniform(Vector lower, Vector upper, Sampler sampler,
                                   std::uint64_t seed) {
  MarginalSpec s;
  s.kind = MarginalKind::uniform_box;
  s.lower = std::move(lower);
  s.upper = std::move(upper);
  s.sampler = sampler;
  s.seed = seed;
  return s;
}

MarginalSpec MarginalSpec::uniform(double lower, double upper, Sampler sampler,
                                   std::uint64_t seed) {
  return uniform(Vector::Constant(1, lower), Vector::Constant(1, upper), sampler, seed);
}

PointCloud sample_marginal(const MarginalSpec &spec, std::size_t n) {
  if (n == 0)
    throw InvalidArgument("sample_marginal: N must be at least 1");
  spec.validate();
  const Eigen::Index d = spec.dim();
  std::vector<Vector> out;
  out.reserve(n);

  if (spec.kind == MarginalKind::custom_points) {
    std::vector<Vector> pts = spec.points;
    switch (spec.sampler) {
    case Sampler::quantile: {
      std::stable_sort(pts.begin(), pts.end(),
                       [](const Vector &a, const Vector &b) { return a(0) < b(0); });
      const double m = static_cast<double>(pts.size());
      for (std::size_t i = 0; i < n; ++i) {
        const double u = (static_cast<double>(i) + 0.5) / static_cast<double>(n);
        // Generalized inverse: smallest point with empirical CDF >= u.
        const auto k = static_cast<std::size_t>(std::max(1.0, std::ceil(u * m - 1e-12)));
        out.push_back(pts[std::min(pts.size(), k) - 1]);
      }
      break;
    }
    case Sampler::grid:
      if (pts.size() != n)
        throw InvalidArgument("sample_marginal: grid sampling of a custom point set needs N = " +
                              std::to_string(pts.size()));
      out = std::move(pts);
      break;
    case Sampler::iid: {
      Rng rng(mix_seed(spec.seed));
      for (std::size_t i = 0; i < n; ++i)
        out.push_back(pts[rng.below(pts.size())]);
      break;
    }
    }
    return PointCloud(std::move(out));
  }

  const bool gauss = spec.kind == MarginalKind::gaussian;
  const Matrix chol = gauss ? cholesky_factor(spec.covariance) : Matrix();
  // Per-axis unit coordinate u in (0,1) -> marginal coordinate.
  auto axis = [&](double u) { return gauss ? truncated_normal_quantile(u, spec.truncation) : u; };
  auto place = [&](const Vector &z) -> Vector {
    return gauss ? Vector(spec.mean + chol * z) : place_uniform(spec, z);
  };

  switch (spec.sampler) {
  case Sampler::quantile:
    for (std::size_t i = 0; i < n; ++i)
      out.push_back(place(Vector::Constant(
          1, axis((static_cast<double>(i) + 0.5) / static_cast<double>(n)))));
    break;
  case Sampler::grid: {
    const auto counts = balanced_factors(n, d);
    Vector z(d);
    for (std::size_t idx = 0; idx < n; ++idx) {
      std::size_t rest = idx;
      for (Eigen::Index k = d - 1; k >= 0; --k) {
        const std::size_t c = counts[static_cast<std::size_t>(k)];
        z(k) = axis((static_cast<double>(rest % c) + 0.5) / static_cast<double>(c));
        rest /= c;
      }
      out.push_back(place(z));
    }
    break;
  }
  case Sampler::iid: {
    Rng rng(mix_seed(spec.seed));
    Vector z(d);
    for (std::size_t i = 0; i < n; ++i) {
      if (gauss) {
        do {
          for (Eigen::Index k = 0; k < d; ++k)
            z(k) = rng.normal();
        } while (z.cwiseAbs().maxCoeff() > spec.truncation);
      } else {
        for (Eigen::Index k = 0; k < d; ++k)
          z(k) = rng.uniform();
      }
      out.push_back(place(z));
    }
    break;
  }
  }
  return PointCloud(std::move(out));
}

} // namespace otm
