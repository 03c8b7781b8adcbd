#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include <otm/action.hpp>

#include "support.hpp"

using namespace otm;
using otm::testing::Gen;

namespace {

Vector v1(double x) { return Vector::Constant(1, x); }

Vector v2(double x, double y) {
  Vector v(2);
  v << x, y;
  return v;
}

} // namespace

TEST(TimeGrid, Validates) {
  Vector bad(3);
  bad << 0, 0.5, 0.5;
  EXPECT_THROW(TimeGrid{bad}, InvalidArgument);
  EXPECT_THROW(TimeGrid{Vector::Constant(1, 0.0)}, InvalidArgument);
  EXPECT_THROW(TimeGrid::uniform(1, 0, 4), InvalidArgument);
}

TEST(TimeGrid, UniformAndMaxStep) {
  const auto g = TimeGrid::uniform(0, 1, 4);
  EXPECT_EQ(g.intervals(), 4);
  EXPECT_EQ(g.start(), 0.0);
  EXPECT_EQ(g.end(), 1.0);
  EXPECT_DOUBLE_EQ(g.max_step(), 0.25);

  const auto h = TimeGrid::with_max_step(0, std::numbers::pi / 2, 0.1);
  EXPECT_EQ(h.intervals(), 16);
  EXPECT_LE(h.max_step(), 0.1);
  EXPECT_EQ(h.end(), std::numbers::pi / 2);

  Vector t(4);
  t << 0, 0.1, 0.7, 1;
  EXPECT_NEAR(TimeGrid(t).max_step(), 0.6, 1e-15);
  EXPECT_EQ(TimeGrid(t).locate(0.05), 1);
  EXPECT_EQ(TimeGrid(t).locate(0.1), 2); // interior nodes open the next interval
  EXPECT_EQ(TimeGrid(t).locate(0.0), 1);
  EXPECT_EQ(TimeGrid(t).locate(0.5), 2);
  EXPECT_EQ(TimeGrid(t).locate(1.0), 3);
}

TEST(Path, ValidatesAndEvaluates) {
  const auto g = TimeGrid::uniform(0, 1, 2);
  EXPECT_THROW(Path(g, Matrix::Zero(1, 2)), DimensionError);
  const auto p = Path::line(g, v1(0), v1(1));
  EXPECT_DOUBLE_EQ(p.at(0.25)(0), 0.25);
  EXPECT_DOUBLE_EQ(p.velocity(1)(0), 1.0);
  EXPECT_THROW(PhasePoint(v1(0), v2(0, 0)), DimensionError);
}

TEST(ContinuousAction, FreeLine) {
  const auto p = Path::line(TimeGrid::uniform(0, 1, 7), v1(0), v1(1));
  EXPECT_NEAR(continuous_action(free_particle(1.0), p), 0.5, 1e-15);
}

TEST(ContinuousAction, LinearPotentialIntegratesExactly) {
  const auto p = Path::line(TimeGrid::uniform(0, 1, 1), v1(0), v1(1));
  EXPECT_NEAR(continuous_action(otm::testing::affine_model(1, 1), p), 0.0, 1e-15);
}

TEST(ContinuousAction, HalfPeriodSine) {
  const auto g = TimeGrid::uniform(0, std::numbers::pi, 999);
  const auto p = Path::sample(g, [](double t) { return v1(std::sin(t)); });
  EXPECT_NEAR(continuous_action(harmonic(1.0, 1.0), p), 0.0, 1e-5);
}

TEST(ContinuousAction, RejectsZeroQuadraturePoints) {
  const auto p = Path::line(TimeGrid::uniform(0, 1, 1), v1(0), v1(1));
  EXPECT_THROW(continuous_action(free_particle(1.0), p, 0), InvalidArgument);
}

TEST(MidpointAction, AffinePathFreeParticle) {
  Gen gen(7);
  for (int i = 0; i < 20; ++i) {
    const double m = gen.uniform(0.5, 3);
    const Vector x = gen.vector(2), y = gen.vector(2);
    const auto g = gen.grid(-0.3, 1.1, gen.integer(1, 12));
    const auto p = Path::line(g, x, y);
    EXPECT_NEAR(midpoint_action(free_particle(m), p), m * (y - x).squaredNorm() / (2 * 1.4),
                1e-13);
  }
}

TEST(MidpointAction, LinearPotentialSingleInterval) {
  const auto p = Path::line(TimeGrid::uniform(0, 1, 1), v1(0), v1(1));
  EXPECT_NEAR(midpoint_action(otm::testing::affine_model(1, 1), p), 0.0, 1e-15);
}

TEST(MidpointAction, SineWithinQuadratureBound) {
  const auto g = TimeGrid::uniform(0, std::numbers::pi, 63);
  const auto p = Path::sample(g, [](double t) { return v1(std::sin(t)); });
  const auto model = harmonic(1.0, 1.0);
  const double gap = std::abs(midpoint_action(model, p) - continuous_action(model, p));
  EXPECT_LE(gap, midpoint_quadrature_bound(model, p));
  EXPECT_GT(gap, 0.0);
}

TEST(ManyParticleAction, Examples) {
  const auto g = TimeGrid::uniform(0, 1, 4);
  const auto model = free_particle(1.0);
  const auto a = Path::line(g, v1(0), v1(1));
  const auto b = Path::line(g, v1(0), v1(2));
  std::vector<Path> one{a}, twin{a, a}, pair{a, b};
  EXPECT_DOUBLE_EQ(many_particle_action<double>(model, one, Scheme::midpoint),
                   midpoint_action(model, a));
  EXPECT_DOUBLE_EQ(many_particle_action<double>(model, twin, Scheme::continuous),
                   continuous_action(model, a));
  EXPECT_NEAR(many_particle_action<double>(model, pair, Scheme::midpoint), 1.25, 1e-15);
}

TEST(ManyParticleAction, Errors) {
  const auto model = free_particle(1.0);
  std::vector<Path> none;
  EXPECT_THROW(many_particle_action<double>(model, none, Scheme::midpoint), InvalidArgument);
  std::vector<Path> mixed{Path::line(TimeGrid::uniform(0, 1, 2), v1(0), v1(1)),
                          Path::line(TimeGrid::uniform(0, 1, 2), v2(0, 0), v2(1, 1))};
  EXPECT_THROW(many_particle_action<double>(model, mixed, Scheme::continuous), DimensionError);
  std::vector<Path> grids{Path::line(TimeGrid::uniform(0, 1, 2), v1(0), v1(1)),
                          Path::line(TimeGrid::uniform(0, 1, 3), v1(0), v1(1))};
  EXPECT_THROW(many_particle_action<double>(model, grids, Scheme::midpoint), InvalidArgument);
  EXPECT_NO_THROW(many_particle_action<double>(model, grids, Scheme::continuous));
}

TEST(DGamma, Examples) {
  const auto g = TimeGrid::uniform(0, 1, 5);
  const auto p = Path::line(g, v1(0), v1(1));
  const auto q = Path::line(TimeGrid::uniform(0, 1, 3), v1(0), v1(2));
  EXPECT_EQ(d_gamma(p, p), 0.0);
  EXPECT_DOUBLE_EQ(d_gamma(p, q), 1.0);
  const auto r = Path::line(g, v2(0, 0), v2(1, 0));
  const auto s = Path::line(g, v2(0, 1), v2(1, 1));
  EXPECT_DOUBLE_EQ(d_gamma(r, s), 1.0);
  EXPECT_DOUBLE_EQ(d_gamma(r, s, 5), 1.0);
}

TEST(DGamma, MismatchedSpansThrow) {
  const auto p = Path::line(TimeGrid::uniform(0, 1, 2), v1(0), v1(1));
  const auto q = Path::line(TimeGrid::uniform(0, 2, 2), v1(0), v1(1));
  EXPECT_THROW(d_gamma(p, q), InvalidArgument);
}

// Property: the merged-node maximum is the true supremum (probe points add nothing).
TEST(DGammaProperty, MergedNodesAreExact) {
  Gen gen(8);
  for (int i = 0; i < 100; ++i) {
    const auto p = gen.path(gen.grid(0, 1, gen.integer(1, 8)), 2);
    const auto q = gen.path(gen.grid(0, 1, gen.integer(1, 8)), 2);
    EXPECT_NEAR(d_gamma(p, q), d_gamma(p, q, 50), 1e-15);
  }
}

TEST(DGammaProperty, MetricAxioms) {
  Gen gen(9);
  for (int i = 0; i < 200; ++i) {
    const auto p = gen.path(gen.grid(0, 2, gen.integer(1, 6)), 3);
    const auto q = gen.path(gen.grid(0, 2, gen.integer(1, 6)), 3);
    const auto r = gen.path(gen.grid(0, 2, gen.integer(1, 6)), 3);
    EXPECT_EQ(d_gamma(p, q), d_gamma(q, p));
    EXPECT_LE(d_gamma(p, r), d_gamma(p, q) + d_gamma(q, r) + 1e-12);
    EXPECT_EQ(d_gamma(p, p), 0.0);
    EXPECT_GE(d_gamma(p, q), 0.0);
  }
}

TEST(ActionProperty, AffinePotentialSchemesAgree) {
  Gen gen(10);
  for (int i = 0; i < 100; ++i) {
    const auto model = otm::testing::affine_model(gen.uniform(0.2, 3), gen.uniform(-2, 2));
    const auto p = gen.path(gen.grid(gen.uniform(-1, 0), gen.uniform(0.5, 2), gen.integer(1, 9)), 2);
    const double mid = midpoint_action(model, p);
    EXPECT_NEAR(mid, continuous_action(model, p), 1e-12 * (1 + std::abs(mid)));
  }
}

TEST(ActionProperty, QuadratureErrorBound) {
  Gen gen(12);
  const std::vector<LagrangianModel> models{harmonic(1.0, 2.0), double_well(1.0),
                                            bounded_cosine(1.0, 1.0, 3.0, 2)};
  for (const auto &model : models)
    for (int i = 0; i < 100; ++i) {
      const auto p = gen.path(gen.grid(0, 1, gen.integer(1, 20)), 2, 1.5);
      const double gap = std::abs(midpoint_action(model, p) - continuous_action(model, p, 8));
      EXPECT_LE(gap, midpoint_quadrature_bound(model, p) + 1e-13) << model.name();
    }
}

TEST(ActionProperty, CollinearRefinementPreservesFreeAction) {
  Gen gen(13);
  const auto model = free_particle(1.3);
  for (int i = 0; i < 50; ++i) {
    const auto coarse = gen.path(gen.grid(0, 1, gen.integer(1, 5)), 2);
    // Insert the midpoint of every interval, on the segment.
    const auto &g = coarse.grid();
    Vector t(2 * g.intervals() + 1);
    Matrix x(2, t.size());
    for (Eigen::Index j = 0; j < g.size(); ++j) {
      t(2 * j) = g.node(j);
      x.col(2 * j) = coarse.node(j);
      if (j + 1 < g.size()) {
        t(2 * j + 1) = (g.node(j) + g.node(j + 1)) / 2;
        x.col(2 * j + 1) = (coarse.node(j) + coarse.node(j + 1)) / 2;
      }
    }
    const Path fine(TimeGrid(t), x);
    const double base = midpoint_action(model, coarse);
    EXPECT_NEAR(midpoint_action(model, fine), base, 1e-12 * (1 + base));
    // Moving an inserted node off the segment strictly increases the action.
    Matrix bent = x;
    bent(0, 1) += 0.1;
    EXPECT_GT(midpoint_action(model, Path(TimeGrid(t), bent)), base);
  }
}

TEST(ActionProperty, MassScalesKineticPart) {
  Gen gen(14);
  for (int i = 0; i < 50; ++i) {
    const double lambda = gen.uniform(0.1, 5);
    const auto p = gen.path(gen.grid(0, 1, gen.integer(1, 7)), 2);
    const double base_mid = midpoint_action(free_particle(1.0), p);
    const double base_cont = continuous_action(free_particle(1.0), p);
    EXPECT_NEAR(midpoint_action(free_particle(lambda), p), lambda * base_mid, 1e-12 * lambda * base_mid);
    EXPECT_NEAR(continuous_action(free_particle(lambda), p), lambda * base_cont,
                1e-12 * lambda * base_cont);
  }
}

TEST(Quadrature, GaussLegendreExactness) {
  for (int points = 1; points <= 10; ++points) {
    const auto rule = gauss_legendre(points);
    EXPECT_NEAR(rule.weights.sum(), 2.0, 1e-13);
    for (int deg = 0; deg <= 2 * points - 1; ++deg) {
      double s = 0;
      for (int q = 0; q < points; ++q)
        s += rule.weights(q) * std::pow(rule.nodes(q), deg);
      const double exact = deg % 2 ? 0.0 : 2.0 / (deg + 1);
      EXPECT_NEAR(s, exact, 1e-13) << points << " points, degree " << deg;
    }
  }
}

TEST(ActionTemplates, LongDoubleMidpointAction) {
  using LD = long double;
  const auto g = TimeGridTpl<LD>::uniform(0, 1, 4);
  VectorX<LD> x(1), y(1);
  x << 0;
  y << 2;
  const auto p = PathTpl<LD>::line(g, x, y);
  EXPECT_NEAR(static_cast<double>(midpoint_action(free_particle<LD>(1), p)), 2.0, 1e-18);
}
