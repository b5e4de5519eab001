#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "fracmag/errors.hpp"
#include "fracmag/kernel.hpp"
#include "oracles.hpp"

using namespace fracmag;

namespace {

Grid disc_grid() {
  ScenarioGeometry g;
  g.n = 2;
  g.r = 1.0;
  g.h = 0.25;
  g.omega.shape = Ball{{0, 0, 0}, 0.8};
  g.w1 = {{3.0, 0.0, 0}, {3.5, 0.5, 0}};
  g.w2 = {{3.0, -0.5, 0}, {3.5, 0.0, 0}};
  g.box = {{-1.25, -1.25, 0}, {3.75, 1.25, 0}};
  return build_grid(g);
}

MagneticPotential field(const Grid& grid, double ax, double ay) {
  return MagneticPotential::sample(grid, [&](const Point& p) {
    const double b = std::exp(-4.0 * (p[0] * p[0] + p[1] * p[1]));
    return Vec{ax * b + 0.1 * p[1], ay * b - 0.05 * p[0], 0.0};
  });
}

}  // namespace

TEST(Kernel, UnitDistanceGivesNormalization) {
  for (int n = 1; n <= 3; ++n)
    for (double s : {0.25, 0.5, 0.75}) {
      const KernelSpec k = make_kernel(n, s);
      Point x{}, y{};
      y[0] = 1.0;
      EXPECT_DOUBLE_EQ(eval_K(k, x, y), k.normalization);
    }
}

TEST(Kernel, NormalizationMatchesQuadratureOfTheDefiningIdentity) {
  // c * int (1 - cos y_1)|y|^{-n-2s} dy = 1 is the fractional-Laplacian symbol at |xi| = 1.
  for (int n = 1; n <= 3; ++n)
    for (double s : {0.25, 0.5, 0.75}) {
      const double c = fractional_laplacian_constant(n, s);
      EXPECT_NEAR(c, oracle::normalization_by_quadrature(n, s), 1e-8 * c) << "n=" << n << " s=" << s;
    }
  EXPECT_NEAR(fractional_laplacian_constant(2, 0.5), 1.0 / (2.0 * std::numbers::pi), 1e-15);
}

TEST(Kernel, SymmetricOnRandomPairs) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  for (KernelVariant v : {KernelVariant::power, KernelVariant::perturbed}) {
    const KernelSpec k = make_kernel(2, 0.4, v, 0.3);
    for (int t = 0; t < 100; ++t) {
      const Point x{u(rng), u(rng), 0.0}, y{u(rng), u(rng), 0.0};
      EXPECT_EQ(eval_K(k, x, y), eval_K(k, y, x));
    }
  }
}

TEST(Kernel, PerturbedKernelIsComparableToPowerLaw) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.01, 4.0);
  for (double beta : {-0.45, 0.45}) {
    const KernelSpec k = make_kernel(2, 0.5, KernelVariant::perturbed, beta);
    for (int t = 0; t < 50; ++t) {
      const double r = u(rng);
      const double base = k.normalization * std::pow(r, -2.0 - 1.0);
      const double K = eval_K(k, Point{}, Point{r, 0.0, 0.0});
      EXPECT_LE(k.m_lo() * base, K * (1 + 1e-15));
      EXPECT_GE(k.m_hi() * base, K * (1 - 1e-15));
    }
  }
  EXPECT_THROW(make_kernel(2, 0.5, KernelVariant::perturbed, 0.5), ConfigError);
}

TEST(Kernel, DiagonalEvaluationIsADomainError) {
  const KernelSpec k = make_kernel(2, 0.5);
  EXPECT_THROW(eval_K(k, Point{1, 1, 0}, Point{1, 1, 0}), DomainError);
  EXPECT_THROW(make_kernel(2, 1.0), ConfigError);
}

TEST(Kernel, CosineFactorBasics) {
  const Grid grid = disc_grid();
  const MagneticPotential zero(grid);
  const MagneticPotential A = field(grid, 0.25, -0.15);
  const MagneticPotential minus = A.negated();
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> pick(0, grid.size() - 1);
  for (int t = 0; t < 200; ++t) {
    const Point& x = grid.node(pick(rng));
    const Point& y = grid.node(pick(rng));
    EXPECT_EQ(eval_RA(zero, x, y), 1.0);
    EXPECT_EQ(eval_RA(A, x, y), eval_RA(minus, x, y));
    EXPECT_EQ(eval_RA(A, x, y), eval_RA(A, y, x));
    EXPECT_EQ(eval_RA(A, x, x), 1.0);
  }
}

TEST(Kernel, CosineDifferenceBound) {
  const Grid grid = disc_grid();
  const MagneticPotential A1 = field(grid, 0.25, -0.15);
  const MagneticPotential A2 = field(grid, -0.1, 0.2);
  double sup_diff = 0.0, sup_sum = 0.0;
  for (int i = 0; i < grid.size(); ++i) {
    const Vec& a = A1.at(i);
    const Vec& b = A2.at(i);
    sup_diff = std::max(sup_diff, std::hypot(a[0] - b[0], a[1] - b[1]));
    sup_sum = std::max(sup_sum, std::hypot(a[0] + b[0], a[1] + b[1]));
  }
  const double C = 0.5 * sup_diff * sup_sum + 1e-14;
  std::mt19937_64 rng(4);
  std::uniform_int_distribution<int> pick(0, grid.size() - 1);
  for (int t = 0; t < 500; ++t) {
    const Point& x = grid.node(pick(rng));
    const Point& y = grid.node(pick(rng));
    EXPECT_LE(std::abs(eval_RA(A1, x, y) - eval_RA(A2, x, y)), C * distance2(x, y));
  }
}

TEST(Kernel, CosineIsExactlyOneBetweenWindowsAndOmega) {
  const Grid grid = disc_grid();
  const MagneticPotential A = field(grid, 0.25, -0.15);
  for (Region w : {Region::w1, Region::w2})
    for (int x : grid.nodes_in(w))
      for (int y : grid.nodes_in(Region::omega)) EXPECT_EQ(eval_RA(A, grid.node(x), grid.node(y)), 1.0);
}

TEST(Kernel, BallTailClosedForm) {
  for (int n = 1; n <= 3; ++n)
    for (double s : {0.25, 0.5, 0.8}) {
      const KernelSpec k = make_kernel(n, s);
      for (double R : {0.5, 2.0}) {
        const double ref = 2.0 * k.normalization * unit_sphere_area(n) * std::pow(R, -2.0 * s) / (2.0 * s);
        EXPECT_NEAR(tail_outside_ball(k, R), ref, 1e-13 * ref);
        EXPECT_NEAR(ref, oracle::ball_tail(n, s, k.normalization, R), 1e-13 * ref);
      }
    }
}

TEST(Kernel, BoxTailMatchesQuadratureOracle) {
  const KernelSpec k1 = make_kernel(1, 0.25);
  const AxisBox line{{-5, 0, 0}, {5, 0, 0}};
  const double ref1 = oracle::tail_1d(0.25, k1.normalization, 0.0, -5.0, 5.0);
  EXPECT_NEAR(tail_integral(k1, Point{}, line), ref1, 1e-6 * ref1);

  for (double s : {0.3, 0.5, 0.7}) {
    const KernelSpec k = make_kernel(2, s);
    const AxisBox box{{-1.0, -1.0, 0}, {3.75, 1.0, 0}};
    const double lo[2] = {-1.0, -1.0}, hi[2] = {3.75, 1.0};
    for (const Point& x : {Point{0.0625, 0.0625, 0}, Point{3.6875, -0.9375, 0}, Point{1.1, 0.3, 0}}) {
      const double xy[2] = {x[0], x[1]};
      const double ref = oracle::tail_2d(s, k.normalization, xy, lo, hi);
      EXPECT_NEAR(tail_integral(k, x, box), ref, 1e-6 * ref) << "s=" << s << " x=" << x[0] << "," << x[1];
    }
  }
}

TEST(Kernel, TailDecreasesWhenTheBoxGrows) {
  const KernelSpec k = make_kernel(2, 0.5);
  double prev = std::numeric_limits<double>::infinity();
  for (double L : {1.0, 1.5, 2.0, 4.0}) {
    const double t = tail_integral(k, Point{0.1, -0.2, 0}, AxisBox{{-L, -L, 0}, {L, 1.2 * L, 0}});
    EXPECT_LT(t, prev);
    prev = t;
  }
  EXPECT_THROW(tail_integral(k, Point{5, 0, 0}, AxisBox{{-1, -1, 0}, {1, 1, 0}}), DomainError);
}

TEST(Kernel, SameCellIntegralMatchesQuadratureOracle) {
  for (int n = 1; n <= 2; ++n)
    for (double s : {0.25, 0.5, 0.75}) {
      const KernelSpec k = make_kernel(n, s);
      const double a[2] = {0.7, n == 2 ? -0.4 : 0.0};
      const double ref = oracle::same_cell(n, s, k.normalization, a, 0.125);
      const double got = same_cell_integral(k, Vec{a[0], a[1], 0.0}, 0.125);
      EXPECT_NEAR(got, ref, 1e-6 * ref) << "n=" << n << " s=" << s;
      EXPECT_EQ(same_cell_integral(k, Vec{}, 0.125), 0.0);
    }
}
