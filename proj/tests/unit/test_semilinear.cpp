#include <gtest/gtest.h>

#include <cmath>

#include "fixtures.hpp"
#include "fracmag/errors.hpp"
#include "fracmag/semilinear.hpp"

using namespace fracmag;

namespace {

std::vector<double> on_omega(const Grid& grid, double v) {
  std::vector<double> out(static_cast<std::size_t>(grid.size()), 0.0);
  for (int i : grid.nodes_in(Region::omega)) out[static_cast<std::size_t>(i)] = v;
  return out;
}

SemilinearModel semilinear(const fixtures::Built& b, std::vector<std::vector<double>> coeffs,
                           const MagneticPotential* A = nullptr) {
  return SemilinearModel(b.grid, b.kernel, A ? *A : b.A, Nonlinearity(*b.grid, std::move(coeffs), 0.5),
                         b.model->form_ptr(), b.scenario.solver);
}

}  // namespace

TEST(Nonlinearity, TaylorSumAndDerivative) {
  const auto b = fixtures::build(fixtures::coarse_canonical());
  const Grid& g = *b.grid;
  const Nonlinearity nl = Nonlinearity::constant(g, {1.5, -0.7, 2.0, 0.3}, 0.5);
  const int i = g.nodes_in(Region::omega)[2];
  EXPECT_EQ(eval_a(nl, i, 0.0), 0.0);
  const double z = 0.37;
  EXPECT_NEAR(eval_a(nl, i, z), 1.5 * z - 0.7 * z * z / 2 + 2.0 * z * z * z / 6 + 0.3 * std::pow(z, 4) / 24, 1e-15);
  for (double zz : {-1.2, 0.0, 0.4, 2.5}) {
    const double step = 1e-5;
    const double fd = (eval_a(nl, i, zz + step) - eval_a(nl, i, zz - step)) / (2 * step);
    EXPECT_NEAR(eval_dz_a(nl, i, zz), fd, 1e-6 * std::max(1.0, std::abs(fd)));
  }
  EXPECT_FALSE(nl.is_linear());
  EXPECT_TRUE(Nonlinearity::constant(g, {1.0, 0.0}, 0.5).is_linear());
  EXPECT_THROW(Nonlinearity::constant(g, {0.2}, 0.5), PreconditionError);
  EXPECT_THROW(Nonlinearity(g, {}, 0.5), PreconditionError);
}

TEST(Semilinear, ZeroDataGivesZeroSolution) {
  const auto b = fixtures::build(fixtures::coarse_canonical());
  const SemilinearModel m = semilinear(b, {on_omega(*b.grid, 1.0), on_omega(*b.grid, 1.0)});
  const SemilinearResult r = m.solve(DiscreteFunction::Zero(b.grid->size()));
  EXPECT_EQ(r.u.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Semilinear, LinearNonlinearityReproducesTheLinearSolve) {
  const auto b = fixtures::build(fixtures::coarse_canonical());
  const SemilinearModel m = semilinear(b, {b.q.values()});
  const DiscreteFunction g = 3.0 * fixtures::window_sum(*b.grid, Region::w1);
  const DiscreteFunction lin = b.model->solve(g);
  const DiscreteFunction u = m.solve(g).u;
  EXPECT_LE((u - lin).cwiseAbs().maxCoeff(), 1e-12 * lin.cwiseAbs().maxCoeff());
  const auto rows = linearize(m, g, {1.0, 0.5});
  for (const auto& r : rows) EXPECT_LE(r.d, 1e-10 * hs_proxy_norm(b.model->form(), *b.grid, lin));
}

TEST(Semilinear, CubicProblemMatchesPicardOracle) {
  const auto b = fixtures::build(fracmag::parse_scenario(fixtures::kOracleYaml));
  const Grid& g = *b.grid;
  const SemilinearModel m = semilinear(b, {b.q.values(), on_omega(g, 0.0), on_omega(g, 3.0)});
  const oracle::Model1D o = fixtures::oracle_model(b);
  DiscreteFunction data = DiscreteFunction::Zero(g.size());
  oracle::Vector od(static_cast<std::size_t>(g.size()), 0.0);
  for (int i : g.nodes_in(Region::w1)) data(i) = od[static_cast<std::size_t>(i)] = 40.0 + i;
  const oracle::Vector ref = o.solve_semilinear(od, {0.0, 0.0, 3.0}, 3.0);
  const DiscreteFunction u = m.solve(data).u;
  const DiscreteFunction lin = b.model->solve(data);
  double scale = 0.0, nonlinear_effect = 0.0;
  for (int i : g.nodes_in(Region::omega)) {
    scale = std::max(scale, std::abs(ref[static_cast<std::size_t>(i)]));
    nonlinear_effect = std::max(nonlinear_effect, std::abs(lin(i) - ref[static_cast<std::size_t>(i)]));
  }
  ASSERT_GT(nonlinear_effect, 1e-3 * scale);
  for (int i = 0; i < g.size(); ++i) EXPECT_NEAR(u(i), ref[static_cast<std::size_t>(i)], 1e-8 * scale) << i;
}

TEST(Semilinear, JacobianMatchesFiniteDifferences) {
  const auto b = fixtures::build(fixtures::coarse_canonical());
  const Grid& g = *b.grid;
  const SemilinearModel m = semilinear(b, {b.q.values(), on_omega(g, 1.0), on_omega(g, 0.5)});
  const DiscreteFunction u = m.solve(fixtures::window_sum(g, Region::w1)).u;
  const Eigen::MatrixXd J = m.jacobian(u);
  const auto omega = g.nodes_in(Region::omega);
  const double step = 1e-6;
  for (std::size_t c = 0; c < omega.size(); c += 5) {
    DiscreteFunction up = u, um = u;
    up(omega[c]) += step;
    um(omega[c]) -= step;
    const Eigen::VectorXd fd = (m.residual(up) - m.residual(um)) / (2 * step);
    EXPECT_LE((fd - J.col(static_cast<Eigen::Index>(c))).cwiseAbs().maxCoeff(), 1e-6 * J.cwiseAbs().maxCoeff());
  }
  EXPECT_LE(m.residual(u).norm(), 1e-9 * b.model->solver().interior_rhs(fixtures::window_sum(g, Region::w1)).norm());
}

TEST(Semilinear, SolutionsAreNotProportionalToTheData) {
  const auto b = fixtures::build(fixtures::coarse_canonical());
  const Grid& g = *b.grid;
  const SemilinearModel m = semilinear(b, {b.q.values(), on_omega(g, 1.0)});
  const DiscreteFunction data = 20.0 * fixtures::window_sum(g, Region::w1);
  const DiscreteFunction u1 = m.solve(data).u, u2 = m.solve(2.0 * data).u;
  EXPECT_GT((u2 - 2.0 * u1).cwiseAbs().maxCoeff(), 1e-6 * u2.cwiseAbs().maxCoeff());
}

TEST(Semilinear, MagneticSignIsInvisible) {
  const auto b = fixtures::build(fixtures::coarse_canonical());
  const Grid& g = *b.grid;
  const MagneticPotential minus = b.A.negated();
  const SemilinearModel plus_m = semilinear(b, {b.q.values(), on_omega(g, 1.0)});
  const SemilinearModel minus_m(b.grid, b.kernel, minus, Nonlinearity(g, {b.q.values(), on_omega(g, 1.0)}, 0.5),
                                b.scenario.quadrature, b.scenario.solver);
  const DiscreteFunction data = 5.0 * fixtures::window_sum(g, Region::w1);
  EXPECT_TRUE(semilinear_dtn(plus_m, data) == semilinear_dtn(minus_m, data));
}

TEST(Semilinear, QuadraticLinearizationErrorHalvesWithEps) {
  const auto b = fixtures::build(fixtures::coarse_canonical());
  const Grid& g = *b.grid;
  const SemilinearModel m = semilinear(b, {b.q.values(), on_omega(g, 1.0)});
  const auto rows = linearize(m, fixtures::window_sum(g, Region::w1), {1.0, 0.5, 0.25, 0.125});
  for (std::size_t k = 1; k < rows.size(); ++k) {
    EXPECT_LT(rows[k].d, rows[k - 1].d);
    EXPECT_NEAR(rows[k].ratio, 2.0, 0.05);
  }
  EXPECT_TRUE(std::isnan(rows[0].ratio));
  EXPECT_THROW(linearize(m, fixtures::window_sum(g, Region::w1), {0.5, 1.0}), PreconditionError);
}

TEST(Semilinear, LinearizedDtnApproachesTheLinearMatrix) {
  const auto b = fixtures::build(fixtures::coarse_canonical());
  const Grid& g = *b.grid;
  const SemilinearModel m = semilinear(b, {b.q.values(), on_omega(g, 1.0)});
  const Eigen::MatrixXd linear = dtn_matrix(*b.model, 1).entries;
  double prev = std::numeric_limits<double>::infinity();
  for (double eps : {1.0, 0.25, 0.0625}) {
    const double err = (linearized_dtn_matrix(m, eps, 1).entries - linear).cwiseAbs().maxCoeff();
    EXPECT_LT(err, prev);
    prev = err;
  }
  EXPECT_LE(prev, 1e-2 * linear.cwiseAbs().maxCoeff());
}

TEST(Semilinear, DivergentNewtonReportsSmallnessExceeded) {
  const auto b = fixtures::build(fixtures::coarse_canonical());
  const Grid& g = *b.grid;
  const SemilinearModel m = semilinear(b, {b.q.values(), on_omega(g, 0.0), on_omega(g, -60.0)});
  try {
    m.solve(1e4 * fixtures::window_sum(g, Region::w1));
    FAIL() << "expected SmallnessExceeded";
  } catch (const SmallnessExceeded& e) {
    EXPECT_GE(e.converged_scale(), 0.0);
    EXPECT_LT(e.converged_scale(), 1.0);
    EXPECT_NE(std::string(e.what()).find("SMALLNESS_EXCEEDED"), std::string::npos);
  }
}

TEST(Semilinear, LargeMagneticPotentialIsRejected) {
  const auto b = fixtures::build(fixtures::coarse_canonical());
  const MagneticPotential big = MagneticPotential::sample(*b.grid, [](const Point&) { return Vec{1.0, 0.0, 0.0}; });
  EXPECT_THROW(semilinear(b, {b.q.values()}, &big), PreconditionError);
  DiscreteFunction bad = DiscreteFunction::Zero(b.grid->size());
  bad(b.grid->nodes_in(Region::w2)[0]) = 1.0;
  EXPECT_THROW(semilinear(b, {b.q.values()}).solve(bad), PreconditionError);
}
