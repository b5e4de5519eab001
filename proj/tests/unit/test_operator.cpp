#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "fixtures.hpp"
#include "fracmag/errors.hpp"
#include "fracmag/nonlocal_form.hpp"

using namespace fracmag;

namespace {

const char* const kMirrorYaml = R"(
name: mirror
geometry:
  n: 2
  s: 0.5
  r: 1.0
  h: 0.25
  box: {lo: [-4.0, -1.25], hi: [4.0, 1.25]}
  omega:
    ball: {center: [0.0, 0.0], radius: 0.8}
  w1: {lo: [3.0, -0.5], hi: [3.75, 0.5]}
  w2: {lo: [-3.75, -0.5], hi: [-3.0, 0.5]}
magnetic:
  preset: smooth_bump
  amplitude: 0.25
  direction: [1.0, 0.0]
  radius: 0.8
electric:
  preset: smooth_bump
  base: 1.0
  amplitude: 0.5
  radius: 0.8
)";

DiscreteFunction random_on(const Grid& grid, std::initializer_list<Region> regions, std::mt19937_64& rng) {
  std::normal_distribution<double> n;
  DiscreteFunction f = DiscreteFunction::Zero(grid.size());
  for (Region r : regions)
    for (int i : grid.nodes_in(r)) f(i) = n(rng);
  return f;
}

}  // namespace

TEST(Operator, TwoNodeGridWithoutField) {
  Lattice lat;
  lat.n = 1;
  lat.h = 0.5;
  lat.lo = {0.0, 0, 0};
  lat.counts = {2, 1, 1};
  const Grid grid(lat, {Region::omega, Region::w1}, 1.0);
  const KernelSpec k = make_kernel(1, 0.5);
  const NonlocalForm F = assemble_form(grid, k, MagneticPotential(grid));
  const double vol = 0.5;
  const double K12 = eval_K(k, grid.node(0), grid.node(1));
  const AxisBox box{{0, 0, 0}, {1.0, 0, 0}};
  const double t1 = tail_integral(k, grid.node(0), box), t2 = tail_integral(k, grid.node(1), box);
  const Eigen::MatrixXd M = F.full();
  EXPECT_NEAR(M(0, 0), 2 * vol * vol * K12 + vol * t1, 1e-14 * M(0, 0));
  EXPECT_NEAR(M(1, 1), 2 * vol * vol * K12 + vol * t2, 1e-14 * M(1, 1));
  EXPECT_DOUBLE_EQ(M(0, 1), -2 * vol * vol * K12);
  EXPECT_EQ(M(0, 1), M(1, 0));
}

TEST(Operator, OneDimensionalFormMatchesBruteForceAssembly) {
  const auto b = fixtures::build(fracmag::parse_scenario(fixtures::kOracleYaml));
  const oracle::Model1D o = fixtures::oracle_model(b);
  const oracle::Matrix ref = o.form();
  const Eigen::MatrixXd M = b.model->form().full();
  for (int i = 0; i < M.rows(); ++i)
    for (int j = 0; j < M.cols(); ++j)
      EXPECT_NEAR(M(i, j), ref[i][j], 1e-12 * std::abs(ref[i][i])) << i << "," << j;
}

TEST(Operator, FormIsSymmetricAndPositiveSemidefinite) {
  for (bool refine : {false, true}) {
    fracmag::Scenario sc = fixtures::coarse_canonical();
    sc.quadrature.subcell_refinement = refine;
    const auto b = fixtures::build(sc);
    const Eigen::MatrixXd M = b.model->form().full();
    EXPECT_EQ((M - M.transpose()).cwiseAbs().maxCoeff(), 0.0);
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(M, Eigen::EigenvaluesOnly);
    EXPECT_GE(eig.eigenvalues()(0), -1e-10);
  }
}

TEST(Operator, FieldFreeFormIsTheGagliardoPairSum) {
  fracmag::Scenario sc = fixtures::coarse_canonical();
  sc.magnetic.preset = "zero";
  const auto b = fixtures::build(sc);
  const Grid& g = *b.grid;
  DiscreteFunction u(g.size()), v(g.size());
  for (int i = 0; i < g.size(); ++i) {
    const Point& p = g.node(i);
    u(i) = std::exp(-(p[0] * p[0] + p[1] * p[1]));
    v(i) = std::exp(-((p[0] - 1) * (p[0] - 1) + p[1] * p[1]));
  }
  const double vol = g.cell_volume();
  double ref = 0.0;
  for (int i = 0; i < g.size(); ++i) {
    ref += b.model->form().tail()(i) * u(i) * v(i);
    for (int j = i + 1; j < g.size(); ++j)
      ref += 2 * vol * vol * eval_K(b.kernel, g.node(i), g.node(j)) * (u(i) - u(j)) * (v(i) - v(j));
  }
  EXPECT_NEAR(form_value(b.model->form(), u, v), ref, 1e-12 * std::abs(ref));
}

TEST(Operator, FormValueIsExactlySymmetric) {
  const auto b = fixtures::build(fixtures::coarse_canonical());
  std::mt19937_64 rng(5);
  for (int t = 0; t < 20; ++t) {
    const DiscreteFunction u = random_on(*b.grid, {Region::omega, Region::w1, Region::w2}, rng);
    const DiscreteFunction v = random_on(*b.grid, {Region::omega, Region::w1, Region::far}, rng);
    EXPECT_EQ(form_value(b.model->form(), u, v), form_value(b.model->form(), v, u));
  }
  for (int i : b.grid->nodes_in(Region::omega)) {
    const DiscreteFunction e = indicator(*b.grid, i);
    const double d = form_value(b.model->form(), e, e);
    EXPECT_GT(d, 0.0);
    EXPECT_NEAR(d, b.model->form().full()(i, i), 1e-14 * d);
  }
}

TEST(Operator, HomogeneousDataGivesZeroSolution) {
  const auto b = fixtures::build(fixtures::coarse_canonical());
  const DiscreteFunction u = b.model->solve(DiscreteFunction::Zero(b.grid->size()));
  EXPECT_EQ(u.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Operator, GalerkinEquationsAndInteriorTestVanishing) {
  for (LinearSolverKind kind : {LinearSolverKind::cholesky, LinearSolverKind::conjugate_gradient}) {
    fracmag::Scenario sc = fixtures::coarse_canonical();
    sc.solver.kind = kind;
    const auto b = fixtures::build(sc);
    const Grid& g = *b.grid;
    std::mt19937_64 rng(6);
    const DiscreteFunction data = random_on(g, {Region::w1, Region::w2}, rng);
    const DiscreteFunction u = b.model->solve(data);
    for (int i = 0; i < g.size(); ++i)
      if (g.region(i) != Region::omega) EXPECT_EQ(u(i), data(i));
    const double scale = b.model->solver().interior_rhs(data).cwiseAbs().maxCoeff();
    for (int t = 0; t < 5; ++t) {
      const DiscreteFunction v = random_on(g, {Region::omega}, rng);
      double mass = 0.0;
      for (int i : g.nodes_in(Region::omega)) mass += b.q.at(i) * u(i) * v(i) * g.cell_volume();
      EXPECT_LE(std::abs(form_value(b.model->form(), u, v) + mass), 1e-9 * scale * v.lpNorm<1>());
    }
  }
}

TEST(Operator, LinearityAndSignInvariance) {
  const auto b = fixtures::build(fixtures::coarse_canonical());
  const DiscreteFunction g = fixtures::window_sum(*b.grid, Region::w1);
  const DiscreteFunction u = b.model->solve(g);
  EXPECT_EQ((b.model->solve(2.0 * g) - 2.0 * u).cwiseAbs().maxCoeff(), 0.0);

  const LinearModel flipped(b.grid, b.kernel, b.A.negated(), b.q, b.scenario.quadrature, b.scenario.solver);
  EXPECT_TRUE(flipped.form().full() == b.model->form().full());
  EXPECT_TRUE(flipped.solve(g) == u);
}

TEST(Operator, MirrorSymmetricScenarioHasEvenSolution) {
  const auto b = fixtures::build(fracmag::parse_scenario(kMirrorYaml));
  const Grid& g = *b.grid;
  DiscreteFunction data = DiscreteFunction::Zero(g.size());
  for (int i : g.nodes_in(Region::w1)) data(i) = 1.0 + 0.3 * g.node(i)[1] * g.node(i)[1];
  const DiscreteFunction u = b.model->solve(data);
  const double scale = u.cwiseAbs().maxCoeff();
  for (int i : g.nodes_in(Region::omega)) {
    LatticeIndex k = g.index(i);
    k[1] = g.lattice().counts[1] - 1 - k[1];
    EXPECT_NEAR(u(i), u(g.lattice().flatten(k)), 1e-10 * scale);
  }
}

TEST(Operator, OneDimensionalSolveMatchesDenseOracle) {
  const auto b = fixtures::build(fracmag::parse_scenario(fixtures::kOracleYaml));
  const oracle::Model1D o = fixtures::oracle_model(b);
  oracle::Vector g(static_cast<std::size_t>(b.grid->size()), 0.0);
  DiscreteFunction gd = DiscreteFunction::Zero(b.grid->size());
  for (int i : b.grid->nodes_in(Region::w1)) g[static_cast<std::size_t>(i)] = gd(i) = 1.0 + i;
  const oracle::Vector ref = o.solve(g);
  const DiscreteFunction u = b.model->solve(gd);
  for (int i = 0; i < b.grid->size(); ++i) EXPECT_NEAR(u(i), ref[static_cast<std::size_t>(i)], 1e-10 * std::abs(ref[8]));
}

TEST(Operator, SolutionOperatorIsBoundedAndReported) {
  const auto b = fixtures::build(fixtures::coarse_canonical());
  const Eigen::MatrixXd P = b.model->solver().solution_operator(b.grid->nodes_in(Region::w1));
  double worst = 0.0;
  for (int c = 0; c < P.cols(); ++c) worst = std::max(worst, std::sqrt(b.grid->cell_volume()) * P.col(c).norm());
  EXPECT_TRUE(std::isfinite(worst));
  EXPECT_GT(worst, 0.0);
  EXPECT_GT(b.model->solver().condition_number(), 1.0);
}

TEST(Operator, PreconditionsAreEnforced) {
  const auto b = fixtures::build(fixtures::coarse_canonical());
  DiscreteFunction bad = DiscreteFunction::Zero(b.grid->size());
  bad(b.grid->nodes_in(Region::omega)[0]) = 1.0;
  EXPECT_THROW(b.model->solve(bad), PreconditionError);
  std::vector<double> low(static_cast<std::size_t>(b.grid->size()), 0.0);
  for (int i : b.grid->nodes_in(Region::omega)) low[static_cast<std::size_t>(i)] = 0.1;
  EXPECT_THROW(ElectricPotential(*b.grid, low, 0.5), PreconditionError);
  EXPECT_THROW(form_value(b.model->form(), DiscreteFunction::Zero(3), DiscreteFunction::Zero(3)), PreconditionError);
}

TEST(Operator, BinaryDumpRoundTrip) {
  const auto b = fixtures::build(fixtures::coarse_canonical());
  std::stringstream buf;
  write_form_binary(b.model->form(), buf);
  int n = 0;
  double s = 0.0;
  const Eigen::MatrixXd M = read_form_binary(buf, n, s);
  EXPECT_EQ(n, 2);
  EXPECT_EQ(s, 0.5);
  EXPECT_TRUE(M == b.model->form().full());
}

TEST(Operator, ConjugateGradientOnSpdSystem) {
  Eigen::MatrixXd A = Eigen::MatrixXd::Random(30, 30);
  A = A * A.transpose() + 30.0 * Eigen::MatrixXd::Identity(30, 30);
  const Eigen::VectorXd b = Eigen::VectorXd::LinSpaced(30, -1.0, 2.0);
  Eigen::VectorXd x = Eigen::VectorXd::Zero(30);
  const CgResult r = conjugate_gradient(A, b, x, 1e-12, 200);
  EXPECT_TRUE(r.converged);
  EXPECT_LE((A * x - b).norm(), 1e-11 * b.norm());
}
