#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "fixtures.hpp"
#include "fracmag/dtn.hpp"
#include "fracmag/errors.hpp"

using namespace fracmag;

namespace {

DiscreteFunction random_exterior(const Grid& grid, std::mt19937_64& rng) {
  std::normal_distribution<double> n;
  DiscreteFunction f = DiscreteFunction::Zero(grid.size());
  for (Region r : {Region::w1, Region::w2})
    for (int i : grid.nodes_in(r)) f(i) = n(rng);
  return f;
}

class TempDir {
 public:
  TempDir()
      : path_(std::filesystem::temp_directory_path() /
              ("fracmag_dtn_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()))) {
    std::filesystem::create_directories(path_);
  }
  ~TempDir() { std::filesystem::remove_all(path_); }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace

TEST(Dtn, PairingIsSymmetricOnRandomExteriorData) {
  const auto b = fixtures::build(fixtures::coarse_canonical());
  std::mt19937_64 rng(11);
  for (int t = 0; t < 20; ++t) {
    const DiscreteFunction g = random_exterior(*b.grid, rng);
    const DiscreteFunction h = random_exterior(*b.grid, rng);
    const double gh = dtn_pairing(*b.model, g, h), hg = dtn_pairing(*b.model, h, g);
    EXPECT_LE(std::abs(gh - hg), 1e-9 * std::max({std::abs(gh), std::abs(hg), 1e-300}));
  }
}

TEST(Dtn, PairingDoesNotDependOnTheExtension) {
  const auto b = fixtures::build(fixtures::coarse_canonical());
  std::mt19937_64 rng(12);
  std::normal_distribution<double> n;
  const DiscreteFunction g = random_exterior(*b.grid, rng);
  const DiscreteFunction h = random_exterior(*b.grid, rng);
  const double base = dtn_pairing(*b.model, g, h);
  for (int t = 0; t < 5; ++t) {
    DiscreteFunction ext = DiscreteFunction::Zero(b.grid->size());
    for (int i : b.grid->nodes_in(Region::omega)) ext(i) = n(rng);
    EXPECT_NEAR(dtn_pairing(*b.model, g, h, ext), base, 1e-9 * std::abs(base));
  }
  DiscreteFunction bad = DiscreteFunction::Zero(b.grid->size());
  bad(b.grid->nodes_in(Region::far)[0]) = 1.0;
  EXPECT_THROW(dtn_pairing(*b.model, g, h, bad), PreconditionError);
}

TEST(Dtn, ZeroDataGivesZeroPairing) {
  const auto b = fixtures::build(fixtures::coarse_canonical());
  const DiscreteFunction zero = DiscreteFunction::Zero(b.grid->size());
  const DiscreteFunction h = fixtures::window_sum(*b.grid, Region::w2);
  EXPECT_EQ(dtn_pairing(*b.model, zero, h), 0.0);
  EXPECT_EQ(dtn_pointwise(*b.model, zero, b.grid->nodes_in(Region::w2)[0]), 0.0);
}

TEST(Dtn, PointwiseOfOneExteriorCellIsTheBareKernel) {
  // Raw indicator, no interior solve: only the y term of the sum survives.
  const auto b = fixtures::build(fixtures::coarse_canonical());
  const Grid& g = *b.grid;
  const int y = g.nodes_in(Region::w1)[0];
  const int x = g.nodes_in(Region::w2)[0];
  const DiscreteFunction e = indicator(g, y);
  const double got = pointwise_from_solution(g, b.kernel, b.A, e, x);
  EXPECT_DOUBLE_EQ(got, -2.0 * g.cell_volume() * eval_K(b.kernel, g.node(x), g.node(y)));
  EXPECT_THROW(pointwise_from_solution(g, b.kernel, b.A, e, y), PreconditionError);
}

TEST(Dtn, PairingAndPointwiseRoutesAgree) {
  for (bool refine : {false, true}) {
    fracmag::Scenario sc = fixtures::coarse_canonical();
    sc.quadrature.subcell_refinement = refine;
    const auto b = fixtures::build(sc);
    const Grid& g = *b.grid;
    const DtnMatrix m = dtn_matrix(*b.model, 1);
    for (std::size_t i = 0; i < m.w1_nodes.size(); ++i) {
      const DiscreteFunction u = b.model->solve(indicator(g, m.w1_nodes[i]));
      for (std::size_t j = 0; j < m.w2_nodes.size(); ++j) {
        const double pw = g.cell_volume() * pointwise_from_solution(g, b.kernel, b.A, u, m.w2_nodes[j], refine);
        const double entry = m.entries(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i));
        // Refinement splits adjacent pairs differently in the two routes.
        if (refine && lattice_adjacent(g.index(m.w1_nodes[i]), g.index(m.w2_nodes[j]))) continue;
        EXPECT_NEAR(pw, entry, 1e-12 * std::abs(entry));
      }
    }
  }
}

TEST(Dtn, MatrixIsThreadCountIndependent) {
  const auto b = fixtures::build(fixtures::coarse_canonical());
  const DtnMatrix one = dtn_matrix(*b.model, 1);
  const DtnMatrix many = dtn_matrix(*b.model, 4);
  EXPECT_TRUE(one.entries == many.entries);
}

TEST(Dtn, MagneticSignIsInvisible) {
  const auto b = fixtures::build(fixtures::coarse_canonical());
  const LinearModel flipped(b.grid, b.kernel, b.A.negated(), b.q, b.scenario.quadrature, b.scenario.solver);
  EXPECT_TRUE(dtn_matrix(*b.model, 1).entries == dtn_matrix(flipped, 1).entries);
}

TEST(Dtn, ElectricPotentialChangeOnOneCellIsSeen) {
  const auto b = fixtures::build(fixtures::coarse_canonical());
  const Grid& g = *b.grid;
  std::vector<double> q = b.q.values();
  q[static_cast<std::size_t>(g.nodes_in(Region::omega)[0])] += 0.5;
  const LinearModel other(b.grid, b.kernel, b.A, ElectricPotential(g, q, b.q.lower_bound()), b.model->form_ptr(),
                          b.scenario.solver);
  const double diff = (dtn_matrix(*b.model, 1).entries - dtn_matrix(other, 1).entries).cwiseAbs().maxCoeff();
  EXPECT_GT(diff, 0.0);
}

TEST(Dtn, CsvAndJsonRoundTripIsExact) {
  const auto b = fixtures::build(fixtures::coarse_canonical());
  const DtnMatrix m = dtn_matrix(*b.model, 1, "test");
  const TempDir dir;
  write_dtn(m, dir.path() / "dtn.csv", dir.path() / "dtn.json");
  const DtnMatrix r = read_dtn(dir.path() / "dtn.csv", dir.path() / "dtn.json");
  EXPECT_TRUE(r.entries == m.entries);
  EXPECT_EQ(r.w1_nodes, m.w1_nodes);
  EXPECT_EQ(r.w2_nodes, m.w2_nodes);
  EXPECT_EQ(r.w1_points, m.w1_points);
  EXPECT_EQ(r.n, 2);
  EXPECT_EQ(r.h, 0.25);
  EXPECT_EQ(r.provenance, "test");
  EXPECT_EQ(r.mass_term, "q*u*h");
}

TEST(Dtn, OneDimensionalMatrixMatchesDenseOracle) {
  const auto b = fixtures::build(fracmag::parse_scenario(fixtures::kOracleYaml));
  const oracle::Model1D o = fixtures::oracle_model(b);
  const oracle::Matrix ref = o.dtn();
  const DtnMatrix m = dtn_matrix(*b.model, 1);
  ASSERT_EQ(m.entries.rows(), static_cast<Eigen::Index>(ref.size()));
  for (std::size_t j = 0; j < ref.size(); ++j)
    for (std::size_t i = 0; i < ref[j].size(); ++i) {
      const double e = m.entries(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i));
      EXPECT_NEAR(e, ref[j][i], 1e-10 * std::abs(ref[j][i]));
    }
  oracle::Vector g(static_cast<std::size_t>(b.grid->size()), 0.0);
  g[static_cast<std::size_t>(m.w1_nodes[0])] = 1.0;
  const oracle::Vector u = o.solve(g);
  const double pw = o.pointwise(u, m.w2_nodes[0]);
  EXPECT_NEAR(dtn_pointwise(*b.model, indicator(*b.grid, m.w1_nodes[0]), m.w2_nodes[0]), pw, 1e-10 * std::abs(pw));
}

TEST(Dtn, ExteriorPairingMatrixIsSymmetric) {
  const auto b = fixtures::build(fixtures::coarse_canonical());
  const Eigen::MatrixXd P = exterior_pairing_matrix(*b.model, 1);
  EXPECT_LE((P - P.transpose()).cwiseAbs().maxCoeff(), 1e-9 * P.cwiseAbs().maxCoeff());
}
