#pragma once

#include <filesystem>
#include <memory>
#include <string>

#include "fracmag/scenario.hpp"
#include "oracles.hpp"

namespace fixtures {

inline std::filesystem::path scenario_dir() { return FRACMAG_SCENARIO_DIR; }

inline fracmag::Scenario load(const std::string& file) { return fracmag::load_scenario(scenario_dir() / file); }

/// 12-node 1-D scenario with hand-picked per-node A and q on four omega cells.
inline const char* const kOracleYaml = R"(
name: oracle_1d
geometry:
  n: 1
  s: 0.5
  r: 0.7
  h: 0.4
  box: {lo: [-1.2], hi: [3.6]}
  omega:
    ball: {center: [0.0], radius: 0.7}
  w1: {lo: [2.0], hi: [2.8]}
  w2: {lo: [2.8], hi: [3.2]}
magnetic:
  preset: values
  values: [[0.3], [0.5], [-0.4], [0.2]]
electric:
  preset: values
  values: [1.2, 1.5, 0.9, 1.1]
  lower_bound: 0.5
)";

struct Built {
  fracmag::Scenario scenario;
  std::shared_ptr<const fracmag::Grid> grid;
  fracmag::KernelSpec kernel;
  fracmag::MagneticPotential A;
  fracmag::ElectricPotential q;
  std::unique_ptr<fracmag::LinearModel> model;
};

inline Built build(fracmag::Scenario sc) {
  Built b;
  b.grid = fracmag::scenario_grid(sc);
  b.kernel = fracmag::scenario_kernel(sc);
  b.A = fracmag::build_magnetic(sc.magnetic, *b.grid);
  b.q = fracmag::build_electric(sc.electric, *b.grid);
  b.model = std::make_unique<fracmag::LinearModel>(b.grid, b.kernel, b.A, b.q, sc.quadrature, sc.solver);
  b.scenario = std::move(sc);
  return b;
}

/// Canonical scenario coarsened to h = 0.25 so that assembly stays cheap.
inline fracmag::Scenario coarse_canonical() {
  fracmag::Scenario sc = load("canonical.yaml");
  sc.geometry.h = 0.25;
  sc.geometry.box.lo = {-1.25, -1.25, 0};
  sc.geometry.box.hi = {3.75, 1.25, 0};
  sc.geometry.w1 = {{3.0, 0.0, 0}, {3.5, 0.75, 0}};
  sc.geometry.w2 = {{3.0, -0.75, 0}, {3.5, 0.0, 0}};
  return sc;
}

inline fracmag::Scenario with_s(fracmag::Scenario sc, double s) {
  sc.geometry.s = s;
  return sc;
}

/// The oracle model for a 1-D grid with the given scalar A and q per node.
inline oracle::Model1D oracle_model(const Built& b) {
  oracle::Model1D m;
  const fracmag::Grid& g = *b.grid;
  m.s = b.kernel.s;
  m.c = b.kernel.normalization;
  m.h = b.scenario.geometry.h;
  m.lo = b.scenario.geometry.box.lo[0];
  m.size = g.size();
  for (int i = 0; i < g.size(); ++i) {
    m.A.push_back(b.A.at(i)[0]);
    m.q.push_back(b.q.at(i));
    if (g.region(i) == fracmag::Region::omega) m.omega.push_back(i);
    if (g.region(i) == fracmag::Region::w1) m.w1.push_back(i);
    if (g.region(i) == fracmag::Region::w2) m.w2.push_back(i);
  }
  return m;
}

inline fracmag::DiscreteFunction window_sum(const fracmag::Grid& grid, fracmag::Region w) {
  fracmag::DiscreteFunction g = fracmag::DiscreteFunction::Zero(grid.size());
  for (int i : grid.nodes_in(w)) g(i) = 1.0;
  return g;
}

}  // namespace fixtures
