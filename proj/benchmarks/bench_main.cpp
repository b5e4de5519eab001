#include <benchmark/benchmark.h>

#include <memory>

#include "fracmag/dtn.hpp"
#include "fracmag/runge.hpp"
#include "fracmag/scenario.hpp"

namespace {

// Canonical geometry with spacing h; state.range(0) is 1/h.
fracmag::Scenario scenario_for(int inv_h) {
  fracmag::Scenario sc;
  auto& g = sc.geometry;
  g.n = 2;
  g.s = 0.5;
  g.r = 1.0;
  g.h = 1.0 / inv_h;
  g.box = {{-1.0, -1.0, 0.0}, {3.75, 1.0, 0.0}};
  g.omega.shape = fracmag::Ball{{0.0, 0.0, 0.0}, 0.8};
  g.w1 = {{3.0, 0.125, 0.0}, {3.5, 0.625, 0.0}};
  g.w2 = {{3.0, -0.625, 0.0}, {3.5, -0.125, 0.0}};
  sc.magnetic.preset = "smooth_bump";
  sc.magnetic.amplitude = 0.25;
  sc.magnetic.direction = {1.0, -0.6, 0.0};
  sc.magnetic.radius = 0.8;
  return sc;
}

struct Fixture {
  std::shared_ptr<const fracmag::Grid> grid;
  fracmag::KernelSpec kernel;
  fracmag::MagneticPotential A;
  fracmag::ElectricPotential q;

  explicit Fixture(int inv_h) {
    const auto sc = scenario_for(inv_h);
    grid = fracmag::scenario_grid(sc);
    kernel = fracmag::scenario_kernel(sc);
    A = fracmag::build_magnetic(sc.magnetic, *grid);
    q = fracmag::build_electric(sc.electric, *grid);
  }
};

void BM_AssembleForm(benchmark::State& state) {
  const Fixture f(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(fracmag::assemble_form(*f.grid, f.kernel, f.A));
  state.counters["nodes"] = f.grid->size();
}
BENCHMARK(BM_AssembleForm)->Arg(8)->Arg(12)->Unit(benchmark::kMillisecond);

void BM_Solve(benchmark::State& state) {
  const Fixture f(8);
  auto form = std::make_shared<const fracmag::NonlocalForm>(fracmag::assemble_form(*f.grid, f.kernel, f.A));
  fracmag::SolverSettings solver;
  solver.kind = state.range(0) == 0 ? fracmag::LinearSolverKind::cholesky
                                    : fracmag::LinearSolverKind::conjugate_gradient;
  const fracmag::DiscreteFunction g = fracmag::indicator(*f.grid, f.grid->nodes_in(fracmag::Region::w1)[0]);
  for (auto _ : state) {
    const fracmag::LinearModel model(f.grid, f.kernel, f.A, f.q, form, solver);
    benchmark::DoNotOptimize(model.solve(g));
  }
  state.SetLabel(state.range(0) == 0 ? "cholesky" : "cg");
}
BENCHMARK(BM_Solve)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_DtnMatrix(benchmark::State& state) {
  const Fixture f(8);
  const fracmag::LinearModel model(f.grid, f.kernel, f.A, f.q);
  for (auto _ : state) benchmark::DoNotOptimize(fracmag::dtn_matrix(model, static_cast<int>(state.range(0))));
}
BENCHMARK(BM_DtnMatrix)->Arg(1)->Arg(0)->Unit(benchmark::kMillisecond);

void BM_RungeCellTable(benchmark::State& state) {
  const Fixture f(8);
  const fracmag::LinearModel model(f.grid, f.kernel, f.A, f.q);
  const fracmag::RungeOperator op(model, fracmag::Region::w1);
  const fracmag::RungeSettings settings;
  for (auto _ : state)
    for (int c = 0; c < op.omega_size(); ++c)
      benchmark::DoNotOptimize(op.approximate_auto(fracmag::cell_target(*f.grid, c), settings));
}
BENCHMARK(BM_RungeCellTable)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
