#include "commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iostream>
#include <limits>
#include <random>

#include <Eigen/Eigenvalues>

#include "fracmag/io.hpp"
#include "manifest.hpp"

namespace fracmag::cli {

namespace {

class Summary {
 public:
  explicit Summary(RunManifest& manifest) : manifest_(manifest) {}

  void check(const std::string& name, bool pass, const std::string& detail) {
    std::cout << (pass ? "PASS " : "FAIL ") << name << ": " << detail << '\n';
    manifest_.summary()[name] = {{"pass", pass}, {"detail", detail}};
    failed_ = failed_ || !pass;
  }

  void info(const std::string& name, const std::string& detail) {
    std::cout << "INFO " << name << ": " << detail << '\n';
    manifest_.summary()[name] = {{"detail", detail}};
  }

  int exit_code() const { return failed_ ? 1 : 0; }

 private:
  RunManifest& manifest_;
  bool failed_ = false;
};

std::string num(double v) { return format_double(v); }

QuadratureSettings quadrature(const Context& ctx) {
  QuadratureSettings q = ctx.scenario.quadrature;
  q.threads = ctx.threads;
  return q;
}

InverseSettings inverse_settings(const Context& ctx) {
  InverseSettings s = ctx.scenario.inverse;
  s.threads = ctx.threads;
  if (ctx.mode) s.mode = *ctx.mode;
  return s;
}

struct Models {
  std::shared_ptr<const Grid> grid;
  KernelSpec kernel;
  MagneticPotential A;
  ElectricPotential q;
  std::unique_ptr<LinearModel> truth;
  std::unique_ptr<LinearModel> reference;
};

Models build_models(const Context& ctx, bool with_reference = true) {
  Models m;
  const Scenario& sc = ctx.scenario;
  m.grid = scenario_grid(sc);
  m.kernel = scenario_kernel(sc);
  m.A = build_magnetic(sc.magnetic, *m.grid);
  m.q = build_electric(sc.electric, *m.grid);
  m.truth = std::make_unique<LinearModel>(m.grid, m.kernel, m.A, m.q, quadrature(ctx), sc.solver);
  if (with_reference)
    m.reference = std::make_unique<LinearModel>(m.grid, m.kernel, build_magnetic(sc.reference_magnetic, *m.grid),
                                                build_electric(sc.reference_electric, *m.grid), quadrature(ctx),
                                                sc.solver);
  return m;
}

void record_tolerances(RunManifest& manifest, const Scenario& sc) {
  auto& t = manifest.tolerances();
  t["solver_rtol"] = sc.solver.rtol;
  t["solver_method"] = sc.solver.kind == LinearSolverKind::cholesky ? "cholesky" : "cg";
  t["tail_rtol"] = sc.quadrature.tail_rtol;
  t["subcell_refinement"] = sc.quadrature.subcell_refinement;
  t["newton_rtol"] = sc.newton.rtol;
  t["runge_alphas"] = sc.runge.alphas;
  t["runge_norm_cap"] = sc.runge.norm_cap;
  t["inverse_residual_cap"] = sc.inverse.residual_cap;
  t["mass_term"] = "q*u*h";
  t["seed"] = sc.seed;
}

void print_counts(const Grid& grid) {
  const RegionCounts c = region_counts(grid);
  std::cout << "grid: " << grid.size() << " nodes (omega " << c.omega << ", w1 " << c.w1 << ", w2 " << c.w2
            << ", far " << c.far << "), h = " << grid.spacing() << '\n';
  if (grid.smoke_test_only()) std::cout << "note: n = 1 grid, smoke test only\n";
}

double max_abs(const Eigen::MatrixXd& m) { return m.size() ? m.cwiseAbs().maxCoeff() : 0.0; }

/// max over omega of the Galerkin residual |F[u, e_i] + q_i u_i vol|, relative
/// to the largest interior right-hand side entry.
double galerkin_residual(const LinearModel& model, const DiscreteFunction& u, const DiscreteFunction& g) {
  const Grid& grid = model.grid();
  const Eigen::VectorXd rhs = model.solver().interior_rhs(g);
  const double scale = rhs.size() ? rhs.cwiseAbs().maxCoeff() : 0.0;
  const Eigen::MatrixXd full = model.form().full();
  double worst = 0.0;
  for (int i : grid.nodes_in(Region::omega)) {
    const double r = full.row(i).dot(u) + model.electric().at(i) * u(i) * grid.cell_volume();
    worst = std::max(worst, std::abs(r));
  }
  return scale > 0.0 ? worst / scale : worst;
}

}  // namespace

int cmd_forward(const Context& ctx) {
  const Scenario& sc = ctx.scenario;
  RunManifest manifest("forward", sc.source, ctx.out);
  record_tolerances(manifest, sc);
  Summary summary(manifest);
  Models m = manifest.stage("assemble", [&] { return build_models(ctx, false); });
  print_counts(*m.grid);
  const DiscreteFunction g = build_exterior(sc.exterior, *m.grid);
  DiscreteFunction u;
  if (sc.nonlinearity) {
    const SemilinearModel model(m.grid, m.kernel, m.A, build_nonlinearity(sc, *m.grid), m.truth->form_ptr(),
                                sc.solver, sc.newton);
    const SemilinearResult res = manifest.stage("solve", [&] { return model.solve(g); });
    u = res.u;
    summary.info("newton_iterations", std::to_string(res.iterations));
    summary.check("interior_residual", res.residual_history.back() <= sc.newton.rtol,
                  "relative residual " + num(res.residual_history.back()));
  } else {
    u = manifest.stage("solve", [&] { return m.truth->solve(g); });
    const double res = galerkin_residual(*m.truth, u, g);
    summary.check("galerkin_equations", res <= 1e2 * sc.solver.rtol, "max relative residual " + num(res));
  }
  summary.info("l2_norm_omega", num(l2_norm_omega(*m.grid, u)));
  summary.info("condition_number", num(m.truth->solver().condition_number()));
  const auto path = ctx.out / "solution.csv";
  write_node_csv(path, *m.grid,
                 {{"g", {g.data(), g.data() + g.size()}}, {"u", {u.data(), u.data() + u.size()}}});
  manifest.output(path);
  if (ctx.dump_form) {
    const auto bin = ctx.out / "form.bin";
    std::ofstream out(bin, std::ios::binary);
    write_form_binary(m.truth->form(), out);
    manifest.output(bin);
  }
  manifest.write();
  return summary.exit_code();
}

int cmd_dtn(const Context& ctx) {
  const Scenario& sc = ctx.scenario;
  RunManifest manifest("dtn", sc.source, ctx.out);
  record_tolerances(manifest, sc);
  Summary summary(manifest);
  Models m = manifest.stage("assemble", [&] { return build_models(ctx, false); });
  print_counts(*m.grid);
  const DtnMatrix D = manifest.stage("dtn_matrix", [&] { return dtn_matrix(*m.truth, ctx.threads, sc.name); });
  const auto csv = ctx.out / "dtn.csv";
  const auto json = ctx.out / "dtn.json";
  write_dtn(D, csv, json);
  manifest.output(csv);
  manifest.output(json);

  const Eigen::MatrixXd P = manifest.stage("pairing", [&] { return exterior_pairing_matrix(*m.truth, ctx.threads); });
  const double asym = max_abs(P - P.transpose()) / std::max(max_abs(P), 1e-300);
  summary.check("pairing_symmetry", asym <= 1e-9, "max relative asymmetry " + num(asym));

  double route = 0.0;
  const Grid& grid = *m.grid;
  for (std::size_t c = 0; c < D.w1_nodes.size(); ++c) {
    const DiscreteFunction u = m.truth->solve(indicator(grid, D.w1_nodes[c]));
    for (std::size_t r = 0; r < D.w2_nodes.size(); ++r) {
      const double pw = grid.cell_volume() * pointwise_from_solution(grid, m.kernel, m.A, u, D.w2_nodes[r],
                                                                     sc.quadrature.subcell_refinement);
      route = std::max(route, std::abs(pw - D.entries(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c))));
    }
  }
  summary.info("route_difference", "max |pairing - pointwise| / max |entry| = " +
                                       num(route / std::max(max_abs(D.entries), 1e-300)));
  manifest.write();
  return summary.exit_code();
}

int cmd_identity(const Context& ctx) {
  const Scenario& sc = ctx.scenario;
  RunManifest manifest("identity", sc.source, ctx.out);
  record_tolerances(manifest, sc);
  Summary summary(manifest);
  Models m = manifest.stage("assemble", [&] { return build_models(ctx); });
  print_counts(*m.grid);
  const Grid& grid = *m.grid;
  DiscreteFunction g1 = build_exterior(sc.exterior, grid);
  if (sc.exterior.window != Region::w1 || g1.isZero(0.0)) {
    g1 = DiscreteFunction::Zero(grid.size());
    for (int i : grid.nodes_in(Region::w1)) g1(i) = 1.0;
  }
  DiscreteFunction g2 = DiscreteFunction::Zero(grid.size());
  for (int i : grid.nodes_in(Region::w2)) g2(i) = 1.0;

  const IdentityReport rep = manifest.stage("identity", [&] { return check_identity(*m.truth, *m.reference, g1, g2); });
  nlohmann::json j;
  auto put = [&](nlohmann::json& o, const IdentityReport& r) {
    o = {{"lhs", r.lhs},         {"rhs", r.rhs},         {"I1", r.terms.I1}, {"I2", r.terms.I2},
         {"I3", r.terms.I3},     {"I4", r.terms.I4},     {"mass_term", r.mass_term},
         {"residual", r.residual}, {"relative_residual", r.residual / r.scale()}};
  };
  put(j["windows"], rep);
  const double rel = rep.residual / rep.scale();
  summary.check("identity_residual", rel <= 1e-2, "|lhs - rhs| / scale = " + num(rel));
  summary.check("I2_I3_zero", rep.terms.I2 == 0.0 && rep.terms.I3 == 0.0,
                "I2 = " + num(rep.terms.I2) + ", I3 = " + num(rep.terms.I3));

  const SupportMask s1 = m.A.support();
  const SupportMask s2 = m.reference->magnetic().support();
  if (all_window_midpoints_avoid(grid, s1, s2)) {
    summary.check("I4_zero", rep.terms.I4 == 0.0, "all window midpoints avoid the supports; I4 = " + num(rep.terms.I4));
  } else {
    const double radius = sc.geometry.window_shrink_radius > 0.0 ? sc.geometry.window_shrink_radius : 2.0 * grid.spacing();
    const WindowShrink ws = shrink_windows(grid, s1, s2, radius);
    const auto g = std::make_shared<const Grid>(ws.grid);
    const LinearModel a(g, m.kernel, m.A, m.q, m.truth->form_ptr(), sc.solver);
    const LinearModel b(g, m.kernel, m.reference->magnetic(), m.reference->electric(), m.reference->form_ptr(),
                        sc.solver);
    DiscreteFunction h1 = DiscreteFunction::Zero(g->size()), h2 = DiscreteFunction::Zero(g->size());
    for (int i : g->nodes_in(Region::w1)) h1(i) = 1.0;
    for (int i : g->nodes_in(Region::w2)) h2(i) = 1.0;
    const IdentityReport shrunk = check_identity(a, b, h1, h2);
    put(j["shrunk_windows"], shrunk);
    j["witness"] = {{"x_node", ws.witness.x_node}, {"y_node", ws.witness.y_node}};
    summary.info("I4_full_windows", num(rep.terms.I4));
    summary.check("I4_zero_on_witness_windows", shrunk.terms.I4 == 0.0, "I4 = " + num(shrunk.terms.I4));
  }
  const auto path = ctx.out / "identity.json";
  write_text(path, j.dump(2) + "\n");
  manifest.output(path);
  manifest.write();
  return summary.exit_code();
}

int cmd_runge(const Context& ctx) {
  const Scenario& sc = ctx.scenario;
  RunManifest manifest("runge", sc.source, ctx.out);
  record_tolerances(manifest, sc);
  Summary summary(manifest);
  Models m = manifest.stage("assemble", [&] { return build_models(ctx, false); });
  print_counts(*m.grid);
  const Grid& grid = *m.grid;
  const RungeOperator op = manifest.stage("solution_operator", [&] { return RungeOperator(*m.truth, Region::w1); });

  std::mt19937_64 rng(sc.seed);
  std::normal_distribution<double> normal;
  Eigen::VectorXd c0(static_cast<Eigen::Index>(op.window().size()));
  for (auto& v : c0) v = normal(rng);
  Eigen::VectorXd reach = op.matrix() * c0;
  reach /= std::sqrt(grid.cell_volume()) * reach.norm();
  const double reach_res = op.approximate(reach, 0.0).residual;
  summary.check("reachable_target", reach_res <= 1e-8, "residual at alpha = 0: " + num(reach_res));

  std::vector<std::string> ids;
  std::vector<Eigen::VectorXd> targets;
  const auto omega = grid.nodes_in(Region::omega);
  for (std::size_t c = 0; c < omega.size(); ++c) {
    ids.push_back("cell_" + std::to_string(omega[c]));
    targets.push_back(cell_target(grid, static_cast<int>(c)));
  }
  std::vector<double> alphas = sc.runge.alphas;
  std::sort(alphas.begin(), alphas.end(), std::greater<>());
  const auto rows = manifest.stage("table", [&] { return runge_table(op, ids, targets, alphas); });
  // Each target's floor is its unregularized least-squares residual; once a
  // residual reaches it (to roundoff) further alphas may only stay there.
  bool strict = true;
  double worst_floor = 0.0;
  for (std::size_t t = 0; t < targets.size(); ++t) {
    const double floor = op.approximate(targets[t], 0.0).residual;
    worst_floor = std::max(worst_floor, floor);
    for (std::size_t a = 1; a < alphas.size(); ++a) {
      const double prev = rows[t * alphas.size() + a - 1].residual;
      const double cur = rows[t * alphas.size() + a].residual;
      const bool at_floor = prev - floor <= 1e-12 * std::max(floor, 1.0);
      strict = strict && (cur < prev || (at_floor && cur - floor <= 1e-12 * std::max(floor, 1.0)));
    }
  }
  summary.check("indicator_residual_decreasing", strict, "strictly decreasing across the alpha schedule until the floor");
  summary.info("indicator_floor", "largest alpha = 0 floor over cells " + num(worst_floor));
  const auto path = ctx.out / "runge.csv";
  write_runge_table(path, rows);
  manifest.output(path);
  manifest.write();
  return summary.exit_code();
}

int cmd_invert(const Context& ctx) {
  const Scenario& sc = ctx.scenario;
  RunManifest manifest("invert", sc.source, ctx.out);
  record_tolerances(manifest, sc);
  Summary summary(manifest);
  Models m = manifest.stage("assemble", [&] { return build_models(ctx); });
  print_counts(*m.grid);
  const InverseSettings settings = inverse_settings(ctx);
  DtnMatrix data;
  if (ctx.data) {
    auto sidecar = *ctx.data;
    sidecar.replace_extension(".json");
    data = read_dtn(*ctx.data, sidecar);
  } else {
    data = manifest.stage("data", [&] { return dtn_matrix(*m.truth, ctx.threads, sc.name); });
  }
  const ReconstructionReport rep = manifest.stage("reconstruct", [&] {
    return reconstruct(data, *m.reference, settings.mode == ReconstructionMode::verification ? m.truth.get() : nullptr,
                       settings, GroundTruth{&m.A, &m.q});
  });
  std::vector<std::string> written;
  write_report(rep, *m.grid, ctx.out.string(), &written);
  for (const auto& w : written) manifest.output(w);
  summary.info("mode", to_string(rep.mode));
  summary.info("A_relative_error", rep.A_error ? num(*rep.A_error) : "n/a");
  summary.info("q_relative_error", rep.q_error ? num(*rep.q_error) : "n/a");
  summary.info("coverage", std::to_string(rep.points.size() - rep.uncovered_points - rep.ambiguous_points) + " of " +
                               std::to_string(rep.points.size()) + " omega points recovered");
  summary.info("max_runge_residual", num(rep.max_runge_residual));
  manifest.write();
  return summary.exit_code();
}

int cmd_linearize(const Context& ctx) {
  const Scenario& sc = ctx.scenario;
  RunManifest manifest("linearize", sc.source, ctx.out);
  record_tolerances(manifest, sc);
  Summary summary(manifest);
  Models m = manifest.stage("assemble", [&] { return build_models(ctx); });
  print_counts(*m.grid);
  const SemilinearModel model(m.grid, m.kernel, m.A, build_nonlinearity(sc, *m.grid), m.truth->form_ptr(), sc.solver,
                              sc.newton);
  const DiscreteFunction g = build_exterior(sc.exterior, *m.grid);
  const auto rows = manifest.stage("table", [&] { return linearize(model, g, sc.linearize_eps); });
  const auto path = ctx.out / "linearize.csv";
  write_linearize_table(path, rows);
  manifest.output(path);
  bool nonincreasing = true;
  for (std::size_t k = 1; k < rows.size(); ++k) nonincreasing = nonincreasing && rows[k].d <= rows[k - 1].d;
  summary.check("d_nonincreasing", nonincreasing, "d(eps) along the eps list");
  if (rows.size() > 1) summary.info("final_ratio", num(rows.back().ratio));

  const InverseSettings settings = inverse_settings(ctx);
  const ElectricPotential a1 = model.nonlinearity().linear_part(*m.grid);
  const ReconstructionReport rep = manifest.stage("reconstruct", [&] {
    return linearized_reconstruct(model, *m.reference, rows.back().eps, settings, GroundTruth{&m.A, &a1});
  });
  std::vector<std::string> written;
  write_report(rep, *m.grid, ctx.out.string(), &written);
  for (const auto& w : written) manifest.output(w);
  summary.info("A_relative_error", rep.A_error ? num(*rep.A_error) : "n/a");
  summary.info("a1_relative_error", rep.q_error ? num(*rep.q_error) : "n/a");
  summary.info("linearization_bias", num(rep.linearization_bias.value_or(0.0)));
  manifest.write();
  return summary.exit_code();
}

int cmd_report(const Context& ctx) {
  const Scenario& sc = ctx.scenario;
  RunManifest manifest("report", sc.source, ctx.out);
  record_tolerances(manifest, sc);
  Summary summary(manifest);
  Models m = manifest.stage("assemble", [&] { return build_models(ctx); });
  print_counts(*m.grid);
  nlohmann::json j;

  const Eigen::MatrixXd F = m.truth->form().full();
  const double asym = max_abs(F - F.transpose());
  summary.check("form_symmetric", asym == 0.0, "max |B - B^T| = " + num(asym));
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(F, Eigen::EigenvaluesOnly);
  const double min_eig = eig.eigenvalues()(0);
  summary.check("form_psd", min_eig >= -1e-10, "smallest eigenvalue " + num(min_eig));
  j["form"] = {{"asymmetry", asym}, {"min_eigenvalue", min_eig}};

  const LinearModel flipped(m.grid, m.kernel, m.A.negated(), m.q, quadrature(ctx), sc.solver);
  const DtnMatrix D1 = dtn_matrix(*m.truth, ctx.threads);
  const DtnMatrix D2 = dtn_matrix(flipped, ctx.threads);
  const bool same = D1.entries.size() == D2.entries.size() &&
                    std::memcmp(D1.entries.data(), D2.entries.data(), sizeof(double) * D1.entries.size()) == 0;
  summary.check("sign_invariance", same, same ? "DtN(A) and DtN(-A) bitwise identical" : "DtN(A) != DtN(-A)");

  DiscreteFunction g1 = DiscreteFunction::Zero(m.grid->size()), g2 = DiscreteFunction::Zero(m.grid->size());
  for (int i : m.grid->nodes_in(Region::w1)) g1(i) = 1.0;
  for (int i : m.grid->nodes_in(Region::w2)) g2(i) = 1.0;
  const IdentityReport id = check_identity(*m.truth, *m.reference, g1, g2);
  summary.check("identity_residual", id.residual <= 1e-2 * id.scale(),
                "|lhs - rhs| / scale = " + num(id.residual / id.scale()));
  j["identity"] = {{"lhs", id.lhs}, {"rhs", id.rhs}, {"residual", id.residual}};
  const auto path = ctx.out / "report.json";
  write_text(path, j.dump(2) + "\n");
  manifest.output(path);
  manifest.write();
  return summary.exit_code();
}

}  // namespace fracmag::cli
