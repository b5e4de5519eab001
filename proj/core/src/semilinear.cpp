#include "fracmag/semilinear.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include <Eigen/LU>

#include "fracmag/io.hpp"
#include "fracmag/parallel.hpp"

namespace fracmag {

Nonlinearity::Nonlinearity(const Grid& grid, std::vector<std::vector<double>> coefficients, double lower_bound)
    : coeffs_(std::move(coefficients)), lower_bound_(lower_bound) {
  if (coeffs_.empty()) throw PreconditionError("nonlinearity needs at least the linear coefficient a_1");
  if (!(lower_bound > 0.0)) throw PreconditionError("nonlinearity lower bound must be positive");
  for (const auto& c : coeffs_)
    if (c.size() != static_cast<std::size_t>(grid.size()))
      throw PreconditionError("nonlinearity coefficients must be given on every grid node");
  for (int i = 0; i < grid.size(); ++i) {
    const bool in_omega = grid.region(i) == Region::omega;
    for (const auto& c : coeffs_)
      if (!in_omega && c[static_cast<std::size_t>(i)] != 0.0)
        throw PreconditionError("nonlinearity coefficients must vanish outside omega");
    if (in_omega && !(coeffs_[0][static_cast<std::size_t>(i)] >= lower_bound))
      throw PreconditionError("a_1 must be bounded below by the lower bound on omega");
  }
}

Nonlinearity Nonlinearity::constant(const Grid& grid, const std::vector<double>& a, double lower_bound) {
  std::vector<std::vector<double>> coeffs(a.size(), std::vector<double>(static_cast<std::size_t>(grid.size()), 0.0));
  for (std::size_t k = 0; k < a.size(); ++k)
    for (int i : grid.nodes_in(Region::omega)) coeffs[k][static_cast<std::size_t>(i)] = a[k];
  return Nonlinearity(grid, std::move(coeffs), lower_bound);
}

bool Nonlinearity::is_linear() const noexcept {
  for (std::size_t k = 1; k < coeffs_.size(); ++k)
    for (double v : coeffs_[k])
      if (v != 0.0) return false;
  return true;
}

ElectricPotential Nonlinearity::linear_part(const Grid& grid) const {
  return ElectricPotential(grid, coeffs_.front(), lower_bound_);
}

double eval_a(const Nonlinearity& nl, int node, double z) {
  double sum = 0.0, power = 1.0, factorial = 1.0;
  for (int k = 1; k <= nl.order(); ++k) {
    power *= z;
    factorial *= k;
    sum += nl.coefficient(k, node) * power / factorial;
  }
  return sum;
}

double eval_dz_a(const Nonlinearity& nl, int node, double z) {
  // d/dz a_k z^k / k! = a_k z^{k-1} / (k-1)!
  double sum = 0.0, power = 1.0, factorial = 1.0;
  for (int k = 1; k <= nl.order(); ++k) {
    if (k > 1) {
      power *= z;
      factorial *= (k - 1);
    }
    sum += nl.coefficient(k, node) * power / factorial;
  }
  return sum;
}

namespace {

Eigen::MatrixXd interior_without_q(const Grid& grid, const NonlocalForm& form) {
  const auto omega = grid.nodes_in(Region::omega);
  const auto m = static_cast<Eigen::Index>(omega.size());
  Eigen::MatrixXd out(m, m);
  for (Eigen::Index b = 0; b < m; ++b)
    for (Eigen::Index a = 0; a < m; ++a) out(a, b) = form.pairs()(omega[a], omega[b]);
  for (Eigen::Index a = 0; a < m; ++a) out(a, a) += form.tail()(omega[a]);
  return out;
}

}  // namespace

SemilinearModel::SemilinearModel(std::shared_ptr<const Grid> grid, KernelSpec kernel, MagneticPotential A,
                                 Nonlinearity nl, QuadratureSettings quadrature, SolverSettings solver,
                                 NewtonSettings newton)
    : nl_(std::move(nl)),
      linear_(grid, kernel, std::move(A), nl_.linear_part(*grid), quadrature, solver),
      newton_(newton),
      interior_form_(interior_without_q(*grid, linear_.form())) {
  check_smallness();
}

SemilinearModel::SemilinearModel(std::shared_ptr<const Grid> grid, KernelSpec kernel, MagneticPotential A,
                                 Nonlinearity nl, std::shared_ptr<const NonlocalForm> form, SolverSettings solver,
                                 NewtonSettings newton)
    : nl_(std::move(nl)),
      linear_(grid, kernel, std::move(A), nl_.linear_part(*grid), std::move(form), solver),
      newton_(newton),
      interior_form_(interior_without_q(*grid, linear_.form())) {
  check_smallness();
}

void SemilinearModel::check_smallness() const {
  const Grid& g = linear_.grid();
  const double bound = std::numbers::pi / (8.0 * std::sqrt(static_cast<double>(g.dimension())) * g.radius_bound());
  if (linear_.magnetic().sup_norm() > bound) {
    std::ostringstream msg;
    msg << "semilinear problem requires ||A||_inf <= pi/(8 sqrt(n) r) = " << bound << ", got "
        << linear_.magnetic().sup_norm();
    throw PreconditionError(msg.str());
  }
}

Eigen::VectorXd SemilinearModel::residual(const DiscreteFunction& u) const {
  const Grid& grid = linear_.grid();
  const auto omega = grid.nodes_in(Region::omega);
  DiscreteFunction g = u;
  for (int i : omega) g(i) = 0.0;
  Eigen::VectorXd x(static_cast<Eigen::Index>(omega.size()));
  for (std::size_t a = 0; a < omega.size(); ++a) x(static_cast<Eigen::Index>(a)) = u(omega[a]);
  Eigen::VectorXd r = interior_form_ * x - linear_.solver().interior_rhs(g);
  const double vol = grid.cell_volume();
  for (std::size_t a = 0; a < omega.size(); ++a)
    r(static_cast<Eigen::Index>(a)) += eval_a(nl_, omega[a], x(static_cast<Eigen::Index>(a))) * vol;
  return r;
}

Eigen::MatrixXd SemilinearModel::jacobian(const DiscreteFunction& u) const {
  const Grid& grid = linear_.grid();
  const auto omega = grid.nodes_in(Region::omega);
  Eigen::MatrixXd J = interior_form_;
  for (std::size_t a = 0; a < omega.size(); ++a) {
    const auto i = static_cast<Eigen::Index>(a);
    J(i, i) += eval_dz_a(nl_, omega[a], u(omega[a])) * grid.cell_volume();
  }
  return J;
}

bool SemilinearModel::newton(const Eigen::VectorXd& rhs, Eigen::VectorXd& x, SemilinearResult& log) const {
  const Grid& grid = linear_.grid();
  const auto omega = grid.nodes_in(Region::omega);
  const double vol = grid.cell_volume();
  const double scale = rhs.norm();
  auto F = [&](const Eigen::VectorXd& y) {
    Eigen::VectorXd r = interior_form_ * y - rhs;
    for (std::size_t a = 0; a < omega.size(); ++a)
      r(static_cast<Eigen::Index>(a)) += eval_a(nl_, omega[a], y(static_cast<Eigen::Index>(a))) * vol;
    return r;
  };
  Eigen::VectorXd r = F(x);
  double rn = r.norm() / scale;
  log.residual_history.assign(1, rn);
  log.iterations = 0;
  while (std::isfinite(rn) && rn > newton_.rtol) {
    if (log.iterations >= newton_.max_iterations) return false;
    Eigen::MatrixXd J = interior_form_;
    for (std::size_t a = 0; a < omega.size(); ++a) {
      const auto i = static_cast<Eigen::Index>(a);
      J(i, i) += eval_dz_a(nl_, omega[a], x(i)) * vol;
    }
    const Eigen::VectorXd dx = J.partialPivLu().solve(-r);
    if (!dx.allFinite()) return false;
    double t = 1.0;
    Eigen::VectorXd trial = x + dx;
    Eigen::VectorXd rt = F(trial);
    while (!(rt.norm() / scale <= (1.0 - 1e-4 * t) * rn) && t > 1e-4) {
      t *= 0.5;
      trial = x + t * dx;
      rt = F(trial);
    }
    if (!(rt.norm() / scale < rn)) return false;
    x = std::move(trial);
    r = std::move(rt);
    rn = r.norm() / scale;
    ++log.iterations;
    log.residual_history.push_back(rn);
  }
  return std::isfinite(rn);
}

SemilinearResult SemilinearModel::solve(const DiscreteFunction& g) const {
  const Grid& grid = linear_.grid();
  for (int i = 0; i < grid.size(); ++i)
    if (g(i) != 0.0 && grid.region(i) != Region::w1)
      throw PreconditionError("semilinear exterior data must be supported in W1");
  const auto omega = grid.nodes_in(Region::omega);
  SemilinearResult out;
  const Eigen::VectorXd rhs = linear_.solver().interior_rhs(g);
  if (rhs.norm() == 0.0) {
    out.u = g;
    out.residual_history = {0.0};
    return out;
  }
  // Start from the linear solve with q = a_1.
  DiscreteFunction lin = linear_.solve(g);
  Eigen::VectorXd x(static_cast<Eigen::Index>(omega.size()));
  for (std::size_t a = 0; a < omega.size(); ++a) x(static_cast<Eigen::Index>(a)) = lin(omega[a]);
  if (!newton(rhs, x, out)) {
    const double last = out.residual_history.empty() ? std::numeric_limits<double>::infinity()
                                                     : out.residual_history.back();
    double converged = 0.0;
    for (int k = 1; k <= newton_.max_halvings; ++k) {
      const double frac = std::ldexp(1.0, -k);
      const DiscreteFunction gk = frac * g;
      const DiscreteFunction lk = linear_.solve(gk);
      Eigen::VectorXd xk(static_cast<Eigen::Index>(omega.size()));
      for (std::size_t a = 0; a < omega.size(); ++a) xk(static_cast<Eigen::Index>(a)) = lk(omega[a]);
      SemilinearResult trial;
      if (newton(linear_.solver().interior_rhs(gk), xk, trial)) {
        converged = frac;
        break;
      }
    }
    std::ostringstream msg;
    msg << "SMALLNESS_EXCEEDED: Newton diverged (last relative residual " << last << ")";
    if (converged > 0.0) msg << "; converges only for g scaled by " << converged;
    else msg << "; no convergence after " << newton_.max_halvings << " halvings of g";
    throw SmallnessExceeded(msg.str(), last, converged);
  }
  out.u = g;
  for (std::size_t a = 0; a < omega.size(); ++a) out.u(omega[a]) = x(static_cast<Eigen::Index>(a));
  return out;
}

SemilinearResult solve_semilinear(const SemilinearModel& model, const DiscreteFunction& g) { return model.solve(g); }

Eigen::VectorXd semilinear_dtn(const SemilinearModel& model, const DiscreteFunction& g) {
  const Grid& grid = model.grid();
  const DiscreteFunction u = model.solve(g).u;
  const auto w2 = grid.nodes_in(Region::w2);
  Eigen::VectorXd out(static_cast<Eigen::Index>(w2.size()));
  const LinearModel& lin = model.linear();
  for (std::size_t j = 0; j < w2.size(); ++j)
    out(static_cast<Eigen::Index>(j)) = pointwise_from_solution(grid, lin.kernel(), lin.magnetic(), u, w2[j],
                                                                lin.form().meta().subcell_refinement);
  return out;
}

DtnMatrix linearized_dtn_matrix(const SemilinearModel& model, double eps, int threads) {
  if (!(eps > 0.0)) throw PreconditionError("linearization eps must be positive");
  const Grid& grid = model.grid();
  DtnMatrix m;
  m.n = grid.dimension();
  m.h = grid.spacing();
  m.provenance = "semilinear DtN at eps = " + format_double(eps) + ", divided by eps";
  const auto w1 = grid.nodes_in(Region::w1);
  const auto w2 = grid.nodes_in(Region::w2);
  m.w1_nodes.assign(w1.begin(), w1.end());
  m.w2_nodes.assign(w2.begin(), w2.end());
  for (int i : w1) m.w1_points.push_back(grid.node(i));
  for (int j : w2) m.w2_points.push_back(grid.node(j));
  m.entries.resize(static_cast<Eigen::Index>(w2.size()), static_cast<Eigen::Index>(w1.size()));
  const double vol = grid.cell_volume();
  parallel_for(0, static_cast<int>(w1.size()), threads, [&](int c) {
    const Eigen::VectorXd col = semilinear_dtn(model, eps * indicator(grid, w1[static_cast<std::size_t>(c)]));
    m.entries.col(c) = (vol / eps) * col;
  });
  return m;
}

double hs_proxy_norm(const NonlocalForm& zero_form, const Grid& grid, const DiscreteFunction& v) {
  const double l2 = v.squaredNorm() * grid.cell_volume();
  return std::sqrt(l2 + form_value(zero_form, v, v));
}

std::vector<LinearizeRow> linearize(const SemilinearModel& model, const DiscreteFunction& g,
                                    const std::vector<double>& eps_list) {
  for (std::size_t k = 1; k < eps_list.size(); ++k)
    if (!(eps_list[k] < eps_list[k - 1])) throw PreconditionError("linearize: eps list must be decreasing");
  const Grid& grid = model.grid();
  const LinearModel& lin = model.linear();
  const NonlocalForm zero = assemble_form(grid, lin.kernel(), MagneticPotential(grid), lin.form().meta());
  const DiscreteFunction P = lin.solve(g);
  std::vector<LinearizeRow> rows;
  for (double eps : eps_list) {
    if (!(eps > 0.0)) throw PreconditionError("linearize: eps must be positive");
    const DiscreteFunction Q = model.solve(eps * g).u;
    const DiscreteFunction v = Q / eps - P;
    LinearizeRow row;
    row.eps = eps;
    row.d = hs_proxy_norm(zero, grid, v);
    row.ratio = rows.empty() ? std::numeric_limits<double>::quiet_NaN() : rows.back().d / row.d;
    rows.push_back(row);
  }
  return rows;
}

void write_linearize_table(const std::filesystem::path& path, const std::vector<LinearizeRow>& rows) {
  CsvTable table;
  table.header = {"eps", "d", "ratio"};
  for (const auto& r : rows) table.rows.push_back({format_double(r.eps), format_double(r.d), format_double(r.ratio)});
  write_csv(path, table);
}

ReconstructionReport linearized_reconstruct(const SemilinearModel& unknown, const LinearModel& reference, double eps,
                                            const InverseSettings& settings, GroundTruth truth) {
  const DtnMatrix data = linearized_dtn_matrix(unknown, eps, settings.threads);
  ReconstructionReport rep = reconstruct(data, reference, &unknown.linear(), settings, truth);
  const Grid& grid = unknown.grid();
  DiscreteFunction g = DiscreteFunction::Zero(grid.size());
  for (int i : grid.nodes_in(Region::w1)) g(i) = 1.0;
  const auto rows = linearize(unknown, g, {eps});
  const NonlocalForm zero =
      assemble_form(grid, unknown.linear().kernel(), MagneticPotential(grid), unknown.linear().form().meta());
  const double base = hs_proxy_norm(zero, grid, unknown.linear().solve(g));
  rep.linearization_bias = base > 0.0 ? rows.front().d / base : rows.front().d;
  rep.linearization_eps = eps;
  return rep;
}

}  // namespace fracmag
