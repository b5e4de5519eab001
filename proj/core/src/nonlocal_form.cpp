#include "fracmag/nonlocal_form.hpp"

#include <cmath>
#include <cstdint>
#include <istream>
#include <ostream>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "fracmag/errors.hpp"
#include "fracmag/parallel.hpp"

namespace fracmag {

bool lattice_adjacent(const LatticeIndex& a, const LatticeIndex& b) noexcept {
  for (int d = 0; d < 3; ++d)
    if (std::abs(a[d] - b[d]) > 1) return false;
  return true;
}

PairWeight pair_weight(const Grid& grid, const KernelSpec& spec, const MagneticPotential& A, int i, int j,
                       bool subcell_refinement) {
  const Point& x = grid.node(i);
  const Point& y = grid.node(j);
  const int n = grid.dimension();
  if (!subcell_refinement || !lattice_adjacent(grid.index(i), grid.index(j))) {
    const double d2 = distance2(x, y);
    if (d2 == 0.0) throw NumericError("assembly: two grid nodes share a position");
    const double k = spec.at_distance2(d2);
    const Vec diff{x[0] - y[0], x[1] - y[1], x[2] - y[2]};
    const double r = cosine_factor(diff, A.sample_midpoint(grid.index(i), grid.index(j)));
    return {k, r * k};
  }

  // 2^n x 2^n sub-pair midpoint rule on the cell halves.
  const double q = 0.25 * grid.spacing();
  const int subcells = 1 << n;
  auto offset = [&](int code) {
    Vec o{};
    for (int d = 0; d < n; ++d) o[d] = (code >> d & 1) ? q : -q;
    return o;
  };
  PairWeight out;
  for (int a = 0; a < subcells; ++a) {
    const Vec oa = offset(a);
    const Point xs{x[0] + oa[0], x[1] + oa[1], x[2] + oa[2]};
    for (int b = 0; b < subcells; ++b) {
      const Vec ob = offset(b);
      const Point ys{y[0] + ob[0], y[1] + ob[1], y[2] + ob[2]};
      const double k = spec.at_distance2(distance2(xs, ys));
      const Vec diff{xs[0] - ys[0], xs[1] - ys[1], xs[2] - ys[2]};
      out.k += k;
      out.rk += cosine_factor(diff, A.sample_at(midpoint(xs, ys))) * k;
    }
  }
  const double inv = 1.0 / static_cast<double>(subcells * subcells);
  out.k *= inv;
  out.rk *= inv;
  return out;
}

Eigen::MatrixXd NonlocalForm::full() const {
  Eigen::MatrixXd out = pairs_;
  out.diagonal() += tail_;
  return out;
}

NonlocalForm assemble_form(const Grid& grid, const KernelSpec& spec, const MagneticPotential& A,
                           const QuadratureSettings& settings) {
  if (spec.n != grid.dimension()) throw PreconditionError("assemble_form: kernel and grid dimensions differ");
  if (A.lattice().size() != grid.size()) throw PreconditionError("assemble_form: potential lives on another grid");
  const int N = grid.size();
  const double vol = grid.cell_volume();
  const double w = 2.0 * vol * vol;
  Eigen::MatrixXd B = Eigen::MatrixXd::Zero(N, N);

  // Upper triangle: -2 vol^2 R K. Lower triangle (scratch): 2 vol^2 K.
  parallel_for(0, N, settings.threads, [&](int i) {
    for (int j = i + 1; j < N; ++j) {
      const PairWeight pw = pair_weight(grid, spec, A, i, j, settings.subcell_refinement);
      B(i, j) = -w * pw.rk;
      B(j, i) = w * pw.k;
    }
  });

  Eigen::VectorXd diag(N);
  parallel_for(0, N, settings.threads, [&](int i) {
    double acc = 0.0;
    for (int j = 0; j < i; ++j) acc += B(i, j);
    for (int j = i + 1; j < N; ++j) acc += B(j, i);
    diag(i) = acc;
  });

  const double h = grid.spacing();
  parallel_for(0, N, settings.threads, [&](int i) {
    for (int j = i + 1; j < N; ++j) B(j, i) = B(i, j);
    double self = 0.0;
    if (A.support()[static_cast<std::size_t>(i)]) self = vol * same_cell_integral(spec, A.at(i), h);
    B(i, i) = diag(i) + self;
  });

  const Lattice& lat = grid.lattice();
  AxisBox box;
  for (int d = 0; d < grid.dimension(); ++d) {
    box.lo[d] = lat.lo[d];
    box.hi[d] = lat.lo[d] + lat.counts[d] * h;
  }
  Eigen::VectorXd tail(N);
  parallel_for(0, N, settings.threads,
               [&](int i) { tail(i) = vol * tail_integral(spec, grid.node(i), box, settings.tail_rtol); });

  return NonlocalForm(grid.dimension(), spec.s, std::move(B), std::move(tail), settings);
}

double form_value(const NonlocalForm& form, const DiscreteFunction& u, const DiscreteFunction& v) {
  const int N = form.size();
  if (u.size() != N || v.size() != N) throw PreconditionError("form_value: dimension mismatch");
  std::vector<int> support;
  for (int i = 0; i < N; ++i)
    if (u(i) != 0.0 || v(i) != 0.0) support.push_back(i);
  const auto& B = form.pairs();
  const auto& tail = form.tail();
  double total = 0.0;
  for (std::size_t a = 0; a < support.size(); ++a) {
    const int i = support[a];
    double acc = (B(i, i) + tail(i)) * (u(i) * v(i));
    for (std::size_t b = 0; b < a; ++b) {
      const int j = support[b];
      acc += B(j, i) * (u(i) * v(j) + u(j) * v(i));
    }
    total += acc;
  }
  return total;
}

void write_form_binary(const NonlocalForm& form, std::ostream& out) {
  const std::int64_t n = form.dimension();
  const double s = form.s();
  const std::int64_t count = form.size();
  out.write(reinterpret_cast<const char*>(&n), sizeof n);
  out.write(reinterpret_cast<const char*>(&s), sizeof s);
  out.write(reinterpret_cast<const char*>(&count), sizeof count);
  const Eigen::MatrixXd full = form.full();
  for (Eigen::Index i = 0; i < full.rows(); ++i)
    for (Eigen::Index j = 0; j < full.cols(); ++j) {
      const double value = full(i, j);
      out.write(reinterpret_cast<const char*>(&value), sizeof value);
    }
  if (!out) throw NumericError("write_form_binary: stream failure");
}

Eigen::MatrixXd read_form_binary(std::istream& in, int& n, double& s) {
  std::int64_t dim = 0, count = 0;
  in.read(reinterpret_cast<char*>(&dim), sizeof dim);
  in.read(reinterpret_cast<char*>(&s), sizeof s);
  in.read(reinterpret_cast<char*>(&count), sizeof count);
  if (!in || count < 0) throw ConfigError("read_form_binary: truncated header");
  n = static_cast<int>(dim);
  Eigen::MatrixXd out(count, count);
  for (Eigen::Index i = 0; i < count; ++i)
    for (Eigen::Index j = 0; j < count; ++j) in.read(reinterpret_cast<char*>(&out(i, j)), sizeof(double));
  if (!in) throw ConfigError("read_form_binary: truncated matrix");
  return out;
}

CgResult conjugate_gradient(const Eigen::MatrixXd& A, const Eigen::VectorXd& b, Eigen::VectorXd& x, double rtol,
                            int max_iterations) {
  CgResult result;
  const double bnorm = b.norm();
  if (bnorm == 0.0) {
    x.setZero();
    result.converged = true;
    return result;
  }
  Eigen::VectorXd r = b - A * x;
  Eigen::VectorXd p = r;
  double rr = r.squaredNorm();
  while (result.iterations < max_iterations) {
    if (std::sqrt(rr) <= rtol * bnorm) {
      result.converged = true;
      break;
    }
    const Eigen::VectorXd Ap = A * p;
    const double alpha = rr / p.dot(Ap);
    x += alpha * p;
    r -= alpha * Ap;
    const double rr_new = r.squaredNorm();
    p = r + (rr_new / rr) * p;
    rr = rr_new;
    ++result.iterations;
  }
  result.relative_residual = (b - A * x).norm() / bnorm;
  result.converged = result.relative_residual <= rtol;
  return result;
}

ExteriorSolver::ExteriorSolver(const Grid& grid, const NonlocalForm& form, const ElectricPotential& q,
                               SolverSettings settings)
    : omega_(grid.nodes_in(Region::omega)), form_(&form), settings_(settings) {
  if (form.size() != grid.size()) throw PreconditionError("ExteriorSolver: form and grid sizes differ");
  if (q.values().size() != static_cast<std::size_t>(grid.size()))
    throw PreconditionError("ExteriorSolver: electric potential lives on another grid");
  const double vol = grid.cell_volume();
  const auto m = static_cast<Eigen::Index>(omega_.size());
  interior_.resize(m, m);
  for (Eigen::Index b = 0; b < m; ++b)
    for (Eigen::Index a = 0; a < m; ++a) interior_(a, b) = form.pairs()(omega_[a], omega_[b]);
  for (Eigen::Index a = 0; a < m; ++a) {
    const int i = omega_[static_cast<std::size_t>(a)];
    if (q.at(i) < q.lower_bound()) throw PreconditionError("ExteriorSolver: q below its lower bound");
    interior_(a, a) += form.tail()(i) + q.at(i) * vol;
  }
  if (settings_.kind == LinearSolverKind::cholesky) {
    llt_.compute(interior_);
    if (llt_.info() != Eigen::Success)
      throw NumericError("ExteriorSolver: interior system is not numerically positive definite");
  }
}

Eigen::VectorXd ExteriorSolver::interior_rhs(const DiscreteFunction& g) const {
  const auto& B = form_->pairs();
  const auto m = static_cast<Eigen::Index>(omega_.size());
  if (g.size() != B.rows()) throw PreconditionError("exterior data: dimension mismatch");
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(m);
  std::vector<bool> in_omega(static_cast<std::size_t>(g.size()), false);
  for (int i : omega_) in_omega[static_cast<std::size_t>(i)] = true;
  for (Eigen::Index j = 0; j < g.size(); ++j) {
    if (g(j) == 0.0) continue;
    if (in_omega[static_cast<std::size_t>(j)]) throw PreconditionError("exterior data g must vanish on omega");
    for (Eigen::Index a = 0; a < m; ++a) rhs(a) -= B(omega_[a], j) * g(j);
  }
  return rhs;
}

Eigen::VectorXd ExteriorSolver::solve_one(const Eigen::VectorXd& rhs) const {
  const double bnorm = rhs.norm();
  if (bnorm == 0.0) return Eigen::VectorXd::Zero(rhs.size());
  Eigen::VectorXd x;
  if (settings_.kind == LinearSolverKind::cholesky) {
    x = llt_.solve(rhs);
  } else {
    x = Eigen::VectorXd::Zero(rhs.size());
    const CgResult cg = conjugate_gradient(interior_, rhs, x, settings_.rtol, settings_.max_iterations);
    if (!cg.converged) {
      std::ostringstream msg;
      msg << "conjugate gradients did not converge: relative residual " << cg.relative_residual << " after "
          << cg.iterations << " iterations";
      throw NumericError(msg.str());
    }
  }
  const double res = (interior_ * x - rhs).norm() / bnorm;
  if (!(res <= settings_.rtol)) {
    std::ostringstream msg;
    msg << "exterior solve: relative residual " << res << " exceeds tolerance " << settings_.rtol;
    throw NumericError(msg.str());
  }
  return x;
}

DiscreteFunction ExteriorSolver::solve(const DiscreteFunction& g) const {
  const Eigen::VectorXd interior = solve_one(interior_rhs(g));
  DiscreteFunction u = g;
  for (std::size_t a = 0; a < omega_.size(); ++a) u(omega_[a]) = interior(static_cast<Eigen::Index>(a));
  return u;
}

Eigen::MatrixXd ExteriorSolver::solve_interior(const Eigen::MatrixXd& rhs) const {
  Eigen::MatrixXd out(rhs.rows(), rhs.cols());
  if (settings_.kind == LinearSolverKind::cholesky) {
    out = llt_.solve(rhs);
    for (Eigen::Index c = 0; c < rhs.cols(); ++c) {
      const double bnorm = rhs.col(c).norm();
      if (bnorm == 0.0) continue;
      const double res = (interior_ * out.col(c) - rhs.col(c)).norm() / bnorm;
      if (!(res <= settings_.rtol)) {
        std::ostringstream msg;
        msg << "exterior solve: relative residual " << res << " exceeds tolerance " << settings_.rtol;
        throw NumericError(msg.str());
      }
    }
    return out;
  }
  for (Eigen::Index c = 0; c < rhs.cols(); ++c) out.col(c) = solve_one(rhs.col(c));
  return out;
}

Eigen::MatrixXd ExteriorSolver::solution_operator(std::span<const int> window) const {
  const auto& B = form_->pairs();
  const auto m = static_cast<Eigen::Index>(omega_.size());
  Eigen::MatrixXd rhs(m, static_cast<Eigen::Index>(window.size()));
  for (std::size_t c = 0; c < window.size(); ++c)
    for (Eigen::Index a = 0; a < m; ++a) rhs(a, static_cast<Eigen::Index>(c)) = -B(omega_[a], window[c]);
  return solve_interior(rhs);
}

double ExteriorSolver::condition_number() const {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(interior_, Eigen::EigenvaluesOnly);
  const auto& ev = eig.eigenvalues();
  return ev(ev.size() - 1) / ev(0);
}

LinearModel::LinearModel(std::shared_ptr<const Grid> grid, KernelSpec kernel, MagneticPotential A,
                         ElectricPotential q, QuadratureSettings quadrature, SolverSettings solver)
    : grid_(std::move(grid)), kernel_(kernel), A_(std::move(A)), q_(std::move(q)) {
  form_ = std::make_shared<const NonlocalForm>(assemble_form(*grid_, kernel_, A_, quadrature));
  solver_ = std::make_unique<ExteriorSolver>(*grid_, *form_, q_, solver);
}

LinearModel::LinearModel(std::shared_ptr<const Grid> grid, KernelSpec kernel, MagneticPotential A,
                         ElectricPotential q, std::shared_ptr<const NonlocalForm> form, SolverSettings solver)
    : grid_(std::move(grid)), kernel_(kernel), A_(std::move(A)), q_(std::move(q)), form_(std::move(form)) {
  solver_ = std::make_unique<ExteriorSolver>(*grid_, *form_, q_, solver);
}

DiscreteFunction solve_exterior(const Grid& grid, const NonlocalForm& form, const ElectricPotential& q,
                                const DiscreteFunction& g, SolverSettings settings) {
  return ExteriorSolver(grid, form, q, settings).solve(g);
}

DiscreteFunction restrict_to(const Grid& grid, const DiscreteFunction& f, Region region) {
  DiscreteFunction out = DiscreteFunction::Zero(f.size());
  for (int i : grid.nodes_in(region)) out(i) = f(i);
  return out;
}

double l2_norm_omega(const Grid& grid, const DiscreteFunction& v) {
  double acc = 0.0;
  for (int i : grid.nodes_in(Region::omega)) acc += v(i) * v(i);
  return std::sqrt(acc * grid.cell_volume());
}

}  // namespace fracmag
