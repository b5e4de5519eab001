#pragma once

// Discrete bilinear form of the fractional magnetic Schroedinger operator and
// the linear exterior Dirichlet problem.
//
// For distinct cells i, j the pair rule contributes 2 vol^2 K_ij to the
// diagonal entries (i,i), (j,j) and -2 vol^2 R_ij K_ij to (i,j), (j,i); each
// diagonal also receives vol * 2 int_cell (1 - R_A) K (same-cell term) and,
// separately stored, vol * 2 int_{outside box} K (tail).

#include <iosfwd>
#include <memory>
#include <span>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include "fracmag/geometry.hpp"
#include "fracmag/kernel.hpp"

namespace fracmag {

/// Per-node values over all grid nodes (u, v, g, h ...).
using DiscreteFunction = Eigen::VectorXd;

struct QuadratureSettings {
  /// Split lattice-adjacent cell pairs into 2^n x 2^n sub-pairs.
  bool subcell_refinement = false;
  double tail_rtol = 1e-6;
  /// Worker threads for assembly; 0 selects hardware concurrency.
  int threads = 0;
};

/// Symmetrized pair weights for two distinct cells: mean K and mean R*K.
struct PairWeight {
  double k = 0.0;
  double rk = 0.0;
};

bool lattice_adjacent(const LatticeIndex& a, const LatticeIndex& b) noexcept;

/// Pair quadrature shared by assembly and by the direct double sums that the
/// inverse module uses as an independent route.
PairWeight pair_weight(const Grid& grid, const KernelSpec& spec, const MagneticPotential& A, int i, int j,
                       bool subcell_refinement);

class NonlocalForm {
 public:
  NonlocalForm(int n, double s, Eigen::MatrixXd pairs, Eigen::VectorXd tail, QuadratureSettings meta)
      : n_(n), s_(s), pairs_(std::move(pairs)), tail_(std::move(tail)), meta_(meta) {}

  int dimension() const noexcept { return n_; }
  double s() const noexcept { return s_; }
  int size() const noexcept { return static_cast<int>(tail_.size()); }
  /// Pair + same-cell matrix B (without the tail diagonal).
  const Eigen::MatrixXd& pairs() const noexcept { return pairs_; }
  /// vol * tail_integral per node.
  const Eigen::VectorXd& tail() const noexcept { return tail_; }
  const QuadratureSettings& meta() const noexcept { return meta_; }

  /// B + diag(tail).
  Eigen::MatrixXd full() const;

 private:
  int n_;
  double s_;
  Eigen::MatrixXd pairs_;
  Eigen::VectorXd tail_;
  QuadratureSettings meta_;
};

NonlocalForm assemble_form(const Grid& grid, const KernelSpec& spec, const MagneticPotential& A,
                           const QuadratureSettings& settings = {});

/// u^T (B + diag(tail)) v, evaluated so that swapping u and v is bitwise exact.
double form_value(const NonlocalForm& form, const DiscreteFunction& u, const DiscreteFunction& v);

/// Binary dump: int64 n, float64 s, int64 node count, then B + diag(tail)
/// row-major as float64 (host byte order, little-endian on supported targets).
void write_form_binary(const NonlocalForm& form, std::ostream& out);
Eigen::MatrixXd read_form_binary(std::istream& in, int& n, double& s);

enum class LinearSolverKind { cholesky, conjugate_gradient };

struct SolverSettings {
  LinearSolverKind kind = LinearSolverKind::cholesky;
  double rtol = 1e-10;
  int max_iterations = 10000;
};

/// Factorized interior system of (R^s_A + q) u = 0 in omega, u = g outside.
class ExteriorSolver {
 public:
  ExteriorSolver(const Grid& grid, const NonlocalForm& form, const ElectricPotential& q,
                 SolverSettings settings = {});

  /// Full-grid solution with u = g off omega.
  DiscreteFunction solve(const DiscreteFunction& g) const;
  /// Interior values (omega order) for several exterior data at once.
  Eigen::MatrixXd solve_interior(const Eigen::MatrixXd& rhs) const;
  /// Columns P e_w restricted to omega, for each node w of the window.
  Eigen::MatrixXd solution_operator(std::span<const int> window) const;
  /// -B_{omega, ext} g restricted to omega.
  Eigen::VectorXd interior_rhs(const DiscreteFunction& g) const;

  /// B_{omega,omega} + diag(tail + q vol).
  const Eigen::MatrixXd& interior_matrix() const noexcept { return interior_; }
  /// 2-norm condition number of the interior matrix (reported, never asserted).
  double condition_number() const;
  const SolverSettings& settings() const noexcept { return settings_; }

 private:
  Eigen::VectorXd solve_one(const Eigen::VectorXd& rhs) const;

  std::span<const int> omega_;
  const NonlocalForm* form_;
  Eigen::MatrixXd interior_;
  Eigen::LLT<Eigen::MatrixXd> llt_;
  SolverSettings settings_;
};

/// Conjugate gradients on a dense SPD matrix; returns iterations used and
/// writes the solution into x (initial guess on entry).
struct CgResult {
  int iterations = 0;
  double relative_residual = 0.0;
  bool converged = false;
};
CgResult conjugate_gradient(const Eigen::MatrixXd& A, const Eigen::VectorXd& b, Eigen::VectorXd& x, double rtol,
                            int max_iterations);

/// Forward model: grid, kernel, potentials, assembled form and factorized solver.
class LinearModel {
 public:
  LinearModel(std::shared_ptr<const Grid> grid, KernelSpec kernel, MagneticPotential A, ElectricPotential q,
              QuadratureSettings quadrature = {}, SolverSettings solver = {});
  /// Reuses an already assembled form (the form depends on A only).
  LinearModel(std::shared_ptr<const Grid> grid, KernelSpec kernel, MagneticPotential A, ElectricPotential q,
              std::shared_ptr<const NonlocalForm> form, SolverSettings solver = {});

  const Grid& grid() const noexcept { return *grid_; }
  std::shared_ptr<const Grid> grid_ptr() const noexcept { return grid_; }
  const KernelSpec& kernel() const noexcept { return kernel_; }
  const MagneticPotential& magnetic() const noexcept { return A_; }
  const ElectricPotential& electric() const noexcept { return q_; }
  const NonlocalForm& form() const noexcept { return *form_; }
  std::shared_ptr<const NonlocalForm> form_ptr() const noexcept { return form_; }
  const ExteriorSolver& solver() const noexcept { return *solver_; }

  DiscreteFunction solve(const DiscreteFunction& g) const { return solver_->solve(g); }

 private:
  std::shared_ptr<const Grid> grid_;
  KernelSpec kernel_;
  MagneticPotential A_;
  ElectricPotential q_;
  std::shared_ptr<const NonlocalForm> form_;
  std::unique_ptr<ExteriorSolver> solver_;
};

/// Convenience wrapper: assemble-free single solve.
DiscreteFunction solve_exterior(const Grid& grid, const NonlocalForm& form, const ElectricPotential& q,
                                const DiscreteFunction& g, SolverSettings settings = {});

/// Zero a vector on the given region.
DiscreteFunction restrict_to(const Grid& grid, const DiscreteFunction& f, Region region);

/// sqrt(sum_omega v^2 vol).
double l2_norm_omega(const Grid& grid, const DiscreteFunction& v);

}  // namespace fracmag
