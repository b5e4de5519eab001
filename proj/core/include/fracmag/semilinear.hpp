#pragma once

// Semilinear exterior problem R^s_A u + a(x, u) = 0 in omega, u = g outside,
// its DtN map, and the first-order linearization in the data.

#include <filesystem>
#include <memory>
#include <vector>

#include "fracmag/dtn.hpp"
#include "fracmag/errors.hpp"
#include "fracmag/inverse.hpp"

namespace fracmag {

/// a(x, z) = sum_{k=1..K} a_k(x) z^k / k!, coefficients per node on omega.
class Nonlinearity {
 public:
  Nonlinearity() = default;
  /// coefficients[k - 1] holds a_k on every grid node (zero off omega).
  /// Throws PreconditionError unless a_1 >= lower_bound > 0 on omega.
  Nonlinearity(const Grid& grid, std::vector<std::vector<double>> coefficients, double lower_bound);
  /// Spatially constant coefficients a_1..a_K on omega.
  static Nonlinearity constant(const Grid& grid, const std::vector<double>& a, double lower_bound);

  int order() const noexcept { return static_cast<int>(coeffs_.size()); }
  double coefficient(int k, int node) const {
    return coeffs_[static_cast<std::size_t>(k - 1)][static_cast<std::size_t>(node)];
  }
  double lower_bound() const noexcept { return lower_bound_; }
  /// True when a_k = 0 for every k >= 2.
  bool is_linear() const noexcept;
  /// q = a_1 as an electric potential.
  ElectricPotential linear_part(const Grid& grid) const;

 private:
  std::vector<std::vector<double>> coeffs_;
  double lower_bound_ = 0.0;
};

double eval_a(const Nonlinearity& nl, int node, double z);
double eval_dz_a(const Nonlinearity& nl, int node, double z);

struct NewtonSettings {
  double rtol = 1e-10;
  int max_iterations = 50;
  int max_halvings = 6;
};

/// Newton failure that persisted under halving of the data.
class SmallnessExceeded : public NumericError {
 public:
  SmallnessExceeded(const std::string& what, double last_residual, double converged_scale)
      : NumericError(what), last_residual_(last_residual), converged_scale_(converged_scale) {}
  double last_residual() const noexcept { return last_residual_; }
  /// Largest tried fraction of g for which Newton converged (0 if none).
  double converged_scale() const noexcept { return converged_scale_; }

 private:
  double last_residual_;
  double converged_scale_;
};

struct SemilinearResult {
  DiscreteFunction u;
  int iterations = 0;
  /// Relative residual before each Newton step and after the last.
  std::vector<double> residual_history;
};

/// Forward model of the semilinear problem; owns the linear model with q = a_1.
class SemilinearModel {
 public:
  SemilinearModel(std::shared_ptr<const Grid> grid, KernelSpec kernel, MagneticPotential A, Nonlinearity nl,
                  QuadratureSettings quadrature = {}, SolverSettings solver = {}, NewtonSettings newton = {});
  SemilinearModel(std::shared_ptr<const Grid> grid, KernelSpec kernel, MagneticPotential A, Nonlinearity nl,
                  std::shared_ptr<const NonlocalForm> form, SolverSettings solver = {}, NewtonSettings newton = {});

  const LinearModel& linear() const noexcept { return linear_; }
  const Nonlinearity& nonlinearity() const noexcept { return nl_; }
  const Grid& grid() const noexcept { return linear_.grid(); }
  const NewtonSettings& newton() const noexcept { return newton_; }

  SemilinearResult solve(const DiscreteFunction& g) const;
  /// Interior residual (omega order) of the semilinear equations at u.
  Eigen::VectorXd residual(const DiscreteFunction& u) const;
  /// Newton Jacobian at u (omega x omega).
  Eigen::MatrixXd jacobian(const DiscreteFunction& u) const;

 private:
  void check_smallness() const;
  bool newton(const Eigen::VectorXd& rhs, Eigen::VectorXd& x, SemilinearResult& log) const;

  Nonlinearity nl_;
  LinearModel linear_;
  NewtonSettings newton_;
  /// B_{omega,omega} + diag(tail) without any q.
  Eigen::MatrixXd interior_form_;
};

SemilinearResult solve_semilinear(const SemilinearModel& model, const DiscreteFunction& g);

/// Pointwise DtN of the semilinear solution at every W2 node (W2 order).
Eigen::VectorXd semilinear_dtn(const SemilinearModel& model, const DiscreteFunction& g);

/// entries(j, i) = vol * semilinear_dtn(eps e_i)(x_j) / eps: the linearized
/// estimate of the linear DtN matrix, in the DtnMatrix layout.
DtnMatrix linearized_dtn_matrix(const SemilinearModel& model, double eps, int threads = 0);

struct LinearizeRow {
  double eps = 0.0;
  double d = 0.0;
  /// d(previous eps) / d(eps); NaN on the first row.
  double ratio = 0.0;
};

/// d(eps) = || Q(eps g)/eps - P_{A,a1} g || in the norm ||v||^2 = ||v||^2_L2 + B0[v, v].
std::vector<LinearizeRow> linearize(const SemilinearModel& model, const DiscreteFunction& g,
                                    const std::vector<double>& eps_list);
void write_linearize_table(const std::filesystem::path& path, const std::vector<LinearizeRow>& rows);

/// H^s proxy norm against the A = 0 form of the grid.
double hs_proxy_norm(const NonlocalForm& zero_form, const Grid& grid, const DiscreteFunction& v);

/// Linearized DtN data -> inverse.reconstruct. In verification mode the
/// unknown model's linear part supplies the side-1 Runge data. The report's
/// linearization bias is d(eps) / ||P g|| for g the sum of W1 indicators.
ReconstructionReport linearized_reconstruct(const SemilinearModel& unknown, const LinearModel& reference, double eps,
                                            const InverseSettings& settings, GroundTruth truth = {});

}  // namespace fracmag
