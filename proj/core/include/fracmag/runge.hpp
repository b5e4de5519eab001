#pragma once

// Constructive Runge approximation: exterior data supported in one window
// whose solution restricted to omega approximates a target in L2(omega).

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/QR>

#include "fracmag/nonlocal_form.hpp"

namespace fracmag {

struct RungeSettings {
  std::vector<double> alphas{1e-2, 1e-4, 1e-6, 1e-8};
  /// Cap on ||c||_2 used by the automatic alpha choice.
  double norm_cap = 1e6;
};

struct RungeResult {
  /// Coefficients over the window nodes (window order).
  Eigen::VectorXd coefficients;
  /// Interior values P g restricted to omega (omega order).
  Eigen::VectorXd interior;
  double alpha = 0.0;
  /// ||P g - phi||_{L2(omega)}.
  double residual = 0.0;
  double g_norm = 0.0;
};

/// Solution-operator matrix R (|omega| x |window|) for one model and one
/// window, with cached normal-equation factorizations per alpha.
class RungeOperator {
 public:
  RungeOperator(const LinearModel& model, std::vector<int> window);
  RungeOperator(const LinearModel& model, Region window);

  const std::vector<int>& window() const noexcept { return window_; }
  const Eigen::MatrixXd& matrix() const noexcept { return R_; }
  int omega_size() const noexcept { return static_cast<int>(R_.rows()); }

  /// Minimizes ||R c - phi||^2_{L2(omega)} + alpha ||c||^2; alpha = 0 uses a
  /// complete orthogonal decomposition (minimum-norm least squares).
  RungeResult approximate(const Eigen::VectorXd& target, double alpha) const;
  /// Smallest scheduled alpha whose solution norm is within the cap; falls
  /// back to the largest alpha when none qualifies.
  RungeResult approximate_auto(const Eigen::VectorXd& target, const RungeSettings& settings) const;

  /// Exterior data on the full grid for the given coefficients.
  DiscreteFunction exterior_data(const Eigen::VectorXd& coefficients) const;

 private:
  const Eigen::LLT<Eigen::MatrixXd>& factor(double alpha) const;
  const Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd>& pseudo_inverse() const;

  int grid_size_;
  double vol_;
  std::vector<int> window_;
  Eigen::MatrixXd R_;
  Eigen::MatrixXd normal_;
  mutable std::map<double, Eigen::LLT<Eigen::MatrixXd>> factors_;
  mutable std::unique_ptr<Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd>> cod_;
  std::unique_ptr<std::mutex> cache_mutex_ = std::make_unique<std::mutex>();
};

/// Normalized indicator of one omega cell in omega order (unit L2 norm).
Eigen::VectorXd cell_target(const Grid& grid, int omega_local);

struct RungeRow {
  std::string target;
  double alpha = 0.0;
  double residual = 0.0;
  double g_norm = 0.0;
};

std::vector<RungeRow> runge_table(const RungeOperator& op, const std::vector<std::string>& ids,
                                  const std::vector<Eigen::VectorXd>& targets, const std::vector<double>& alphas);
void write_runge_table(const std::filesystem::path& path, const std::vector<RungeRow>& rows);

}  // namespace fracmag
