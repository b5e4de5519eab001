#include "fracmag/runge.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include "fracmag/errors.hpp"
#include "fracmag/io.hpp"

namespace fracmag {

RungeOperator::RungeOperator(const LinearModel& model, std::vector<int> window)
    : grid_size_(model.grid().size()), vol_(model.grid().cell_volume()), window_(std::move(window)) {
  if (window_.empty()) throw PreconditionError("Runge approximation needs a nonempty window");
  R_ = model.solver().solution_operator(window_);
  normal_ = vol_ * (R_.transpose() * R_);
}

RungeOperator::RungeOperator(const LinearModel& model, Region window)
    : RungeOperator(model, [&] {
        const auto nodes = model.grid().nodes_in(window);
        return std::vector<int>(nodes.begin(), nodes.end());
      }()) {}

const Eigen::LLT<Eigen::MatrixXd>& RungeOperator::factor(double alpha) const {
  std::lock_guard lock(*cache_mutex_);
  auto it = factors_.find(alpha);
  if (it != factors_.end()) return it->second;
  Eigen::MatrixXd system = normal_;
  system.diagonal().array() += alpha;
  Eigen::LLT<Eigen::MatrixXd> llt(system);
  if (llt.info() != Eigen::Success)
    throw NumericError("Runge normal equations are numerically singular at alpha = " + format_double(alpha) +
                       "; use a larger alpha");
  return factors_.emplace(alpha, std::move(llt)).first->second;
}

const Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd>& RungeOperator::pseudo_inverse() const {
  std::lock_guard lock(*cache_mutex_);
  if (!cod_) cod_ = std::make_unique<Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd>>(std::sqrt(vol_) * R_);
  return *cod_;
}

RungeResult RungeOperator::approximate(const Eigen::VectorXd& target, double alpha) const {
  if (target.size() != R_.rows()) throw PreconditionError("Runge target must be given on omega nodes");
  if (!(alpha >= 0.0)) throw PreconditionError("Runge alpha must be nonnegative");
  RungeResult out;
  out.alpha = alpha;
  if (alpha == 0.0) {
    out.coefficients = pseudo_inverse().solve(std::sqrt(vol_) * target);
  } else {
    out.coefficients = factor(alpha).solve(vol_ * (R_.transpose() * target));
  }
  if (!out.coefficients.allFinite()) throw NumericError("Runge solve produced non-finite coefficients");
  out.interior = R_ * out.coefficients;
  out.residual = std::sqrt(vol_) * (out.interior - target).norm();
  out.g_norm = out.coefficients.norm();
  return out;
}

RungeResult RungeOperator::approximate_auto(const Eigen::VectorXd& target, const RungeSettings& settings) const {
  if (settings.alphas.empty()) throw ConfigError("runge.alphas must not be empty");
  std::vector<double> alphas = settings.alphas;
  std::sort(alphas.begin(), alphas.end(), std::greater<>());
  RungeResult chosen = approximate(target, alphas.front());
  for (std::size_t k = 1; k < alphas.size(); ++k) {
    RungeResult trial = approximate(target, alphas[k]);
    if (trial.g_norm > settings.norm_cap) break;
    chosen = std::move(trial);
  }
  return chosen;
}

DiscreteFunction RungeOperator::exterior_data(const Eigen::VectorXd& coefficients) const {
  DiscreteFunction g = DiscreteFunction::Zero(grid_size_);
  for (std::size_t k = 0; k < window_.size(); ++k) g(window_[k]) = coefficients(static_cast<Eigen::Index>(k));
  return g;
}

Eigen::VectorXd cell_target(const Grid& grid, int omega_local) {
  const auto size = static_cast<Eigen::Index>(grid.nodes_in(Region::omega).size());
  Eigen::VectorXd phi = Eigen::VectorXd::Zero(size);
  phi(omega_local) = 1.0 / std::sqrt(grid.cell_volume());
  return phi;
}

std::vector<RungeRow> runge_table(const RungeOperator& op, const std::vector<std::string>& ids,
                                  const std::vector<Eigen::VectorXd>& targets, const std::vector<double>& alphas) {
  if (ids.size() != targets.size()) throw PreconditionError("runge_table: one id per target");
  std::vector<RungeRow> rows;
  for (std::size_t t = 0; t < targets.size(); ++t)
    for (double alpha : alphas) {
      const RungeResult r = op.approximate(targets[t], alpha);
      rows.push_back({ids[t], alpha, r.residual, r.g_norm});
    }
  return rows;
}

void write_runge_table(const std::filesystem::path& path, const std::vector<RungeRow>& rows) {
  CsvTable table;
  table.header = {"target", "alpha", "residual", "g_norm"};
  for (const auto& r : rows)
    table.rows.push_back({r.target, format_double(r.alpha), format_double(r.residual), format_double(r.g_norm)});
  write_csv(path, table);
}

}  // namespace fracmag
