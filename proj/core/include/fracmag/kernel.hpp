#pragma once

// Singular kernel K, the magnetic cosine factor R_A, and the integrals of K
// needed to truncate the nonlocal form to a finite box.

#include <optional>
#include <vector>

#include "fracmag/geometry.hpp"

namespace fracmag {

enum class KernelVariant { power, perturbed };

/// K(x, y) = c_{n,s} |x - y|^{-n-2s} m(x, y), with m = 1 for the power law and
/// m = 1 + beta exp(-|x - y|^2) for the perturbed variant.
struct KernelSpec {
  int n = 2;
  double s = 0.5;
  double normalization = 0.0;
  KernelVariant variant = KernelVariant::power;
  double beta = 0.0;

  double m_lo() const noexcept;
  double m_hi() const noexcept;
  /// m as a function of the squared distance.
  double multiplier(double dist2) const noexcept;
  /// K as a function of the squared distance (dist2 > 0 assumed).
  double at_distance2(double dist2) const noexcept;
};

/// 4^s Gamma(n/2 + s) / (pi^{n/2} |Gamma(-s)|): the constant for which
/// c * P.V. int (u(x) - u(y)) |x - y|^{-n-2s} dy is the fractional Laplacian.
double fractional_laplacian_constant(int n, double s);

/// Builds a spec; a missing normalization selects fractional_laplacian_constant.
/// Throws ConfigError for s outside (0,1) or beta outside (-1/2, 1/2).
KernelSpec make_kernel(int n, double s, KernelVariant variant = KernelVariant::power, double beta = 0.0,
                       std::optional<double> normalization = std::nullopt);

/// Area of the unit sphere S^{n-1} (2 for n = 1).
double unit_sphere_area(int n);

/// Throws DomainError when x == y.
double eval_K(const KernelSpec& spec, const Point& x, const Point& y);

/// Gridded magnetic potential. Values live on lattice nodes and vanish outside
/// omega; point sampling uses the nearest node (ties averaged).
class MagneticPotential {
 public:
  MagneticPotential() = default;
  /// Zero field on the grid.
  explicit MagneticPotential(const Grid& grid);
  /// Per-node vectors; every non-omega entry must be zero.
  MagneticPotential(const Grid& grid, std::vector<Vec> values);

  template <class Rule>
  static MagneticPotential sample(const Grid& grid, Rule&& rule) {
    std::vector<Vec> values(static_cast<std::size_t>(grid.size()), Vec{});
    for (int i : grid.nodes_in(Region::omega)) {
      Vec a = rule(grid.node(i));
      for (int d = grid.dimension(); d < 3; ++d) a[d] = 0.0;
      values[static_cast<std::size_t>(i)] = a;
    }
    return MagneticPotential(grid, std::move(values));
  }

  int dimension() const noexcept { return lattice_.n; }
  const Lattice& lattice() const noexcept { return lattice_; }
  const std::vector<Vec>& values() const noexcept { return values_; }
  const Vec& at(int node) const { return values_[static_cast<std::size_t>(node)]; }
  const SupportMask& support() const noexcept { return support_; }
  bool is_zero() const noexcept { return sup_norm_ == 0.0; }
  double sup_norm() const noexcept { return sup_norm_; }
  const Vec& component_sup() const noexcept { return component_sup_; }

  /// A at an arbitrary point (zero off the lattice).
  Vec sample_at(const Point& p) const;
  /// A at the midpoint of two lattice nodes.
  Vec sample_midpoint(const LatticeIndex& a, const LatticeIndex& b) const;

  MagneticPotential negated() const;

 private:
  Vec average(const std::vector<int>& cells) const;

  Lattice lattice_;
  std::vector<Vec> values_;
  SupportMask support_;
  double sup_norm_ = 0.0;
  Vec component_sup_{};
};

/// cos((x - y) . a); evaluated as cos(|.|) so that a and -a agree bitwise.
double cosine_factor(const Vec& diff, const Vec& a) noexcept;

/// R_A(x, y) = cos((x - y) . A((x + y)/2)).
double eval_RA(const MagneticPotential& A, const Point& x, const Point& y);

/// Electric potential: per-node values, zero outside omega, >= lower_bound on omega.
class ElectricPotential {
 public:
  ElectricPotential() = default;
  ElectricPotential(const Grid& grid, std::vector<double> values, double lower_bound);

  static ElectricPotential constant(const Grid& grid, double value, double lower_bound);

  template <class Rule>
  static ElectricPotential sample(const Grid& grid, Rule&& rule, double lower_bound) {
    std::vector<double> values(static_cast<std::size_t>(grid.size()), 0.0);
    for (int i : grid.nodes_in(Region::omega)) values[static_cast<std::size_t>(i)] = rule(grid.node(i));
    return ElectricPotential(grid, std::move(values), lower_bound);
  }

  const std::vector<double>& values() const noexcept { return values_; }
  double at(int node) const { return values_[static_cast<std::size_t>(node)]; }
  double lower_bound() const noexcept { return lower_bound_; }
  double sup_norm() const noexcept;

 private:
  std::vector<double> values_;
  double lower_bound_ = 0.0;
};

/// 2 int_{R^n \ box} K(x, y) dy for x strictly inside the box. Radial parts are
/// integrated in closed form; directions by adaptive Gauss-Legendre to rtol.
double tail_integral(const KernelSpec& spec, const Point& x, const AxisBox& box, double rtol = 1e-6);

/// 2 int_{|y - x| > R} K(x, y) dy.
double tail_outside_ball(const KernelSpec& spec, double radius);

/// 2 int_{cell} (1 - cos((y - x_i) . a)) K(x_i, y) dy over the cube of side h
/// centered at x_i, with a held constant (nearest-node sampling inside a cell).
double same_cell_integral(const KernelSpec& spec, const Vec& a, double h);

}  // namespace fracmag
