#include "fracmag/kernel.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include "fracmag/errors.hpp"

namespace fracmag {

double KernelSpec::m_lo() const noexcept {
  return variant == KernelVariant::perturbed ? std::min(1.0, 1.0 + beta) : 1.0;
}

double KernelSpec::m_hi() const noexcept {
  return variant == KernelVariant::perturbed ? std::max(1.0, 1.0 + beta) : 1.0;
}

double KernelSpec::multiplier(double dist2) const noexcept {
  return variant == KernelVariant::perturbed ? 1.0 + beta * std::exp(-dist2) : 1.0;
}

double KernelSpec::at_distance2(double dist2) const noexcept {
  return normalization * std::pow(dist2, -0.5 * (n + 2.0 * s)) * multiplier(dist2);
}

double fractional_laplacian_constant(int n, double s) {
  if (!(s > 0.0 && s < 1.0)) throw ConfigError("fractional power s must lie in (0, 1)");
  using std::numbers::pi;
  return std::pow(4.0, s) * std::tgamma(0.5 * n + s) / (std::pow(pi, 0.5 * n) * std::abs(std::tgamma(-s)));
}

KernelSpec make_kernel(int n, double s, KernelVariant variant, double beta, std::optional<double> normalization) {
  if (n < 1 || n > 3) throw ConfigError("kernel: dimension must be 1, 2 or 3");
  KernelSpec spec;
  spec.n = n;
  spec.s = s;
  spec.variant = variant;
  spec.normalization = normalization ? *normalization : fractional_laplacian_constant(n, s);
  if (!(spec.normalization > 0.0)) throw ConfigError("kernel: normalization must be positive");
  if (variant == KernelVariant::perturbed) {
    if (!(beta > -0.5 && beta < 0.5)) throw ConfigError("kernel: perturbation beta must lie in (-1/2, 1/2)");
    spec.beta = beta;
  }
  if (!(s > 0.0 && s < 1.0)) throw ConfigError("kernel: fractional power s must lie in (0, 1)");
  return spec;
}

double unit_sphere_area(int n) {
  return 2.0 * std::pow(std::numbers::pi, 0.5 * n) / std::tgamma(0.5 * n);
}

double eval_K(const KernelSpec& spec, const Point& x, const Point& y) {
  const double d2 = distance2(x, y);
  if (d2 == 0.0) throw DomainError("eval_K: kernel is singular on the diagonal x = y");
  return spec.at_distance2(d2);
}

MagneticPotential::MagneticPotential(const Grid& grid)
    : MagneticPotential(grid, std::vector<Vec>(static_cast<std::size_t>(grid.size()), Vec{})) {}

MagneticPotential::MagneticPotential(const Grid& grid, std::vector<Vec> values)
    : lattice_(grid.lattice()), values_(std::move(values)) {
  if (values_.size() != static_cast<std::size_t>(grid.size()))
    throw PreconditionError("magnetic potential: one vector per grid node required");
  support_.assign(values_.size(), false);
  for (int i = 0; i < grid.size(); ++i) {
    const Vec& a = values_[static_cast<std::size_t>(i)];
    for (int d = 0; d < 3; ++d)
      if (!std::isfinite(a[d])) throw PreconditionError("magnetic potential: non-finite value");
    const bool nonzero = a[0] != 0.0 || a[1] != 0.0 || a[2] != 0.0;
    if (!nonzero) continue;
    if (grid.region(i) != Region::omega) throw PreconditionError("magnetic potential: supp A must lie in omega");
    for (int d = grid.dimension(); d < 3; ++d)
      if (a[d] != 0.0) throw PreconditionError("magnetic potential: component beyond the dimension");
    support_[static_cast<std::size_t>(i)] = true;
    sup_norm_ = std::max(sup_norm_, norm(a));
    for (int d = 0; d < 3; ++d) component_sup_[d] = std::max(component_sup_[d], std::abs(a[d]));
  }
}

Vec MagneticPotential::average(const std::vector<int>& cells) const {
  Vec out{};
  if (cells.empty()) return out;
  for (int c : cells) {
    const Vec& a = values_[static_cast<std::size_t>(c)];
    for (int d = 0; d < 3; ++d) out[d] += a[d];
  }
  if (cells.size() > 1) {
    const double inv = 1.0 / static_cast<double>(cells.size());
    for (double& v : out) v *= inv;
  }
  return out;
}

Vec MagneticPotential::sample_at(const Point& p) const {
  if (sup_norm_ == 0.0) return {};
  thread_local std::vector<int> cells;
  lattice_.nearest_nodes(p, cells);
  return average(cells);
}

Vec MagneticPotential::sample_midpoint(const LatticeIndex& a, const LatticeIndex& b) const {
  if (sup_norm_ == 0.0) return {};
  thread_local std::vector<int> cells;
  lattice_.midpoint_nodes(a, b, cells);
  return average(cells);
}

MagneticPotential MagneticPotential::negated() const {
  MagneticPotential out = *this;
  for (auto& a : out.values_)
    for (double& v : a) v = -v;
  return out;
}

double cosine_factor(const Vec& diff, const Vec& a) noexcept { return std::cos(std::abs(dot(diff, a))); }

double eval_RA(const MagneticPotential& A, const Point& x, const Point& y) {
  const Vec diff{x[0] - y[0], x[1] - y[1], x[2] - y[2]};
  return cosine_factor(diff, A.sample_at(midpoint(x, y)));
}

ElectricPotential::ElectricPotential(const Grid& grid, std::vector<double> values, double lower_bound)
    : values_(std::move(values)), lower_bound_(lower_bound) {
  if (values_.size() != static_cast<std::size_t>(grid.size()))
    throw PreconditionError("electric potential: one value per grid node required");
  if (!(lower_bound_ > 0.0)) throw PreconditionError("electric potential: lower bound c must be positive");
  for (int i = 0; i < grid.size(); ++i) {
    const double q = values_[static_cast<std::size_t>(i)];
    if (grid.region(i) != Region::omega) {
      if (q != 0.0) throw PreconditionError("electric potential: q must vanish outside omega");
      continue;
    }
    if (!(q >= lower_bound_)) {
      std::ostringstream msg;
      msg << "electric potential: q = " << q << " below the lower bound c = " << lower_bound_ << " at node " << i;
      throw PreconditionError(msg.str());
    }
  }
}

ElectricPotential ElectricPotential::constant(const Grid& grid, double value, double lower_bound) {
  return sample(grid, [value](const Point&) { return value; }, lower_bound);
}

double ElectricPotential::sup_norm() const noexcept {
  double out = 0.0;
  for (double q : values_) out = std::max(out, std::abs(q));
  return out;
}

namespace {

using Gauss = boost::math::quadrature::gauss<double, 20>;

template <class F>
double adaptive(const F& f, double a, double b, double rtol, int depth = 0) {
  const double whole = Gauss::integrate(f, a, b);
  const double mid = 0.5 * (a + b);
  const double halves = Gauss::integrate(f, a, mid) + Gauss::integrate(f, mid, b);
  if (depth >= 24 || std::abs(whole - halves) <= rtol * std::abs(halves) || halves == 0.0) return halves;
  return adaptive(f, a, mid, rtol, depth + 1) + adaptive(f, mid, b, rtol, depth + 1);
}

// Integrates f(direction, rho) over the unit sphere, where rho is the distance
// from the origin to the boundary of the box [lo_rel, hi_rel] (lo_rel < 0 <
// hi_rel componentwise) along the direction. Each face is parameterized by
// polar angles about its foot point so that every piece is smooth.
template <class F>
double integrate_over_directions(int n, const Vec& lo_rel, const Vec& hi_rel, const F& f, double rtol) {
  if (n == 1) {
    return f(Vec{1.0, 0.0, 0.0}, hi_rel[0]) + f(Vec{-1.0, 0.0, 0.0}, -lo_rel[0]);
  }
  double total = 0.0;
  for (int d = 0; d < n; ++d) {
    for (int side : {-1, 1}) {
      const double dist = side > 0 ? hi_rel[d] : -lo_rel[d];
      if (n == 2) {
        const int e = 1 - d;
        auto g = [&](double phi) {
          Vec dir{};
          dir[d] = side * std::cos(phi);
          dir[e] = std::sin(phi);
          return f(dir, dist / std::cos(phi));
        };
        total += adaptive(g, std::atan(lo_rel[e] / dist), 0.0, rtol);
        total += adaptive(g, 0.0, std::atan(hi_rel[e] / dist), rtol);
        continue;
      }
      const int e1 = (d + 1) % 3, e2 = (d + 2) % 3;
      for (int s1 : {-1, 1})
        for (int s2 : {-1, 1}) {
          const double P = s1 > 0 ? hi_rel[e1] : -lo_rel[e1];
          const double Q = s2 > 0 ? hi_rel[e2] : -lo_rel[e2];
          const double psi_c = std::atan2(Q, P);
          auto outer = [&](double psi) {
            const double edge = psi < psi_c ? P / std::cos(psi) : Q / std::sin(psi);
            const double phi_max = std::atan(edge / dist);
            auto inner = [&](double phi) {
              Vec dir{};
              dir[d] = side * std::cos(phi);
              dir[e1] = s1 * std::cos(psi) * std::sin(phi);
              dir[e2] = s2 * std::sin(psi) * std::sin(phi);
              return f(dir, dist / std::cos(phi)) * std::sin(phi);
            };
            return adaptive(inner, 0.0, phi_max, rtol);
          };
          total += adaptive(outer, 0.0, psi_c, rtol);
          total += adaptive(outer, psi_c, 0.5 * std::numbers::pi, rtol);
        }
    }
  }
  return total;
}

// int_rho^inf K(t) t^{n-1} dt.
double radial_tail(const KernelSpec& spec, double rho) {
  const double s = spec.s;
  double value = std::pow(rho, -2.0 * s) / (2.0 * s);
  if (spec.variant == KernelVariant::perturbed && spec.beta != 0.0) {
    // int_rho^inf e^{-t^2} t^{-1-2s} dt = Gamma(-s, rho^2) / 2, with
    // Gamma(-s, z) = (z^{-s} e^{-z} - Gamma(1 - s, z)) / s.
    const double z = rho * rho;
    const double upper = (std::pow(z, -s) * std::exp(-z) - boost::math::tgamma(1.0 - s, z)) / s;
    value += spec.beta * 0.5 * upper;
  }
  return spec.normalization * value;
}

// (1 - cos z) / z^2, stable near zero.
double one_minus_cos_over_sq(double z) {
  const double half = 0.5 * z;
  if (std::abs(half) < 1e-8) return 0.5;
  const double sinc = std::sin(half) / half;
  return 0.5 * sinc * sinc;
}

// int_0^rho (1 - cos(b t)) K(t) t^{n-1} dt via t = rho w^p, p = 1/(2 - 2s),
// which absorbs the t^{1-2s} behaviour at the origin.
double radial_same_cell(const KernelSpec& spec, double b, double rho) {
  if (b == 0.0) return 0.0;
  const double p = 1.0 / (2.0 - 2.0 * spec.s);
  auto g = [&](double w) {
    const double t = rho * std::pow(w, p);
    return one_minus_cos_over_sq(b * t) * spec.multiplier(t * t);
  };
  const double integral = adaptive(g, 0.0, 1.0, 1e-12);
  return spec.normalization * b * b * std::pow(rho, 2.0 - 2.0 * spec.s) * p * integral;
}

}  // namespace

double tail_integral(const KernelSpec& spec, const Point& x, const AxisBox& box, double rtol) {
  const int n = spec.n;
  Vec lo_rel{}, hi_rel{};
  for (int d = 0; d < n; ++d) {
    lo_rel[d] = box.lo[d] - x[d];
    hi_rel[d] = box.hi[d] - x[d];
    if (!(lo_rel[d] < 0.0 && hi_rel[d] > 0.0))
      throw DomainError("tail_integral: point must lie strictly inside the box");
  }
  auto f = [&](const Vec&, double rho) { return radial_tail(spec, rho); };
  return 2.0 * integrate_over_directions(n, lo_rel, hi_rel, f, 0.1 * rtol);
}

double tail_outside_ball(const KernelSpec& spec, double radius) {
  if (!(radius > 0.0)) throw DomainError("tail_outside_ball: radius must be positive");
  return 2.0 * unit_sphere_area(spec.n) * radial_tail(spec, radius);
}

double same_cell_integral(const KernelSpec& spec, const Vec& a, double h) {
  if (a[0] == 0.0 && a[1] == 0.0 && a[2] == 0.0) return 0.0;
  const Vec lo_rel{-0.5 * h, -0.5 * h, -0.5 * h};
  const Vec hi_rel{0.5 * h, 0.5 * h, 0.5 * h};
  auto f = [&](const Vec& dir, double rho) { return radial_same_cell(spec, std::abs(dot(dir, a)), rho); };
  return 2.0 * integrate_over_directions(spec.n, lo_rel, hi_rel, f, 1e-10);
}

}  // namespace fracmag
