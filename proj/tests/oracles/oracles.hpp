#pragma once

// Independent reference implementations used only by the tests. Nothing here
// calls into fracmag; inputs are plain numbers and std::vector.

#include <functional>
#include <vector>

namespace oracle {

using Vector = std::vector<double>;
using Matrix = std::vector<Vector>;

/// Gaussian elimination with partial pivoting; a is copied.
Vector gauss_solve(Matrix a, Vector b);

double gamma_fn(double x);

/// 4^s Gamma(n/2+s) / (pi^{n/2} |Gamma(-s)|) evaluated from the identity
/// c * int_{R^n} (1 - cos y_1) |y|^{-n-2s} dy = 1 by numerical quadrature.
double normalization_by_quadrature(int n, double s);

/// 2 int_{|y| > R} c |y|^{-n-2s} dy in closed form.
double ball_tail(int n, double s, double c, double R);

/// 2 int_{R \ (lo, hi)} c |x - y|^{-1-2s} dy by exp-sinh quadrature.
double tail_1d(double s, double c, double x, double lo, double hi);

/// 2 int_{R^2 \ box} c |x - y|^{-2-2s} dy: numeric in both polar variables,
/// split at R into an annulus and a closed-form outer part.
double tail_2d(double s, double c, const double x[2], const double lo[2], const double hi[2]);

/// 2 int_{cell} (1 - cos(t . a)) c |t|^{-n-2s} dt over the cube of side h
/// centered at 0, by iterated tanh-sinh quadrature (n = 1 or 2).
double same_cell(int n, double s, double c, const double a[2], double h);

/// Dense 1-D model on a cell-centered lattice, assembled from the pair rule
/// written out by hand.
struct Model1D {
  double s = 0.5;
  double c = 0.0;
  double h = 0.0;
  double lo = 0.0;
  int size = 0;
  std::vector<int> omega, w1, w2;
  Vector A;  // per node, zero off omega
  Vector q;  // per node, zero off omega

  double x(int k) const { return lo + (k + 0.5) * h; }
  double kernel(int i, int j) const;
  double cosine(int i, int j) const;

  /// B + diag(tail) over all nodes.
  Matrix form() const;
  /// Full solution with u = g off omega.
  Vector solve(const Vector& g) const;
  /// entries[j][i] = pairing of the i-th W1 indicator with the j-th W2 indicator.
  Matrix dtn() const;
  /// -2 vol sum_y R K u(y) at node x.
  double pointwise(const Vector& u, int x) const;
  /// Semilinear solve with a(z) = q z + sum_{k>=2} a[k-1] z^k / k! by damped
  /// Picard sweeps (a[0] is ignored; the linear coefficient is q).
  Vector solve_semilinear(const Vector& g, const std::vector<double>& a, double damping) const;
};

}  // namespace oracle
