#pragma once

// Exterior partial Dirichlet-to-Neumann map: the bilinear pairing
// <Lambda g, h> = B[u_g, h*] + sum_omega q u_g h* vol, its pointwise strong
// form on W2, and the W1 -> W2 measurement matrix.

#include <filesystem>
#include <string>
#include <vector>

#include "fracmag/nonlocal_form.hpp"

namespace fracmag {

/// <Lambda g, h> with h* = h + extension (extension supported on omega).
double dtn_pairing(const LinearModel& model, const DiscreteFunction& g, const DiscreteFunction& h);
double dtn_pairing(const LinearModel& model, const DiscreteFunction& g, const DiscreteFunction& h,
                   const DiscreteFunction& extension);
/// Same pairing when the solution u_g is already known.
double dtn_pairing_from_solution(const LinearModel& model, const DiscreteFunction& u, const DiscreteFunction& hstar);

/// -2 sum_y vol R_A(x, y) K(x, y) u(y) at a W2 node x. With refinement, cells
/// lattice-adjacent to x are split into 2^n subcells (x stays a point).
double pointwise_from_solution(const Grid& grid, const KernelSpec& spec, const MagneticPotential& A,
                               const DiscreteFunction& u, int x_node, bool subcell_refinement = false);
double dtn_pointwise(const LinearModel& model, const DiscreteFunction& g, int x_node);

struct DtnMatrix {
  /// entries(j, i) = <Lambda e_{w1_nodes[i]}, e_{w2_nodes[j]}>.
  Eigen::MatrixXd entries;
  std::vector<int> w1_nodes;
  std::vector<int> w2_nodes;
  std::vector<Point> w1_points;
  std::vector<Point> w2_points;
  int n = 0;
  double h = 0.0;
  std::string provenance;
  /// Convention for the omega mass term of the pairing.
  std::string mass_term = "q*u*h";
};

DtnMatrix dtn_matrix(const LinearModel& model, int threads = 0, std::string provenance = {});

/// Pairing matrix over the combined exterior basis W1 then W2 (for symmetry checks).
Eigen::MatrixXd exterior_pairing_matrix(const LinearModel& model, int threads = 0);

/// CSV of entries (one row per W2 node) plus a JSON sidecar with node
/// coordinates and conventions.
void write_dtn(const DtnMatrix& m, const std::filesystem::path& csv, const std::filesystem::path& json);
DtnMatrix read_dtn(const std::filesystem::path& csv, const std::filesystem::path& json);

/// Node-wise indicator on the grid.
DiscreteFunction indicator(const Grid& grid, int node);

}  // namespace fracmag
