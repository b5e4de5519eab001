#pragma once

// Scenario geometry: the domain Omega, the two exterior measurement windows,
// the computational box and its cell-centered lattice.

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace fracmag {

/// Points and vectors always carry three slots; slots >= n are zero.
using Point = std::array<double, 3>;
using Vec = std::array<double, 3>;
using LatticeIndex = std::array<int, 3>;

double dot(const Vec& a, const Vec& b) noexcept;
double norm(const Vec& a) noexcept;
double distance2(const Point& a, const Point& b) noexcept;
Point midpoint(const Point& a, const Point& b) noexcept;

enum class Region : std::uint8_t { omega, w1, w2, far };
const char* to_string(Region region) noexcept;

/// Open axis-aligned box.
struct AxisBox {
  Point lo{};
  Point hi{};

  bool contains(const Point& p, int n) const noexcept;
  bool operator==(const AxisBox&) const = default;
};

/// Open ball.
struct Ball {
  Point center{};
  double radius = 0.0;

  bool contains(const Point& p, int n) const noexcept;
};

/// Omega is either a ball or a union of open boxes.
struct RegionShape {
  std::variant<Ball, std::vector<AxisBox>> shape;

  bool contains(const Point& p, int n) const noexcept;
  AxisBox bounds(int n) const;
};

struct ScenarioGeometry {
  int n = 2;
  double s = 0.5;
  double r = 1.0;
  RegionShape omega;
  AxisBox w1;
  AxisBox w2;
  AxisBox box;
  double h = 0.125;
  /// Radius used when the windows must be shrunk around a midpoint witness.
  /// Zero selects the default of 2h.
  double window_shrink_radius = 0.0;
};

/// Structural checks on the description itself (before discretization).
void validate(const ScenarioGeometry& geom);

/// Cell-centered lattice: node k has center lo + (k + 1/2) h along each axis.
struct Lattice {
  int n = 0;
  double h = 0.0;
  Point lo{};
  LatticeIndex counts{1, 1, 1};

  int size() const noexcept { return counts[0] * counts[1] * counts[2]; }
  bool in_bounds(const LatticeIndex& k) const noexcept;
  /// Row-major flattening with axis 0 slowest, so node order is lexicographic.
  int flatten(const LatticeIndex& k) const noexcept;
  LatticeIndex unflatten(int node) const noexcept;
  Point center(const LatticeIndex& k) const noexcept;

  /// Nearest node(s) to an arbitrary point. Exact ties (point on a cell face)
  /// return every tied node; points off the lattice return nothing.
  void nearest_nodes(const Point& p, std::vector<int>& out) const;
  /// Same for the midpoint of two lattice nodes, using integer arithmetic.
  void midpoint_nodes(const LatticeIndex& a, const LatticeIndex& b, std::vector<int>& out) const;
};

class Grid {
 public:
  Grid() = default;
  Grid(Lattice lattice, std::vector<Region> regions, double r);

  int dimension() const noexcept { return lattice_.n; }
  double spacing() const noexcept { return lattice_.h; }
  double cell_volume() const noexcept { return vol_; }
  /// Radius bound r of the scenario the grid was built from.
  double radius_bound() const noexcept { return r_; }
  int size() const noexcept { return static_cast<int>(regions_.size()); }
  const Lattice& lattice() const noexcept { return lattice_; }

  const Point& node(int i) const { return nodes_[static_cast<std::size_t>(i)]; }
  const LatticeIndex& index(int i) const { return indices_[static_cast<std::size_t>(i)]; }
  Region region(int i) const { return regions_[static_cast<std::size_t>(i)]; }
  std::span<const int> nodes_in(Region region) const;
  /// Position of a node inside nodes_in(region(node)).
  int local_index(int node) const { return local_[static_cast<std::size_t>(node)]; }

  /// Nodes with region omega, w1 or w2 (the only nodes where exterior data or
  /// solutions are nonzero).
  std::span<const int> active_nodes() const noexcept { return active_; }
  /// n = 1 grids are permitted for CI; reports flag them.
  bool smoke_test_only() const noexcept { return lattice_.n == 1; }

  /// Copy with the given window nodes relabeled (others of that window become far).
  Grid with_windows(std::span<const int> w1_nodes, std::span<const int> w2_nodes) const;

 private:
  Lattice lattice_;
  double vol_ = 0.0;
  double r_ = 0.0;
  std::vector<Point> nodes_;
  std::vector<LatticeIndex> indices_;
  std::vector<Region> regions_;
  std::array<std::vector<int>, 4> by_region_;
  std::vector<int> local_;
  std::vector<int> active_;
};

Grid build_grid(const ScenarioGeometry& geom);

/// Per-node support mask (true where a potential is nonzero).
using SupportMask = std::vector<bool>;

struct MidpointWitness {
  int x_node = -1;  // W2 node
  int y_node = -1;  // W1 node
};

/// True when every node sampled at (x+y)/2 lies outside both supports.
bool midpoint_avoids(const Grid& grid, int x_node, int y_node, const SupportMask& supp1,
                     const SupportMask& supp2);

/// Lexicographically first (x in W2, y in W1) witness, if any.
std::optional<MidpointWitness> find_midpoint_witness(const Grid& grid, const SupportMask& supp1,
                                                     const SupportMask& supp2);

/// Throws HypothesisError when no witness exists.
MidpointWitness check_midpoint_condition(const Grid& grid, const SupportMask& supp1,
                                         const SupportMask& supp2);

/// True when every W2 x W1 node pair has a midpoint avoiding both supports.
bool all_window_midpoints_avoid(const Grid& grid, const SupportMask& supp1,
                                const SupportMask& supp2);

struct WindowShrink {
  Grid grid;
  bool applied = false;
  double radius = 0.0;
  MidpointWitness witness;
};

/// Shrinks W1/W2 to balls around the witness when some window pair midpoint
/// hits a support; otherwise returns the grid unchanged.
WindowShrink shrink_windows(const Grid& grid, const SupportMask& supp1, const SupportMask& supp2,
                            double radius);

struct RegionCounts {
  int omega = 0, w1 = 0, w2 = 0, far = 0;
};
RegionCounts region_counts(const Grid& grid);

}  // namespace fracmag
