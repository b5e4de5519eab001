#include "fracmag/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "fracmag/errors.hpp"

namespace fracmag {

const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::config: return "config";
    case ErrorKind::precondition: return "precondition";
    case ErrorKind::numeric: return "numeric";
    case ErrorKind::hypothesis: return "hypothesis";
    case ErrorKind::domain: return "domain";
  }
  return "unknown";
}

double dot(const Vec& a, const Vec& b) noexcept { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }

double norm(const Vec& a) noexcept { return std::sqrt(dot(a, a)); }

double distance2(const Point& a, const Point& b) noexcept {
  const double d0 = a[0] - b[0], d1 = a[1] - b[1], d2 = a[2] - b[2];
  return d0 * d0 + d1 * d1 + d2 * d2;
}

Point midpoint(const Point& a, const Point& b) noexcept {
  return {0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1]), 0.5 * (a[2] + b[2])};
}

const char* to_string(Region region) noexcept {
  switch (region) {
    case Region::omega: return "OMEGA";
    case Region::w1: return "W1";
    case Region::w2: return "W2";
    case Region::far: return "FAR";
  }
  return "?";
}

bool AxisBox::contains(const Point& p, int n) const noexcept {
  for (int d = 0; d < n; ++d)
    if (!(p[d] > lo[d] && p[d] < hi[d])) return false;
  return true;
}

bool Ball::contains(const Point& p, int n) const noexcept {
  double r2 = 0.0;
  for (int d = 0; d < n; ++d) r2 += (p[d] - center[d]) * (p[d] - center[d]);
  return r2 < radius * radius;
}

bool RegionShape::contains(const Point& p, int n) const noexcept {
  if (const auto* ball = std::get_if<Ball>(&shape)) return ball->contains(p, n);
  const auto& boxes = std::get<std::vector<AxisBox>>(shape);
  return std::any_of(boxes.begin(), boxes.end(), [&](const AxisBox& b) { return b.contains(p, n); });
}

AxisBox RegionShape::bounds(int n) const {
  AxisBox out;
  if (const auto* ball = std::get_if<Ball>(&shape)) {
    for (int d = 0; d < n; ++d) {
      out.lo[d] = ball->center[d] - ball->radius;
      out.hi[d] = ball->center[d] + ball->radius;
    }
    return out;
  }
  const auto& boxes = std::get<std::vector<AxisBox>>(shape);
  if (boxes.empty()) throw ConfigError("omega: empty box list");
  out = boxes.front();
  for (const auto& b : boxes)
    for (int d = 0; d < n; ++d) {
      out.lo[d] = std::min(out.lo[d], b.lo[d]);
      out.hi[d] = std::max(out.hi[d], b.hi[d]);
    }
  return out;
}

namespace {

void check_box(const AxisBox& b, int n, const char* name) {
  for (int d = 0; d < n; ++d)
    if (!(b.lo[d] < b.hi[d])) {
      std::ostringstream msg;
      msg << name << ": lo must be below hi along axis " << d;
      throw ConfigError(msg.str());
    }
}

bool boxes_overlap(const AxisBox& a, const AxisBox& b, int n) {
  for (int d = 0; d < n; ++d)
    if (a.hi[d] <= b.lo[d] || b.hi[d] <= a.lo[d]) return false;
  return true;
}

void check_margin(const AxisBox& inner, const AxisBox& box, double h, int n, const char* name) {
  const double tol = 1e-9 * h;
  for (int d = 0; d < n; ++d)
    if (inner.lo[d] < box.lo[d] + h - tol || inner.hi[d] > box.hi[d] - h + tol) {
      std::ostringstream msg;
      msg << name << " must lie inside the computational box with at least one cell (h = " << h
          << ") of margin along axis " << d;
      throw ConfigError(msg.str());
    }
}

}  // namespace

void validate(const ScenarioGeometry& geom) {
  if (geom.n < 1 || geom.n > 3) throw ConfigError("dimension must be 1, 2 or 3");
  if (!(geom.s > 0.0 && geom.s < 1.0)) throw ConfigError("fractional power s must lie in (0, 1)");
  if (!(geom.r > 0.0)) throw ConfigError("radius bound r must be positive");
  if (!(geom.h > 0.0)) throw ConfigError("grid spacing h must be positive");
  const int n = geom.n;
  check_box(geom.box, n, "box");
  check_box(geom.w1, n, "w1");
  check_box(geom.w2, n, "w2");
  if (const auto* boxes = std::get_if<std::vector<AxisBox>>(&geom.omega.shape)) {
    for (const auto& b : *boxes) check_box(b, n, "omega");
  } else if (!(std::get<Ball>(geom.omega.shape).radius > 0.0)) {
    throw ConfigError("omega: ball radius must be positive");
  }
  if (geom.w1 == geom.w2) throw ConfigError("W1 and W2 coincide; the windows must be disjoint");
  if (boxes_overlap(geom.w1, geom.w2, n)) throw ConfigError("W1 and W2 overlap; the windows must be disjoint");
  check_margin(geom.omega.bounds(n), geom.box, geom.h, n, "omega");
  check_margin(geom.w1, geom.box, geom.h, n, "w1");
  check_margin(geom.w2, geom.box, geom.h, n, "w2");
  if (geom.window_shrink_radius < 0.0) throw ConfigError("window_shrink_radius must be nonnegative");
}

bool Lattice::in_bounds(const LatticeIndex& k) const noexcept {
  for (int d = 0; d < 3; ++d)
    if (k[d] < 0 || k[d] >= counts[d]) return false;
  return true;
}

int Lattice::flatten(const LatticeIndex& k) const noexcept {
  return (k[0] * counts[1] + k[1]) * counts[2] + k[2];
}

LatticeIndex Lattice::unflatten(int node) const noexcept {
  LatticeIndex k{};
  k[2] = node % counts[2];
  node /= counts[2];
  k[1] = node % counts[1];
  k[0] = node / counts[1];
  return k;
}

Point Lattice::center(const LatticeIndex& k) const noexcept {
  Point p{};
  for (int d = 0; d < n; ++d) p[d] = lo[d] + (k[d] + 0.5) * h;
  return p;
}

namespace {

// Expands per-axis candidate lists into flattened node ids.
void expand_candidates(const Lattice& lat, const std::array<std::array<int, 2>, 3>& cand,
                       const std::array<int, 3>& ncand, std::vector<int>& out) {
  for (int a = 0; a < ncand[0]; ++a)
    for (int b = 0; b < ncand[1]; ++b)
      for (int c = 0; c < ncand[2]; ++c) {
        const LatticeIndex k{cand[0][a], cand[1][b], cand[2][c]};
        if (lat.in_bounds(k)) out.push_back(lat.flatten(k));
      }
}

}  // namespace

void Lattice::nearest_nodes(const Point& p, std::vector<int>& out) const {
  out.clear();
  std::array<std::array<int, 2>, 3> cand{};
  std::array<int, 3> ncand{1, 1, 1};
  for (int d = 0; d < n; ++d) {
    const double extent = counts[d] * h;
    if (p[d] < lo[d] || p[d] > lo[d] + extent) return;
    const double t = (p[d] - lo[d]) / h - 0.5;
    const double fl = std::floor(t);
    const double frac = t - fl;
    if (std::abs(frac - 0.5) < 1e-9) {
      cand[d] = {static_cast<int>(fl), static_cast<int>(fl) + 1};
      ncand[d] = 2;
    } else {
      cand[d][0] = static_cast<int>(frac < 0.5 ? fl : fl + 1.0);
    }
  }
  expand_candidates(*this, cand, ncand, out);
}

void Lattice::midpoint_nodes(const LatticeIndex& a, const LatticeIndex& b, std::vector<int>& out) const {
  out.clear();
  std::array<std::array<int, 2>, 3> cand{};
  std::array<int, 3> ncand{1, 1, 1};
  for (int d = 0; d < n; ++d) {
    const int sum = a[d] + b[d];
    if (sum % 2 == 0) {
      cand[d][0] = sum / 2;
    } else {
      // sum is odd here, and may be negative only for off-lattice indices
      const int lower = (sum - 1) / 2;
      cand[d] = {lower, lower + 1};
      ncand[d] = 2;
    }
  }
  expand_candidates(*this, cand, ncand, out);
}

Grid::Grid(Lattice lattice, std::vector<Region> regions, double r)
    : lattice_(lattice), r_(r), regions_(std::move(regions)) {
  vol_ = std::pow(lattice_.h, lattice_.n);
  const int count = lattice_.size();
  if (static_cast<int>(regions_.size()) != count) throw ConfigError("grid: region label count mismatch");
  nodes_.resize(static_cast<std::size_t>(count));
  indices_.resize(static_cast<std::size_t>(count));
  local_.assign(static_cast<std::size_t>(count), -1);
  for (int i = 0; i < count; ++i) {
    indices_[static_cast<std::size_t>(i)] = lattice_.unflatten(i);
    nodes_[static_cast<std::size_t>(i)] = lattice_.center(indices_[static_cast<std::size_t>(i)]);
    auto& bucket = by_region_[static_cast<std::size_t>(regions_[static_cast<std::size_t>(i)])];
    local_[static_cast<std::size_t>(i)] = static_cast<int>(bucket.size());
    bucket.push_back(i);
    if (regions_[static_cast<std::size_t>(i)] != Region::far) active_.push_back(i);
  }
}

std::span<const int> Grid::nodes_in(Region region) const {
  return by_region_[static_cast<std::size_t>(region)];
}

Grid Grid::with_windows(std::span<const int> w1_nodes, std::span<const int> w2_nodes) const {
  std::vector<Region> regions = regions_;
  for (auto& reg : regions)
    if (reg == Region::w1 || reg == Region::w2) reg = Region::far;
  for (int i : w1_nodes) {
    if (regions_[static_cast<std::size_t>(i)] != Region::w1) throw PreconditionError("with_windows: node is not in W1");
    regions[static_cast<std::size_t>(i)] = Region::w1;
  }
  for (int i : w2_nodes) {
    if (regions_[static_cast<std::size_t>(i)] != Region::w2) throw PreconditionError("with_windows: node is not in W2");
    regions[static_cast<std::size_t>(i)] = Region::w2;
  }
  return Grid(lattice_, std::move(regions), r_);
}

Grid build_grid(const ScenarioGeometry& geom) {
  validate(geom);
  const int n = geom.n;
  Lattice lat;
  lat.n = n;
  lat.h = geom.h;
  lat.lo = geom.box.lo;
  for (int d = 0; d < n; ++d) {
    const double edge = geom.box.hi[d] - geom.box.lo[d];
    const double cells = std::round(edge / geom.h);
    if (cells < 1.0 || std::abs(cells * geom.h - edge) > 1e-9 * std::max(1.0, edge)) {
      std::ostringstream msg;
      msg << "grid spacing h = " << geom.h << " does not divide the box edge along axis " << d << " (length "
          << edge << ")";
      throw ConfigError(msg.str());
    }
    lat.counts[d] = static_cast<int>(cells);
  }

  const int count = lat.size();
  std::vector<Region> regions(static_cast<std::size_t>(count), Region::far);
  const double r2 = geom.r * geom.r;
  const double w2min = 9.0 * r2;
  for (int i = 0; i < count; ++i) {
    const Point p = lat.center(lat.unflatten(i));
    const bool in_omega = geom.omega.contains(p, n);
    const bool in_w1 = geom.w1.contains(p, n);
    const bool in_w2 = geom.w2.contains(p, n);
    if (static_cast<int>(in_omega) + static_cast<int>(in_w1) + static_cast<int>(in_w2) > 1)
      throw ConfigError("a grid cell center lies in more than one of omega, W1, W2");
    const double p2 = dot(p, p);
    if (in_omega) {
      if (!(p2 < r2)) {
        std::ostringstream msg;
        msg << "omega cell center at distance " << std::sqrt(p2) << " is not inside B_r(0), r = " << geom.r;
        throw HypothesisError(msg.str());
      }
      regions[static_cast<std::size_t>(i)] = Region::omega;
    } else if (in_w1 || in_w2) {
      if (p2 < w2min) {
        std::ostringstream msg;
        msg << (in_w1 ? "W1" : "W2") << " cell center at distance " << std::sqrt(p2)
            << " intersects B_{3r}(0), 3r = " << 3.0 * geom.r;
        throw HypothesisError(msg.str());
      }
      regions[static_cast<std::size_t>(i)] = in_w1 ? Region::w1 : Region::w2;
    }
  }

  Grid grid(lat, std::move(regions), geom.r);
  for (Region reg : {Region::omega, Region::w1, Region::w2})
    if (grid.nodes_in(reg).empty())
      throw ConfigError(std::string("region ") + to_string(reg) + " is empty after discretization");
  return grid;
}

bool midpoint_avoids(const Grid& grid, int x_node, int y_node, const SupportMask& supp1,
                     const SupportMask& supp2) {
  thread_local std::vector<int> cells;
  grid.lattice().midpoint_nodes(grid.index(x_node), grid.index(y_node), cells);
  return std::none_of(cells.begin(), cells.end(), [&](int c) {
    return supp1[static_cast<std::size_t>(c)] || supp2[static_cast<std::size_t>(c)];
  });
}

std::optional<MidpointWitness> find_midpoint_witness(const Grid& grid, const SupportMask& supp1,
                                                     const SupportMask& supp2) {
  for (int x : grid.nodes_in(Region::w2))
    for (int y : grid.nodes_in(Region::w1))
      if (midpoint_avoids(grid, x, y, supp1, supp2)) return MidpointWitness{x, y};
  return std::nullopt;
}

MidpointWitness check_midpoint_condition(const Grid& grid, const SupportMask& supp1, const SupportMask& supp2) {
  if (supp1.size() != static_cast<std::size_t>(grid.size()) || supp2.size() != supp1.size())
    throw PreconditionError("check_midpoint_condition: support mask size mismatch");
  auto witness = find_midpoint_witness(grid, supp1, supp2);
  if (!witness)
    throw HypothesisError(
        "no pair (x in W2, y in W1) has its midpoint outside supp A1 and supp A2; reconstruction refuses to run");
  return *witness;
}

bool all_window_midpoints_avoid(const Grid& grid, const SupportMask& supp1, const SupportMask& supp2) {
  for (int x : grid.nodes_in(Region::w2))
    for (int y : grid.nodes_in(Region::w1))
      if (!midpoint_avoids(grid, x, y, supp1, supp2)) return false;
  return true;
}

WindowShrink shrink_windows(const Grid& grid, const SupportMask& supp1, const SupportMask& supp2, double radius) {
  WindowShrink out{grid, false, 0.0, check_midpoint_condition(grid, supp1, supp2)};
  if (all_window_midpoints_avoid(grid, supp1, supp2)) return out;

  const double rad = radius > 0.0 ? radius : 2.0 * grid.spacing();
  auto near = [&](Region reg, int center) {
    std::vector<int> keep;
    const double r2 = rad * rad * (1.0 + 1e-12);
    for (int i : grid.nodes_in(reg))
      if (distance2(grid.node(i), grid.node(center)) <= r2) keep.push_back(i);
    return keep;
  };
  Grid shrunk = grid.with_windows(near(Region::w1, out.witness.y_node), near(Region::w2, out.witness.x_node));
  double used = rad;
  if (!all_window_midpoints_avoid(shrunk, supp1, supp2)) {
    const int y[] = {out.witness.y_node};
    const int x[] = {out.witness.x_node};
    shrunk = grid.with_windows(y, x);
    used = 0.0;
  }
  out.grid = std::move(shrunk);
  out.applied = true;
  out.radius = used;
  return out;
}

RegionCounts region_counts(const Grid& grid) {
  return {static_cast<int>(grid.nodes_in(Region::omega).size()), static_cast<int>(grid.nodes_in(Region::w1).size()),
          static_cast<int>(grid.nodes_in(Region::w2).size()), static_cast<int>(grid.nodes_in(Region::far).size())};
}

}  // namespace fracmag
