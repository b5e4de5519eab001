#include "fracmag/inverse.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>
#include <numbers>
#include <set>

#include <nlohmann/json.hpp>

#include "fracmag/errors.hpp"
#include "fracmag/io.hpp"
#include "fracmag/parallel.hpp"

namespace fracmag {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void require_same_setup(const LinearModel& m1, const LinearModel& m2) {
  if (m1.grid().size() != m2.grid().size() || m1.grid().spacing() != m2.grid().spacing())
    throw PreconditionError("models must share the grid");
  const KernelSpec& a = m1.kernel();
  const KernelSpec& b = m2.kernel();
  if (a.n != b.n || a.s != b.s || a.normalization != b.normalization || a.variant != b.variant || a.beta != b.beta)
    throw PreconditionError("models must share the kernel");
}

void require_support(const Grid& grid, const DiscreteFunction& g, Region window, const char* what) {
  for (int i = 0; i < grid.size(); ++i)
    if (g(i) != 0.0 && grid.region(i) != window)
      throw PreconditionError(std::string(what) + " must be supported in " + to_string(window));
}

double same_cell(const LinearModel& m, int node) {
  const MagneticPotential& A = m.magnetic();
  if (!A.support()[static_cast<std::size_t>(node)]) return 0.0;
  return m.grid().cell_volume() * same_cell_integral(m.kernel(), A.at(node), m.grid().spacing());
}

SupportMask omega_mask(const Grid& grid) {
  SupportMask mask(static_cast<std::size_t>(grid.size()), false);
  for (int i : grid.nodes_in(Region::omega)) mask[static_cast<std::size_t>(i)] = true;
  return mask;
}

/// Node at index(x0) + step, if it lies in omega.
int omega_neighbor(const Grid& grid, int x0, const LatticeIndex& step) {
  const Lattice& lat = grid.lattice();
  LatticeIndex k = grid.index(x0);
  for (int d = 0; d < 3; ++d) k[d] += step[d];
  if (!lat.in_bounds(k)) return -1;
  const int node = lat.flatten(k);
  return grid.region(node) == Region::omega ? node : -1;
}

LatticeIndex axis_step(int k, int offset) {
  LatticeIndex s{};
  s[k] = offset;
  return s;
}

LatticeIndex diagonal_step(int k, int l, int offset) {
  LatticeIndex s{};
  s[k] = offset;
  s[l] = offset;
  return s;
}

LatticeIndex negate(LatticeIndex s) {
  for (auto& v : s) v = -v;
  return s;
}

struct CosineProbe {
  bool covered = false;
  double cosine = 1.0;
  double bound = kInf;
  double k = 0.0;
};

/// Recovered R_{A1} at the pair (x0 + step, x0 - step); bound is the G
/// diagnostic converted to cosine units.
CosineProbe probe_cosine(const GField& G, const Grid& grid, const KernelSpec& spec,
                         const MagneticPotential& reference, int x0, const LatticeIndex& step) {
  CosineProbe out;
  const int xp = omega_neighbor(grid, x0, step);
  const int xm = omega_neighbor(grid, x0, negate(step));
  if (xp < 0 || xm < 0) return out;
  const GSample* sample = G.find(xp, xm);
  if (sample == nullptr || !sample->reliable) return out;
  const Point& p = grid.node(xp);
  const Point& m = grid.node(xm);
  out.k = eval_K(spec, p, m);
  out.cosine = eval_RA(reference, p, m) - sample->value / (2.0 * out.k);
  out.bound = sample->bound / (2.0 * out.k);
  out.covered = true;
  return out;
}

}  // namespace

double IdentityReport::scale(double floor) const noexcept {
  return std::max({std::abs(lhs), std::abs(rhs), floor});
}

const char* to_string(ReconstructionMode mode) noexcept {
  return mode == ReconstructionMode::verification ? "VERIFICATION" : "DATA_ONLY";
}

WindowTerms window_terms(const LinearModel& model1, const LinearModel& model2, const DiscreteFunction& u1,
                         const DiscreteFunction& u2) {
  require_same_setup(model1, model2);
  const Grid& grid = model1.grid();
  const bool refine = model1.form().meta().subcell_refinement;
  const double w = 2.0 * grid.cell_volume() * grid.cell_volume();
  std::vector<int> s1, s2;
  for (int i = 0; i < grid.size(); ++i) {
    if (u1(i) != 0.0) s1.push_back(i);
    if (u2(i) != 0.0) s2.push_back(i);
  }
  WindowTerms t;
  for (int x : s2) {
    const Region rx = grid.region(x);
    for (int y : s1) {
      const Region ry = grid.region(y);
      double* bucket = nullptr;
      if (rx == Region::omega && ry == Region::omega) bucket = &t.I1;
      else if (rx == Region::omega && ry == Region::w1) bucket = &t.I2;
      else if (rx == Region::w2 && ry == Region::omega) bucket = &t.I3;
      else if (rx == Region::w2 && ry == Region::w1) bucket = &t.I4;
      else throw PreconditionError("window_terms: u1 must live on omega and W1, u2 on omega and W2");
      if (x == y) {
        *bucket += (same_cell(model1, x) - same_cell(model2, x)) * u1(y) * u2(x);
        continue;
      }
      const PairWeight p1 = pair_weight(grid, model1.kernel(), model1.magnetic(), x, y, refine);
      const PairWeight p2 = pair_weight(grid, model2.kernel(), model2.magnetic(), x, y, refine);
      *bucket += w * (p2.rk - p1.rk) * u1(y) * u2(x);
    }
  }
  return t;
}

IdentityReport check_identity(const LinearModel& model1, const LinearModel& model2, const DiscreteFunction& g1,
                              const DiscreteFunction& g2) {
  require_same_setup(model1, model2);
  const Grid& grid = model1.grid();
  require_support(grid, g1, Region::w1, "g1");
  require_support(grid, g2, Region::w2, "g2");
  const DiscreteFunction u1 = model1.solve(g1);
  const DiscreteFunction u2 = model2.solve(g2);
  IdentityReport rep;
  rep.lhs = dtn_pairing_from_solution(model1, u1, g2) - dtn_pairing_from_solution(model2, u2, g1);
  rep.terms = window_terms(model1, model2, u1, u2);
  double mass = 0.0;
  for (int i : grid.nodes_in(Region::omega))
    mass += (model2.electric().at(i) - model1.electric().at(i)) * u1(i) * u2(i);
  rep.mass_term = mass * grid.cell_volume();
  rep.rhs = rep.terms.total() - rep.mass_term;
  rep.residual = std::abs(rep.lhs - rep.rhs);
  return rep;
}

CellRunge::CellRunge(const LinearModel& model, Region window, const RungeSettings& settings, int threads)
    : op_(model, window), vol_(model.grid().cell_volume()) {
  const int cells = op_.omega_size();
  results_.resize(static_cast<std::size_t>(cells));
  parallel_for(0, cells, threads, [&](int c) {
    results_[static_cast<std::size_t>(c)] = op_.approximate_auto(cell_target(model.grid(), c), settings);
  });
}

double CellRunge::solution_norm(int omega_local) const {
  return std::sqrt(vol_) * at(omega_local).interior.norm();
}

const GSample* GField::find(int x_node, int y_node) const {
  auto it = std::lower_bound(samples.begin(), samples.end(), std::pair{x_node, y_node},
                             [](const GSample& s, const std::pair<int, int>& key) {
                               return std::pair{s.x_node, s.y_node} < key;
                             });
  if (it == samples.end() || it->x_node != x_node || it->y_node != y_node) return nullptr;
  return &*it;
}

int GField::unreliable_count() const {
  return static_cast<int>(std::count_if(samples.begin(), samples.end(), [](const GSample& s) { return !s.reliable; }));
}

double young_constant(const LinearModel& model1, const LinearModel& model2) {
  require_same_setup(model1, model2);
  const Grid& grid = model1.grid();
  const auto omega = grid.nodes_in(Region::omega);
  const auto& B1 = model1.form().pairs();
  const auto& B2 = model2.form().pairs();
  const double vol = grid.cell_volume();
  double best = 0.0;
  for (int i : omega) {
    double row = 0.0;
    for (int j : omega) {
      double t = B1(i, j) - B2(i, j);
      if (i == j) t += (model1.electric().at(i) - model2.electric().at(i)) * vol;
      row += std::abs(t);
    }
    best = std::max(best, row);
  }
  return best / vol;
}

GField recover_G(const Eigen::MatrixXd& dtn_diff, const Grid& grid, const CellRunge& side1, const CellRunge& side2,
                 const std::vector<std::pair<int, int>>& pairs, double young, double residual_cap) {
  if (dtn_diff.cols() != static_cast<Eigen::Index>(side1.op().window().size()) ||
      dtn_diff.rows() != static_cast<Eigen::Index>(side2.op().window().size()))
    throw PreconditionError("recover_G: DtN difference does not match the window bases");
  GField field;
  field.young_constant = young;
  const double vol = grid.cell_volume();
  for (const auto& [x, y] : pairs) {
    if (x == y || grid.region(x) != Region::omega || grid.region(y) != Region::omega ||
        lattice_adjacent(grid.index(x), grid.index(y)))
      throw PreconditionError("recover_G: pair cells must be distinct, non-adjacent omega cells");
    const RungeResult& r1 = side1.at(grid.local_index(y));
    const RungeResult& r2 = side2.at(grid.local_index(x));
    GSample s;
    s.x_node = x;
    s.y_node = y;
    s.value = r2.coefficients.dot(dtn_diff * r1.coefficients) / vol;
    s.residual1 = r1.residual;
    s.residual2 = r2.residual;
    s.bound = young * (r1.residual + side1.solution_norm(grid.local_index(y)) * r2.residual) / vol;
    s.reliable = std::max(r1.residual, r2.residual) <= residual_cap;
    field.samples.push_back(s);
  }
  std::sort(field.samples.begin(), field.samples.end(), [](const GSample& a, const GSample& b) {
    return std::pair{a.x_node, a.y_node} < std::pair{b.x_node, b.y_node};
  });
  return field;
}

MagnitudeProbe recover_A_magnitudes(const GField& G, const Grid& grid, const KernelSpec& spec,
                                    const MagneticPotential& reference, int x0_node, int offset,
                                    double clamp_tolerance) {
  MagnitudeProbe out;
  const double eps = offset * grid.spacing();
  for (int k = 0; k < grid.dimension(); ++k) {
    const CosineProbe p = probe_cosine(G, grid, spec, reference, x0_node, axis_step(k, offset));
    if (!p.covered) {
      out.covered = false;
      return out;
    }
    out.cosine[k] = p.cosine;
    if (p.cosine > 1.0 + clamp_tolerance || p.cosine < -1.0 - clamp_tolerance) out.clamped = true;
    const double c = std::clamp(p.cosine, -1.0, 1.0);
    out.magnitude[k] = std::acos(c) / (2.0 * eps);
    const double slope = std::sqrt(std::max(0.0, 1.0 - c * c));
    out.error_bound[k] = slope > 0.0 ? p.bound / (2.0 * eps * slope) : kInf;
  }
  return out;
}

SignPattern recover_A_signs(const MagnitudeProbe& magnitudes, const GField& G, const Grid& grid,
                            const KernelSpec& spec, const MagneticPotential& reference, int x0_node, int offset,
                            const std::array<double, 3>& zero_threshold) {
  SignPattern out;
  const int n = grid.dimension();
  for (auto& row : out.relation) row.fill(SignRelation::undetermined);
  std::array<bool, 3> live{};
  int anchor = -1;
  for (int k = 0; k < n; ++k) {
    live[k] = !(magnitudes.magnitude[k] < zero_threshold[k]);
    if (live[k] && (anchor < 0 || magnitudes.magnitude[k] > magnitudes.magnitude[anchor])) anchor = k;
  }
  if (anchor < 0) return out;
  const double eps = offset * grid.spacing();
  for (int k = 0; k < n; ++k)
    for (int l = k + 1; l < n; ++l) {
      if (!live[k] || !live[l]) continue;
      const CosineProbe p = probe_cosine(G, grid, spec, reference, x0_node, diagonal_step(k, l, offset));
      if (!p.covered) {
        out.covered = false;
        return out;
      }
      const double sum = std::acos(std::clamp(p.cosine, -1.0, 1.0)) / (2.0 * eps);
      const double agree = std::abs(sum - (magnitudes.magnitude[k] + magnitudes.magnitude[l]));
      const double oppose = std::abs(sum - std::abs(magnitudes.magnitude[k] - magnitudes.magnitude[l]));
      out.relation[k][l] = agree < oppose   ? SignRelation::agreeing
                           : oppose < agree ? SignRelation::opposing
                                            : SignRelation::undetermined;
    }
  auto relation = [&](int a, int b) { return a < b ? out.relation[a][b] : out.relation[b][a]; };
  out.sign[anchor] = 1;
  for (int k = 0; k < n; ++k) {
    if (k == anchor || !live[k]) continue;
    const SignRelation rel = relation(anchor, k);
    if (rel == SignRelation::undetermined) {
      out.ambiguous = true;
      continue;
    }
    out.sign[k] = rel == SignRelation::agreeing ? 1 : -1;
  }
  for (int k = 0; k < n; ++k)
    for (int l = k + 1; l < n; ++l) {
      if (k == anchor || l == anchor || !live[k] || !live[l] || out.sign[k] == 0 || out.sign[l] == 0) continue;
      const SignRelation expected = out.sign[k] == out.sign[l] ? SignRelation::agreeing : SignRelation::opposing;
      if (out.relation[k][l] != expected) out.ambiguous = true;
    }
  return out;
}

namespace {

struct QStep {
  std::vector<double> delta;
  std::vector<bool> unreliable;
};

QStep q_step(const Eigen::MatrixXd& diff, const Grid& grid, const CellRunge& side1, const CellRunge& side2,
             double residual_cap) {
  const auto omega = grid.nodes_in(Region::omega);
  const double vol = grid.cell_volume();
  QStep out;
  out.delta.assign(omega.size(), 0.0);
  out.unreliable.assign(omega.size(), false);
  for (std::size_t c = 0; c < omega.size(); ++c) {
    const RungeResult& r1 = side1.at(static_cast<int>(c));
    const RungeResult& r2 = side2.at(static_cast<int>(c));
    const double pairing = r2.coefficients.dot(diff * r1.coefficients);
    const double overlap = vol * r1.interior.dot(r2.interior);
    if (std::max(r1.residual, r2.residual) > residual_cap || !(overlap > 0.0)) {
      out.unreliable[c] = true;
      continue;
    }
    out.delta[c] = pairing / overlap;
  }
  return out;
}

void require_matching(const DtnMatrix& data, const Grid& grid) {
  const auto w1 = grid.nodes_in(Region::w1);
  const auto w2 = grid.nodes_in(Region::w2);
  if (!std::equal(w1.begin(), w1.end(), data.w1_nodes.begin(), data.w1_nodes.end()) ||
      !std::equal(w2.begin(), w2.end(), data.w2_nodes.begin(), data.w2_nodes.end()))
    throw PreconditionError("DtN data were measured on different window nodes");
}

}  // namespace

QRecovery recover_q(const DtnMatrix& data, const MagneticPotential& A_known, const ElectricPotential& q0,
                    const LinearModel& reference, const LinearModel* truth, const InverseSettings& settings) {
  const auto grid = reference.grid_ptr();
  require_matching(data, *grid);
  const auto omega = grid->nodes_in(Region::omega);
  const auto form = std::make_shared<const NonlocalForm>(
      assemble_form(*grid, reference.kernel(), A_known, reference.form().meta()));
  const SolverSettings solver = reference.solver().settings();
  QRecovery out;
  out.unreliable.assign(omega.size(), false);

  if (settings.mode == ReconstructionMode::verification) {
    if (truth == nullptr) throw PreconditionError("verification mode needs the unknown model");
    const LinearModel model2(grid, reference.kernel(), A_known, q0, form, solver);
    const CellRunge side1(*truth, Region::w1, settings.runge, settings.threads);
    const CellRunge side2(model2, Region::w2, settings.runge, settings.threads);
    const Eigen::MatrixXd diff = data.entries - dtn_matrix(model2, settings.threads).entries;
    const QStep step = q_step(diff, *grid, side1, side2, settings.residual_cap);
    out.q_est = q0.values();
    for (std::size_t c = 0; c < omega.size(); ++c) {
      out.q_est[static_cast<std::size_t>(omega[c])] += step.delta[c];
      out.unreliable[c] = step.unreliable[c];
    }
    out.iterations = 1;
    return out;
  }

  std::vector<double> current = q0.values();
  out.converged = false;
  for (int it = 0; it < settings.q_iterations; ++it) {
    const LinearModel model(grid, reference.kernel(), A_known, ElectricPotential(*grid, current, q0.lower_bound()),
                            form, solver);
    const CellRunge side1(model, Region::w1, settings.runge, settings.threads);
    const CellRunge side2(model, Region::w2, settings.runge, settings.threads);
    const Eigen::MatrixXd diff = data.entries - dtn_matrix(model, settings.threads).entries;
    const QStep step = q_step(diff, *grid, side1, side2, settings.residual_cap);
    std::vector<double> next = current;
    double change = 0.0, size = 0.0;
    for (std::size_t c = 0; c < omega.size(); ++c) {
      auto& v = next[static_cast<std::size_t>(omega[c])];
      v = std::max(v + step.delta[c], q0.lower_bound());
      change = std::max(change, std::abs(v - current[static_cast<std::size_t>(omega[c])]));
      size = std::max(size, std::abs(current[static_cast<std::size_t>(omega[c])]));
      out.unreliable[c] = step.unreliable[c];
    }
    current = std::move(next);
    out.iterations = it + 1;
    out.last_update = size > 0.0 ? change / size : change;
    if (!std::isfinite(out.last_update)) break;
    if (out.last_update < settings.q_update_tolerance) {
      out.converged = true;
      break;
    }
  }
  out.q_est = std::move(current);
  return out;
}

ReconstructionReport reconstruct(const DtnMatrix& data, const LinearModel& reference, const LinearModel* truth_model,
                                 const InverseSettings& settings, GroundTruth truth) {
  const Grid& grid = reference.grid();
  require_matching(data, grid);
  if (!reference.magnetic().is_zero()) throw PreconditionError("the reference model must have A = 0");
  if (settings.mode == ReconstructionMode::verification && truth_model == nullptr)
    throw PreconditionError("verification mode needs the unknown model");
  const int n = grid.dimension();
  const double h = grid.spacing();

  ReconstructionReport rep;
  rep.mode = settings.mode;
  rep.smoke_test_only = grid.smoke_test_only();
  const SupportMask mask = omega_mask(grid);
  rep.witness = check_midpoint_condition(grid, mask, mask);

  rep.eps = settings.eps > 0.0 ? settings.eps : 2.0 * h;
  const double steps = rep.eps / h;
  const int offset = static_cast<int>(std::lround(steps));
  if (offset < 1 || std::abs(steps - offset) > 1e-9 * std::max(1.0, steps))
    throw PreconditionError("probe offset eps must be a positive multiple of h");
  const double bound = settings.component_bound > 0.0
                           ? settings.component_bound
                           : std::numbers::pi / (8.0 * std::sqrt(static_cast<double>(n)) * grid.radius_bound());
  if (!(2.0 * rep.eps * bound < std::numbers::pi / 2.0))
    throw PreconditionError("probe branch condition 2 eps |A^(k)| < pi/2 fails for the configured bound");
  const bool retry = settings.retry_wider && 2.0 * (2.0 * rep.eps) * bound < std::numbers::pi / 2.0;

  const Eigen::MatrixXd diff = data.entries - dtn_matrix(reference, settings.threads).entries;
  const LinearModel& side1_model = settings.mode == ReconstructionMode::verification ? *truth_model : reference;
  const CellRunge side1(side1_model, Region::w1, settings.runge, settings.threads);
  const CellRunge side2(reference, Region::w2, settings.runge, settings.threads);
  rep.young_constant = settings.mode == ReconstructionMode::verification ? young_constant(*truth_model, reference)
                                                                          : std::numeric_limits<double>::quiet_NaN();
  for (int c = 0; c < side1.op().omega_size(); ++c)
    rep.max_runge_residual = std::max({rep.max_runge_residual, side1.at(c).residual, side2.at(c).residual});

  const auto omega = grid.nodes_in(Region::omega);
  std::set<std::pair<int, int>> wanted;
  auto want = [&](int x0, const LatticeIndex& step) {
    const int xp = omega_neighbor(grid, x0, step);
    const int xm = omega_neighbor(grid, x0, negate(step));
    if (xp >= 0 && xm >= 0) wanted.emplace(xp, xm);
  };
  for (int x0 : omega)
    for (int o : {offset, 2 * offset}) {
      if (o != offset && !retry) continue;
      for (int k = 0; k < n; ++k) {
        want(x0, axis_step(k, o));
        for (int l = k + 1; l < n; ++l) want(x0, diagonal_step(k, l, o));
      }
    }
  const GField G = recover_G(diff, grid, side1, side2, {wanted.begin(), wanted.end()}, rep.young_constant,
                             settings.residual_cap);
  rep.unreliable_pairs = G.unreliable_count();

  const KernelSpec& spec = reference.kernel();
  const MagneticPotential& A_ref = reference.magnetic();
  for (int x0 : omega) {
    PointEstimate pe;
    pe.node = x0;
    pe.offset = offset;
    pe.magnitudes = recover_A_magnitudes(G, grid, spec, A_ref, x0, offset, settings.clamp_tolerance);
    if (pe.magnitudes.covered && pe.magnitudes.clamped && retry) {
      MagnitudeProbe wider = recover_A_magnitudes(G, grid, spec, A_ref, x0, 2 * offset, settings.clamp_tolerance);
      if (wider.covered) {
        pe.magnitudes = wider;
        pe.offset = 2 * offset;
      }
    }
    if (pe.magnitudes.covered) {
      std::array<double, 3> threshold{};
      for (int k = 0; k < n; ++k) threshold[k] = 10.0 * pe.magnitudes.error_bound[k];
      pe.signs = recover_A_signs(pe.magnitudes, G, grid, spec, A_ref, x0, pe.offset, threshold);
      if (n == 1 && pe.magnitudes.magnitude[0] < threshold[0]) pe.signs.sign[0] = 0;
    } else {
      pe.signs.covered = false;
    }
    for (int k = 0; k < n; ++k) pe.estimate[k] = pe.signs.sign[k] * pe.magnitudes.magnitude[k];
    rep.points.push_back(pe);
  }

  // One global sign: orient every point against the largest recovered vector.
  const PointEstimate* anchor = nullptr;
  for (const auto& pe : rep.points) {
    if (!pe.magnitudes.covered || !pe.signs.covered || pe.signs.ambiguous) continue;
    if (anchor == nullptr || norm(pe.estimate) > norm(anchor->estimate)) anchor = &pe;
  }
  const Vec ref_dir = anchor ? anchor->estimate : Vec{};
  rep.sign_convention =
      "per point: largest recovered component positive; globally: each point oriented so that its "
      "estimate has nonnegative dot product with the largest-norm estimate";
  rep.A_est.assign(static_cast<std::size_t>(grid.size()), Vec{});
  for (auto& pe : rep.points) {
    const bool usable = pe.magnitudes.covered && pe.signs.covered && !pe.signs.ambiguous;
    if (pe.magnitudes.clamped) ++rep.clamped_points;
    if (!pe.magnitudes.covered || !pe.signs.covered) ++rep.uncovered_points;
    else if (pe.signs.ambiguous) ++rep.ambiguous_points;
    if (!usable) {
      pe.estimate = Vec{};
      continue;
    }
    if (dot(pe.estimate, ref_dir) < 0.0)
      for (auto& v : pe.estimate) v = -v;
    rep.A_est[static_cast<std::size_t>(pe.node)] = pe.estimate;
  }

  const MagneticPotential A_known(grid, rep.A_est);
  const QRecovery q = recover_q(data, A_known, reference.electric(), reference, truth_model, settings);
  rep.q_est = q.q_est;
  rep.q_unreliable = q.unreliable;
  rep.q_iterations = q.iterations;
  rep.q_converged = q.converged;

  attach_errors(rep, grid, truth);
  return rep;
}

void attach_errors(ReconstructionReport& report, const Grid& grid, const GroundTruth& truth) {
  const auto omega = grid.nodes_in(Region::omega);
  if (truth.A != nullptr) {
    double sup = 0.0;
    for (int i : omega) sup = std::max(sup, norm(truth.A->at(i)));
    const double denom = sup > 0.0 ? sup : 1.0;
    double best = kInf;
    int best_sign = 1;
    for (int sigma : {1, -1}) {
      double err = 0.0;
      int counted = 0;
      for (const auto& pe : report.points) {
        if (!pe.magnitudes.covered || !pe.signs.covered || pe.signs.ambiguous) continue;
        const Vec& a = truth.A->at(pe.node);
        const Vec e{pe.estimate[0] - sigma * a[0], pe.estimate[1] - sigma * a[1], pe.estimate[2] - sigma * a[2]};
        err = std::max(err, norm(e));
        ++counted;
      }
      if (counted == 0) err = kInf;
      if (err < best) {
        best = err;
        best_sign = sigma;
      }
    }
    report.A_error = best / denom;
    report.A_sign = best_sign;
  }
  if (truth.q != nullptr) {
    double sup = 0.0, err = 0.0;
    for (int i : omega) {
      sup = std::max(sup, std::abs(truth.q->at(i)));
      err = std::max(err, std::abs(report.q_est[static_cast<std::size_t>(i)] - truth.q->at(i)));
    }
    report.q_error = err / (sup > 0.0 ? sup : 1.0);
  }
}

std::string report_json(const ReconstructionReport& r, const Grid& grid) {
  nlohmann::json j;
  j["mode"] = to_string(r.mode);
  j["mass_term"] = r.mass_term;
  j["sign_convention"] = r.sign_convention;
  j["smoke_test_only"] = r.smoke_test_only;
  j["eps"] = r.eps;
  j["h"] = grid.spacing();
  j["n"] = grid.dimension();
  j["witness"] = {{"x_node", r.witness.x_node}, {"y_node", r.witness.y_node}};
  j["omega_points"] = r.points.size();
  j["uncovered_points"] = r.uncovered_points;
  j["ambiguous_points"] = r.ambiguous_points;
  j["clamped_points"] = r.clamped_points;
  j["unreliable_pairs"] = r.unreliable_pairs;
  j["q_unreliable_cells"] = std::count(r.q_unreliable.begin(), r.q_unreliable.end(), true);
  j["q_iterations"] = r.q_iterations;
  j["q_status"] = r.q_converged ? "CONVERGED" : "NON_CONVERGED";
  j["max_runge_residual"] = r.max_runge_residual;
  if (std::isfinite(r.young_constant)) j["young_constant"] = r.young_constant;
  else j["young_constant"] = nullptr;
  auto opt = [&](const char* key, const std::optional<double>& v) {
    if (!v) j[key] = nullptr;
    else if (std::isfinite(*v)) j[key] = *v;
    else j[key] = "inf";
  };
  opt("A_relative_error", r.A_error);
  opt("q_relative_error", r.q_error);
  opt("linearization_bias", r.linearization_bias);
  opt("linearization_eps", r.linearization_eps);
  if (r.A_sign) j["A_error_sign"] = *r.A_sign;
  return j.dump(2) + "\n";
}

void write_report(const ReconstructionReport& r, const Grid& grid, const std::string& directory,
                  std::vector<std::string>* written) {
  const std::filesystem::path dir(directory);
  const auto json_path = dir / "reconstruction.json";
  write_text(json_path, report_json(r, grid));
  std::vector<NodeField> fields;
  for (int k = 0; k < grid.dimension(); ++k) {
    NodeField f{"A_est_" + std::to_string(k), std::vector<double>(static_cast<std::size_t>(grid.size()), 0.0)};
    for (int i = 0; i < grid.size(); ++i) f.values[static_cast<std::size_t>(i)] = r.A_est[static_cast<std::size_t>(i)][k];
    fields.push_back(std::move(f));
  }
  fields.push_back({"q_est", r.q_est});
  NodeField status{"status", std::vector<double>(static_cast<std::size_t>(grid.size()), 0.0)};
  for (const auto& pe : r.points) {
    double code = 0.0;  // 0 recovered, 1 uncovered/unreliable, 2 ambiguous
    if (!pe.magnitudes.covered || !pe.signs.covered) code = 1.0;
    else if (pe.signs.ambiguous) code = 2.0;
    status.values[static_cast<std::size_t>(pe.node)] = code;
  }
  fields.push_back(std::move(status));
  const auto csv_path = dir / "reconstruction_fields.csv";
  write_node_csv(csv_path, grid, fields);
  if (written) {
    written->push_back(json_path.string());
    written->push_back(csv_path.string());
  }
}

}  // namespace fracmag
