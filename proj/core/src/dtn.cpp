#include "fracmag/dtn.hpp"

#include <nlohmann/json.hpp>

#include "fracmag/errors.hpp"
#include "fracmag/io.hpp"
#include "fracmag/parallel.hpp"

namespace fracmag {

namespace {

void require_off_omega(const Grid& grid, const DiscreteFunction& f, const char* what) {
  if (f.size() != grid.size()) throw PreconditionError(std::string(what) + ": dimension mismatch");
  for (int i : grid.nodes_in(Region::omega))
    if (f(i) != 0.0) throw PreconditionError(std::string(what) + " must vanish on omega");
}

double omega_mass(const LinearModel& model, const DiscreteFunction& u, const DiscreteFunction& v) {
  const Grid& grid = model.grid();
  double acc = 0.0;
  for (int i : grid.nodes_in(Region::omega)) acc += model.electric().at(i) * u(i) * v(i);
  return acc * grid.cell_volume();
}

}  // namespace

DiscreteFunction indicator(const Grid& grid, int node) {
  DiscreteFunction e = DiscreteFunction::Zero(grid.size());
  e(node) = 1.0;
  return e;
}

double dtn_pairing_from_solution(const LinearModel& model, const DiscreteFunction& u, const DiscreteFunction& hstar) {
  return form_value(model.form(), u, hstar) + omega_mass(model, u, hstar);
}

double dtn_pairing(const LinearModel& model, const DiscreteFunction& g, const DiscreteFunction& h) {
  require_off_omega(model.grid(), g, "exterior data g");
  require_off_omega(model.grid(), h, "exterior data h");
  return dtn_pairing_from_solution(model, model.solve(g), h);
}

double dtn_pairing(const LinearModel& model, const DiscreteFunction& g, const DiscreteFunction& h,
                   const DiscreteFunction& extension) {
  const Grid& grid = model.grid();
  require_off_omega(grid, g, "exterior data g");
  require_off_omega(grid, h, "exterior data h");
  if (extension.size() != grid.size()) throw PreconditionError("extension: dimension mismatch");
  for (int i = 0; i < grid.size(); ++i)
    if (extension(i) != 0.0 && grid.region(i) != Region::omega)
      throw PreconditionError("extension must be supported on omega");
  return dtn_pairing_from_solution(model, model.solve(g), h + extension);
}

double pointwise_from_solution(const Grid& grid, const KernelSpec& spec, const MagneticPotential& A,
                               const DiscreteFunction& u, int x_node, bool subcell_refinement) {
  if (grid.region(x_node) != Region::w2) throw PreconditionError("pointwise DtN: x must be a W2 node");
  if (u(x_node) != 0.0) throw DomainError("pointwise DtN: x lies in the support of u");
  const Point& x = grid.node(x_node);
  const int n = grid.dimension();
  const double vol = grid.cell_volume();
  const double quarter = 0.25 * grid.spacing();
  const int subcells = 1 << n;
  double acc = 0.0;
  for (int j = 0; j < grid.size(); ++j) {
    if (u(j) == 0.0) continue;
    const Point& y = grid.node(j);
    double rk = 0.0;
    if (subcell_refinement && lattice_adjacent(grid.index(x_node), grid.index(j))) {
      for (int c = 0; c < subcells; ++c) {
        Point ys = y;
        for (int d = 0; d < n; ++d) ys[d] += (c >> d & 1) ? quarter : -quarter;
        rk += eval_RA(A, x, ys) * eval_K(spec, x, ys);
      }
      rk /= subcells;
    } else {
      rk = eval_RA(A, x, y) * eval_K(spec, x, y);
    }
    acc += rk * u(j);
  }
  return -2.0 * vol * acc;
}

double dtn_pointwise(const LinearModel& model, const DiscreteFunction& g, int x_node) {
  require_off_omega(model.grid(), g, "exterior data g");
  const DiscreteFunction u = model.solve(g);
  return pointwise_from_solution(model.grid(), model.kernel(), model.magnetic(), u, x_node,
                                 model.form().meta().subcell_refinement);
}

DtnMatrix dtn_matrix(const LinearModel& model, int threads, std::string provenance) {
  const Grid& grid = model.grid();
  DtnMatrix m;
  m.n = grid.dimension();
  m.h = grid.spacing();
  m.provenance = std::move(provenance);
  const auto w1 = grid.nodes_in(Region::w1);
  const auto w2 = grid.nodes_in(Region::w2);
  m.w1_nodes.assign(w1.begin(), w1.end());
  m.w2_nodes.assign(w2.begin(), w2.end());
  for (int i : w1) m.w1_points.push_back(grid.node(i));
  for (int j : w2) m.w2_points.push_back(grid.node(j));
  m.entries.resize(static_cast<Eigen::Index>(w2.size()), static_cast<Eigen::Index>(w1.size()));
  parallel_for(0, static_cast<int>(w1.size()), threads, [&](int c) {
    const DiscreteFunction u = model.solve(indicator(grid, w1[static_cast<std::size_t>(c)]));
    for (std::size_t r = 0; r < w2.size(); ++r)
      m.entries(static_cast<Eigen::Index>(r), c) = dtn_pairing_from_solution(model, u, indicator(grid, w2[r]));
  });
  return m;
}

Eigen::MatrixXd exterior_pairing_matrix(const LinearModel& model, int threads) {
  const Grid& grid = model.grid();
  std::vector<int> basis;
  for (int i : grid.nodes_in(Region::w1)) basis.push_back(i);
  for (int i : grid.nodes_in(Region::w2)) basis.push_back(i);
  const auto size = static_cast<Eigen::Index>(basis.size());
  Eigen::MatrixXd out(size, size);
  parallel_for(0, static_cast<int>(size), threads, [&](int a) {
    const DiscreteFunction u = model.solve(indicator(grid, basis[static_cast<std::size_t>(a)]));
    for (Eigen::Index b = 0; b < size; ++b)
      out(a, b) = dtn_pairing_from_solution(model, u, indicator(grid, basis[static_cast<std::size_t>(b)]));
  });
  return out;
}

void write_dtn(const DtnMatrix& m, const std::filesystem::path& csv, const std::filesystem::path& json) {
  CsvTable table;
  table.header.push_back("w2_node");
  for (int i : m.w1_nodes) table.header.push_back("w1_" + std::to_string(i));
  for (Eigen::Index r = 0; r < m.entries.rows(); ++r) {
    std::vector<std::string> row{std::to_string(m.w2_nodes[static_cast<std::size_t>(r)])};
    for (Eigen::Index c = 0; c < m.entries.cols(); ++c) row.push_back(format_double(m.entries(r, c)));
    table.rows.push_back(std::move(row));
  }
  write_csv(csv, table);

  auto points = [&](const std::vector<Point>& pts) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& p : pts) {
      nlohmann::json coords = nlohmann::json::array();
      for (int d = 0; d < m.n; ++d) coords.push_back(p[d]);
      arr.push_back(coords);
    }
    return arr;
  };
  nlohmann::json side;
  side["n"] = m.n;
  side["h"] = m.h;
  side["rows"] = "w2";
  side["cols"] = "w1";
  side["basis"] = "per-node indicators (unnormalized)";
  side["mass_term"] = m.mass_term;
  side["provenance"] = m.provenance;
  side["w1_nodes"] = m.w1_nodes;
  side["w2_nodes"] = m.w2_nodes;
  side["w1_points"] = points(m.w1_points);
  side["w2_points"] = points(m.w2_points);
  write_text(json, side.dump(2) + "\n");
}

DtnMatrix read_dtn(const std::filesystem::path& csv, const std::filesystem::path& json) {
  nlohmann::json side;
  try {
    side = nlohmann::json::parse(read_text(json));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(json.string() + ": " + e.what());
  }
  DtnMatrix m;
  try {
    m.n = side.at("n").get<int>();
    m.h = side.at("h").get<double>();
    m.mass_term = side.value("mass_term", std::string("q*u*h"));
    m.provenance = side.value("provenance", std::string{});
    m.w1_nodes = side.at("w1_nodes").get<std::vector<int>>();
    m.w2_nodes = side.at("w2_nodes").get<std::vector<int>>();
    auto load = [&](const char* key, std::vector<Point>& out) {
      for (const auto& p : side.at(key)) {
        Point q{};
        for (int d = 0; d < m.n; ++d) q[d] = p.at(static_cast<std::size_t>(d)).get<double>();
        out.push_back(q);
      }
    };
    load("w1_points", m.w1_points);
    load("w2_points", m.w2_points);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(json.string() + ": " + e.what());
  }
  const CsvTable table = read_csv(csv);
  if (table.rows.size() != m.w2_nodes.size() || table.header.size() != m.w1_nodes.size() + 1)
    throw ConfigError(csv.string() + ": shape does not match the sidecar");
  m.entries.resize(static_cast<Eigen::Index>(m.w2_nodes.size()), static_cast<Eigen::Index>(m.w1_nodes.size()));
  for (std::size_t r = 0; r < table.rows.size(); ++r)
    for (std::size_t c = 0; c < m.w1_nodes.size(); ++c)
      m.entries(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
          table.number(r, static_cast<int>(c + 1));
  return m;
}

}  // namespace fracmag
