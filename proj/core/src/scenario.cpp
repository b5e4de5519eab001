#include "fracmag/scenario.hpp"

#include <cmath>
#include <set>

#include <yaml-cpp/yaml.h>

#include "fracmag/errors.hpp"
#include "fracmag/io.hpp"

namespace fracmag {

namespace {

class Parser {
 public:
  explicit Parser(std::string name) : name_(std::move(name)) {}

  [[noreturn]] void fail(const YAML::Node& node, const std::string& msg) const {
    const YAML::Mark mark = node.Mark();
    std::string where = name_;
    if (mark.line >= 0) where += ":" + std::to_string(mark.line + 1);
    throw ConfigError(where + ": " + msg);
  }

  void only(const YAML::Node& node, std::initializer_list<const char*> keys, const std::string& section) const {
    if (!node.IsMap()) fail(node, section + " must be a mapping");
    std::set<std::string> allowed(keys.begin(), keys.end());
    for (const auto& kv : node) {
      const auto key = kv.first.as<std::string>();
      if (!allowed.count(key)) fail(kv.first, "unknown key '" + key + "' in " + section);
    }
  }

  template <class T>
  T get(const YAML::Node& node, const std::string& what) const {
    try {
      return node.as<T>();
    } catch (const YAML::Exception&) {
      fail(node, what + " has the wrong type");
    }
  }

  template <class T>
  T opt(const YAML::Node& map, const char* key, T fallback) const {
    const YAML::Node v = map[key];
    return v ? get<T>(v, key) : fallback;
  }

  YAML::Node need(const YAML::Node& map, const char* key, const std::string& section) const {
    const YAML::Node v = map[key];
    if (!v) fail(map, "missing key '" + std::string(key) + "' in " + section);
    return v;
  }

  Point point(const YAML::Node& node, int n, const std::string& what) const {
    if (!node.IsSequence() || static_cast<int>(node.size()) != n)
      fail(node, what + " must be a list of " + std::to_string(n) + " numbers");
    Point p{};
    for (int d = 0; d < n; ++d) p[d] = get<double>(node[static_cast<std::size_t>(d)], what);
    return p;
  }

  std::vector<double> numbers(const YAML::Node& node, const std::string& what) const {
    if (!node.IsSequence()) fail(node, what + " must be a list");
    std::vector<double> out;
    for (const auto& v : node) out.push_back(get<double>(v, what));
    return out;
  }

  AxisBox box(const YAML::Node& node, int n, const std::string& what) const {
    only(node, {"lo", "hi"}, what);
    return {point(need(node, "lo", what), n, what + ".lo"), point(need(node, "hi", what), n, what + ".hi")};
  }

  Region window(const YAML::Node& node) const {
    const auto w = get<std::string>(node, "window");
    if (w == "w1") return Region::w1;
    if (w == "w2") return Region::w2;
    fail(node, "window must be w1 or w2");
  }

  VectorFieldRule vector_rule(const YAML::Node& node, int n) const {
    only(node, {"preset", "amplitude", "direction", "center", "radius", "amplitude2", "direction2", "center2",
                "radius2", "values"},
         "magnetic");
    VectorFieldRule r;
    r.preset = opt<std::string>(node, "preset", "zero");
    static const std::set<std::string> presets{"zero", "constant_on_ball", "smooth_bump", "two_bump", "values"};
    if (!presets.count(r.preset)) fail(node["preset"], "unknown magnetic preset '" + r.preset + "'");
    r.amplitude = opt<double>(node, "amplitude", 0.0);
    r.amplitude2 = opt<double>(node, "amplitude2", 0.0);
    r.radius = opt<double>(node, "radius", 1.0);
    r.radius2 = opt<double>(node, "radius2", 1.0);
    if (node["direction"]) r.direction = point(node["direction"], n, "direction");
    if (node["direction2"]) r.direction2 = point(node["direction2"], n, "direction2");
    if (node["center"]) r.center = point(node["center"], n, "center");
    if (node["center2"]) r.center2 = point(node["center2"], n, "center2");
    if (!(r.radius > 0.0) || !(r.radius2 > 0.0)) fail(node, "magnetic radii must be positive");
    if (r.preset != "zero" && r.preset != "values" && norm(r.direction) == 0.0)
      fail(node, "magnetic direction must be nonzero");
    if (r.preset == "values") {
      const YAML::Node v = need(node, "values", "magnetic");
      if (!v.IsSequence()) fail(v, "magnetic.values must be a list of vectors");
      for (const auto& e : v) r.values.push_back(point(e, n, "magnetic value"));
    }
    return r;
  }

  ScalarFieldRule scalar_rule(const YAML::Node& node, int n, const std::string& section) const {
    only(node, {"preset", "value", "base", "amplitude", "center", "radius", "values", "lower_bound"}, section);
    ScalarFieldRule r;
    r.preset = opt<std::string>(node, "preset", "constant");
    static const std::set<std::string> presets{"constant", "smooth_bump", "values"};
    if (!presets.count(r.preset)) fail(node["preset"], "unknown " + section + " preset '" + r.preset + "'");
    r.value = opt<double>(node, "value", 1.0);
    if (node["base"]) r.value = get<double>(node["base"], "base");
    r.amplitude = opt<double>(node, "amplitude", 0.0);
    r.radius = opt<double>(node, "radius", 1.0);
    r.lower_bound = opt<double>(node, "lower_bound", 0.5);
    if (node["center"]) r.center = point(node["center"], n, "center");
    if (!(r.radius > 0.0)) fail(node, section + ".radius must be positive");
    if (!(r.lower_bound > 0.0)) fail(node, section + ".lower_bound must be positive");
    if (r.preset == "values") r.values = numbers(need(node, "values", section), section + ".values");
    return r;
  }

 private:
  std::string name_;
};

}  // namespace

double smooth_bump(double t) noexcept {
  if (!(t < 1.0)) return 0.0;
  return std::exp(1.0 - 1.0 / (1.0 - t * t));
}

Scenario parse_scenario(const std::string& text, const std::string& name) {
  Parser p(name);
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    throw ConfigError(name + ":" + std::to_string(e.mark.line + 1) + ": " + e.msg);
  }
  if (!root || !root.IsMap()) throw ConfigError(name + ": scenario must be a YAML mapping");
  p.only(root, {"name", "seed", "geometry", "kernel", "magnetic", "electric", "reference", "exterior", "nonlinearity",
                "quadrature", "solver", "newton", "runge", "inverse", "linearize"},
         "scenario");

  Scenario sc;
  sc.source = text;
  sc.name = p.opt<std::string>(root, "name", name);
  sc.seed = p.opt<std::uint64_t>(root, "seed", 0);

  const YAML::Node g = p.need(root, "geometry", "scenario");
  p.only(g, {"n", "s", "r", "h", "box", "omega", "w1", "w2", "window_shrink_radius"}, "geometry");
  ScenarioGeometry& geo = sc.geometry;
  geo.n = p.get<int>(p.need(g, "n", "geometry"), "n");
  if (geo.n < 1 || geo.n > 3) p.fail(g["n"], "n must be 1, 2 or 3");
  geo.s = p.get<double>(p.need(g, "s", "geometry"), "s");
  geo.r = p.get<double>(p.need(g, "r", "geometry"), "r");
  geo.h = p.get<double>(p.need(g, "h", "geometry"), "h");
  geo.window_shrink_radius = p.opt<double>(g, "window_shrink_radius", 0.0);
  geo.box = p.box(p.need(g, "box", "geometry"), geo.n, "box");
  geo.w1 = p.box(p.need(g, "w1", "geometry"), geo.n, "w1");
  geo.w2 = p.box(p.need(g, "w2", "geometry"), geo.n, "w2");
  const YAML::Node om = p.need(g, "omega", "geometry");
  p.only(om, {"ball", "boxes"}, "omega");
  if (om["ball"] && om["boxes"]) p.fail(om, "omega takes either ball or boxes");
  if (om["ball"]) {
    const YAML::Node b = om["ball"];
    p.only(b, {"center", "radius"}, "omega.ball");
    geo.omega.shape = Ball{p.point(p.need(b, "center", "omega.ball"), geo.n, "center"),
                           p.get<double>(p.need(b, "radius", "omega.ball"), "radius")};
  } else if (om["boxes"]) {
    std::vector<AxisBox> boxes;
    for (const auto& b : om["boxes"]) boxes.push_back(p.box(b, geo.n, "omega box"));
    if (boxes.empty()) p.fail(om["boxes"], "omega.boxes must not be empty");
    geo.omega.shape = std::move(boxes);
  } else {
    p.fail(om, "omega needs ball or boxes");
  }
  try {
    validate(geo);
  } catch (const Error& e) {
    throw ConfigError(name + ":" + std::to_string(g.Mark().line + 1) + ": geometry: " + e.what());
  }

  if (const YAML::Node k = root["kernel"]) {
    p.only(k, {"variant", "beta", "normalization"}, "kernel");
    const auto v = p.opt<std::string>(k, "variant", "power");
    if (v == "power") sc.variant = KernelVariant::power;
    else if (v == "perturbed") sc.variant = KernelVariant::perturbed;
    else p.fail(k["variant"], "kernel.variant must be power or perturbed");
    sc.beta = p.opt<double>(k, "beta", 0.0);
    if (k["normalization"]) sc.normalization = p.get<double>(k["normalization"], "normalization");
    try {
      (void)make_kernel(geo.n, geo.s, sc.variant, sc.beta, sc.normalization);
    } catch (const Error& e) {
      p.fail(k, e.what());
    }
  }

  if (const YAML::Node m = root["magnetic"]) sc.magnetic = p.vector_rule(m, geo.n);
  if (const YAML::Node e = root["electric"]) sc.electric = p.scalar_rule(e, geo.n, "electric");
  sc.reference_electric = sc.electric;
  sc.reference_electric.preset = "constant";
  sc.reference_electric.value = std::max(1.0, sc.electric.lower_bound);
  if (const YAML::Node r = root["reference"]) {
    p.only(r, {"magnetic", "electric"}, "reference");
    if (r["magnetic"]) sc.reference_magnetic = p.vector_rule(r["magnetic"], geo.n);
    if (r["electric"]) sc.reference_electric = p.scalar_rule(r["electric"], geo.n, "reference.electric");
  }

  if (const YAML::Node x = root["exterior"]) {
    p.only(x, {"preset", "window", "amplitude", "values"}, "exterior");
    sc.exterior.preset = p.opt<std::string>(x, "preset", "zero");
    static const std::set<std::string> presets{"zero", "indicator", "bump", "values"};
    if (!presets.count(sc.exterior.preset)) p.fail(x["preset"], "unknown exterior preset '" + sc.exterior.preset + "'");
    if (x["window"]) sc.exterior.window = p.window(x["window"]);
    sc.exterior.amplitude = p.opt<double>(x, "amplitude", 1.0);
    if (sc.exterior.preset == "values") sc.exterior.values = p.numbers(p.need(x, "values", "exterior"), "values");
  }

  if (const YAML::Node nl = root["nonlinearity"]) {
    p.only(nl, {"coefficients", "a1"}, "nonlinearity");
    NonlinearityRule rule;
    rule.coefficients = p.numbers(p.need(nl, "coefficients", "nonlinearity"), "coefficients");
    if (rule.coefficients.empty()) p.fail(nl["coefficients"], "nonlinearity needs at least a_1");
    if (nl["a1"]) {
      const auto src = p.get<std::string>(nl["a1"], "a1");
      if (src == "electric") rule.a1_from_electric = true;
      else if (src != "constant") p.fail(nl["a1"], "nonlinearity.a1 must be constant or electric");
    }
    sc.nonlinearity = rule;
  }

  if (const YAML::Node q = root["quadrature"]) {
    p.only(q, {"subcell_refinement", "tail_rtol"}, "quadrature");
    sc.quadrature.subcell_refinement = p.opt<bool>(q, "subcell_refinement", false);
    sc.quadrature.tail_rtol = p.opt<double>(q, "tail_rtol", 1e-6);
    if (!(sc.quadrature.tail_rtol > 0.0)) p.fail(q, "quadrature.tail_rtol must be positive");
  }

  if (const YAML::Node s = root["solver"]) {
    p.only(s, {"method", "rtol", "max_iterations"}, "solver");
    const auto m = p.opt<std::string>(s, "method", "cholesky");
    if (m == "cholesky") sc.solver.kind = LinearSolverKind::cholesky;
    else if (m == "cg") sc.solver.kind = LinearSolverKind::conjugate_gradient;
    else p.fail(s["method"], "solver.method must be cholesky or cg");
    sc.solver.rtol = p.opt<double>(s, "rtol", 1e-10);
    sc.solver.max_iterations = p.opt<int>(s, "max_iterations", 10000);
  }

  if (const YAML::Node nw = root["newton"]) {
    p.only(nw, {"rtol", "max_iterations", "max_halvings"}, "newton");
    sc.newton.rtol = p.opt<double>(nw, "rtol", 1e-10);
    sc.newton.max_iterations = p.opt<int>(nw, "max_iterations", 50);
    sc.newton.max_halvings = p.opt<int>(nw, "max_halvings", 6);
  }

  if (const YAML::Node r = root["runge"]) {
    p.only(r, {"alphas", "norm_cap"}, "runge");
    if (r["alphas"]) sc.runge.alphas = p.numbers(r["alphas"], "runge.alphas");
    for (double a : sc.runge.alphas)
      if (!(a >= 0.0)) p.fail(r["alphas"], "runge alphas must be nonnegative");
    sc.runge.norm_cap = p.opt<double>(r, "norm_cap", 1e6);
  }
  sc.inverse.runge = sc.runge;

  if (const YAML::Node iv = root["inverse"]) {
    p.only(iv, {"mode", "eps", "retry_wider", "residual_cap", "clamp_tolerance", "component_bound", "q_iterations",
                "q_update_tolerance"},
           "inverse");
    const auto mode = p.opt<std::string>(iv, "mode", "verification");
    if (mode == "verification") sc.inverse.mode = ReconstructionMode::verification;
    else if (mode == "data-only" || mode == "data_only") sc.inverse.mode = ReconstructionMode::data_only;
    else p.fail(iv["mode"], "inverse.mode must be verification or data-only");
    sc.inverse.eps = p.opt<double>(iv, "eps", 0.0);
    sc.inverse.retry_wider = p.opt<bool>(iv, "retry_wider", true);
    sc.inverse.residual_cap = p.opt<double>(iv, "residual_cap", 0.5);
    sc.inverse.clamp_tolerance = p.opt<double>(iv, "clamp_tolerance", 1e-9);
    sc.inverse.component_bound = p.opt<double>(iv, "component_bound", 0.0);
    sc.inverse.q_iterations = p.opt<int>(iv, "q_iterations", 5);
    sc.inverse.q_update_tolerance = p.opt<double>(iv, "q_update_tolerance", 1e-3);
  }

  if (const YAML::Node l = root["linearize"]) {
    p.only(l, {"eps"}, "linearize");
    if (l["eps"]) sc.linearize_eps = p.numbers(l["eps"], "linearize.eps");
  }
  return sc;
}

Scenario load_scenario(const std::filesystem::path& path) {
  return parse_scenario(read_text(path), path.filename().string());
}

KernelSpec scenario_kernel(const Scenario& sc) {
  return make_kernel(sc.geometry.n, sc.geometry.s, sc.variant, sc.beta, sc.normalization);
}

std::shared_ptr<const Grid> scenario_grid(const Scenario& sc) {
  return std::make_shared<const Grid>(build_grid(sc.geometry));
}

namespace {

Vec unit(const Vec& v) {
  const double l = norm(v);
  return {v[0] / l, v[1] / l, v[2] / l};
}

Vec scaled(const Vec& v, double a) { return {a * v[0], a * v[1], a * v[2]}; }

}  // namespace

MagneticPotential build_magnetic(const VectorFieldRule& rule, const Grid& grid) {
  if (rule.preset == "zero") return MagneticPotential(grid);
  if (rule.preset == "values") {
    const auto omega = grid.nodes_in(Region::omega);
    if (rule.values.size() != omega.size())
      throw ConfigError("magnetic.values: expected " + std::to_string(omega.size()) + " omega-node vectors, got " +
                        std::to_string(rule.values.size()));
    std::vector<Vec> values(static_cast<std::size_t>(grid.size()), Vec{});
    for (std::size_t k = 0; k < omega.size(); ++k) values[static_cast<std::size_t>(omega[k])] = rule.values[k];
    return MagneticPotential(grid, std::move(values));
  }
  const Vec d1 = unit(rule.direction);
  auto radial = [](const Point& p, const Point& c) { return std::sqrt(distance2(p, c)); };
  if (rule.preset == "constant_on_ball")
    return MagneticPotential::sample(grid, [&](const Point& p) {
      return radial(p, rule.center) < rule.radius ? scaled(d1, rule.amplitude) : Vec{};
    });
  if (rule.preset == "smooth_bump")
    return MagneticPotential::sample(grid, [&](const Point& p) {
      return scaled(d1, rule.amplitude * smooth_bump(radial(p, rule.center) / rule.radius));
    });
  const Vec d2 = unit(rule.direction2);
  return MagneticPotential::sample(grid, [&](const Point& p) {
    const Vec a = scaled(d1, rule.amplitude * smooth_bump(radial(p, rule.center) / rule.radius));
    const Vec b = scaled(d2, rule.amplitude2 * smooth_bump(radial(p, rule.center2) / rule.radius2));
    return Vec{a[0] + b[0], a[1] + b[1], a[2] + b[2]};
  });
}

ElectricPotential build_electric(const ScalarFieldRule& rule, const Grid& grid) {
  if (rule.preset == "constant") return ElectricPotential::constant(grid, rule.value, rule.lower_bound);
  if (rule.preset == "values") {
    const auto omega = grid.nodes_in(Region::omega);
    if (rule.values.size() != omega.size())
      throw ConfigError("electric.values: expected " + std::to_string(omega.size()) + " omega-node values, got " +
                        std::to_string(rule.values.size()));
    std::vector<double> values(static_cast<std::size_t>(grid.size()), 0.0);
    for (std::size_t k = 0; k < omega.size(); ++k) values[static_cast<std::size_t>(omega[k])] = rule.values[k];
    return ElectricPotential(grid, std::move(values), rule.lower_bound);
  }
  return ElectricPotential::sample(
      grid,
      [&](const Point& p) {
        return rule.value + rule.amplitude * smooth_bump(std::sqrt(distance2(p, rule.center)) / rule.radius);
      },
      rule.lower_bound);
}

DiscreteFunction build_exterior(const ExteriorRule& rule, const Grid& grid) {
  DiscreteFunction g = DiscreteFunction::Zero(grid.size());
  if (rule.preset == "zero") return g;
  const auto nodes = grid.nodes_in(rule.window);
  if (rule.preset == "indicator") {
    for (int i : nodes) g(i) = rule.amplitude;
  } else if (rule.preset == "values") {
    if (rule.values.size() != nodes.size())
      throw ConfigError("exterior.values: expected " + std::to_string(nodes.size()) + " window-node values, got " +
                        std::to_string(rule.values.size()));
    for (std::size_t k = 0; k < nodes.size(); ++k) g(nodes[k]) = rule.values[k];
  } else {
    // Bump centered in the window's bounding box of node centers.
    Point lo = grid.node(nodes.front()), hi = lo;
    for (int i : nodes)
      for (int d = 0; d < grid.dimension(); ++d) {
        lo[d] = std::min(lo[d], grid.node(i)[d]);
        hi[d] = std::max(hi[d], grid.node(i)[d]);
      }
    const Point c = midpoint(lo, hi);
    double radius = 0.0;
    for (int d = 0; d < grid.dimension(); ++d) radius = std::max(radius, 0.5 * (hi[d] - lo[d]));
    radius += grid.spacing();
    for (int i : nodes) g(i) = rule.amplitude * smooth_bump(std::sqrt(distance2(grid.node(i), c)) / radius);
  }
  return g;
}

Nonlinearity build_nonlinearity(const Scenario& sc, const Grid& grid) {
  if (!sc.nonlinearity) throw ConfigError(sc.name + ": this command needs a nonlinearity section");
  const NonlinearityRule& rule = *sc.nonlinearity;
  std::vector<std::vector<double>> coeffs(rule.coefficients.size(),
                                          std::vector<double>(static_cast<std::size_t>(grid.size()), 0.0));
  const ElectricPotential q = build_electric(sc.electric, grid);
  for (std::size_t k = 0; k < rule.coefficients.size(); ++k)
    for (int i : grid.nodes_in(Region::omega))
      coeffs[k][static_cast<std::size_t>(i)] = (k == 0 && rule.a1_from_electric) ? q.at(i) : rule.coefficients[k];
  return Nonlinearity(grid, std::move(coeffs), sc.electric.lower_bound);
}

}  // namespace fracmag
