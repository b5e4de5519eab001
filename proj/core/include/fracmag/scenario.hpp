#pragma once

// Scenario files: one YAML document drives every command. Sections a command
// does not need are parsed and validated but otherwise ignored.

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "fracmag/inverse.hpp"
#include "fracmag/semilinear.hpp"

namespace fracmag {

/// Closed-form vector field rule (presets) or explicit per-omega-node values.
struct VectorFieldRule {
  std::string preset = "zero";  // zero | constant_on_ball | smooth_bump | two_bump | values
  double amplitude = 0.0;
  Vec direction{1.0, 0.0, 0.0};
  Point center{};
  double radius = 1.0;
  Vec direction2{0.0, 1.0, 0.0};
  Point center2{};
  double radius2 = 1.0;
  double amplitude2 = 0.0;
  std::vector<Vec> values;
};

struct ScalarFieldRule {
  std::string preset = "constant";  // constant | smooth_bump | values
  double value = 1.0;
  double amplitude = 0.0;
  Point center{};
  double radius = 1.0;
  std::vector<double> values;
  double lower_bound = 0.5;
};

struct ExteriorRule {
  std::string preset = "zero";  // zero | indicator | bump | values
  Region window = Region::w1;
  double amplitude = 1.0;
  std::vector<double> values;
};

struct NonlinearityRule {
  /// Constant a_1..a_K; when a1_from_electric is set, a_1 is the electric field.
  std::vector<double> coefficients;
  bool a1_from_electric = false;
};

struct Scenario {
  std::string name = "scenario";
  std::string source;
  std::uint64_t seed = 0;
  ScenarioGeometry geometry;
  KernelVariant variant = KernelVariant::power;
  double beta = 0.0;
  std::optional<double> normalization;
  VectorFieldRule magnetic;
  ScalarFieldRule electric;
  VectorFieldRule reference_magnetic;
  ScalarFieldRule reference_electric;
  ExteriorRule exterior;
  std::optional<NonlinearityRule> nonlinearity;
  QuadratureSettings quadrature;
  SolverSettings solver;
  NewtonSettings newton;
  RungeSettings runge;
  InverseSettings inverse;
  std::vector<double> linearize_eps{1.0, 0.5, 0.25, 0.125};
};

/// Throws ConfigError with "name:line:" prefixes for schema violations.
Scenario parse_scenario(const std::string& text, const std::string& name = "scenario");
Scenario load_scenario(const std::filesystem::path& path);

/// Smooth bump exp(1 - 1/(1 - t^2)) for t < 1, else 0 (value 1 at t = 0).
double smooth_bump(double t) noexcept;

KernelSpec scenario_kernel(const Scenario& sc);
std::shared_ptr<const Grid> scenario_grid(const Scenario& sc);
MagneticPotential build_magnetic(const VectorFieldRule& rule, const Grid& grid);
ElectricPotential build_electric(const ScalarFieldRule& rule, const Grid& grid);
DiscreteFunction build_exterior(const ExteriorRule& rule, const Grid& grid);
Nonlinearity build_nonlinearity(const Scenario& sc, const Grid& grid);

}  // namespace fracmag
