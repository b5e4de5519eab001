#pragma once

// Integral identity, window-term decomposition, recovery of the kernel
// difference G on omega cell pairs, cosine probing of A (up to sign) and
// recovery of q.

#include <array>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "fracmag/dtn.hpp"
#include "fracmag/runge.hpp"

namespace fracmag {

struct WindowTerms {
  double I1 = 0.0;  // x in omega, y in omega (includes same-cell differences)
  double I2 = 0.0;  // x in omega, y in W1
  double I3 = 0.0;  // x in W2, y in omega
  double I4 = 0.0;  // x in W2, y in W1
  double total() const noexcept { return I1 + I2 + I3 + I4; }
};

struct IdentityReport {
  double lhs = 0.0;
  double rhs = 0.0;
  WindowTerms terms;
  /// sum_omega (q2 - q1) u1 u2 vol, subtracted from the double sum.
  double mass_term = 0.0;
  double residual = 0.0;

  /// max(|lhs|, |rhs|, floor).
  double scale(double floor = 1e-12) const noexcept;
};

/// Double sums of vol^2 * 2 (R_{A2} - R_{A1}) K u1(y) u2(x) over the region
/// pairs, evaluated directly from the pair quadrature (not from the forms).
WindowTerms window_terms(const LinearModel& model1, const LinearModel& model2, const DiscreteFunction& u1,
                         const DiscreteFunction& u2);

/// lhs = <Lambda_1 g1, g2> - <Lambda_2 g2, g1>; rhs from the solutions.
IdentityReport check_identity(const LinearModel& model1, const LinearModel& model2, const DiscreteFunction& g1,
                              const DiscreteFunction& g2);

enum class ReconstructionMode { verification, data_only };
const char* to_string(ReconstructionMode mode) noexcept;

struct InverseSettings {
  ReconstructionMode mode = ReconstructionMode::verification;
  /// Probe offset in physical units; 0 selects 2h. Retries use twice this.
  double eps = 0.0;
  bool retry_wider = true;
  /// Runge residual above which a G sample or q cell is UNRELIABLE.
  double residual_cap = 0.5;
  /// Clamp excess of the recovered cosine tolerated before flagging.
  double clamp_tolerance = 1e-9;
  /// Configured bound on every component of A; 0 selects pi / (8 sqrt(n) r).
  double component_bound = 0.0;
  RungeSettings runge;
  int q_iterations = 5;
  double q_update_tolerance = 1e-3;
  int threads = 0;
};

/// Runge approximations of every normalized omega cell indicator from one window.
class CellRunge {
 public:
  CellRunge(const LinearModel& model, Region window, const RungeSettings& settings, int threads = 0);

  const RungeResult& at(int omega_local) const { return results_[static_cast<std::size_t>(omega_local)]; }
  const RungeOperator& op() const noexcept { return op_; }
  double vol() const noexcept { return vol_; }
  double solution_norm(int omega_local) const;

 private:
  RungeOperator op_;
  double vol_;
  std::vector<RungeResult> results_;
};

struct GSample {
  int x_node = -1;  // approximated by u2 (W2 side)
  int y_node = -1;  // approximated by u1 (W1 side)
  double value = 0.0;
  double residual1 = 0.0;
  double residual2 = 0.0;
  double bound = 0.0;
  bool reliable = true;
};

struct GField {
  std::vector<GSample> samples;
  double young_constant = 0.0;

  const GSample* find(int x_node, int y_node) const;
  int unreliable_count() const;
};

/// max row sum of |(F1 - F2 + Q1 - Q2)| over omega, divided by vol: an
/// L2(omega) operator-norm bound for the identity's interior kernel.
double young_constant(const LinearModel& model1, const LinearModel& model2);

/// G(x, y) ~ <(Lambda_1 - Lambda_2) g1, g2> / vol with u1 ~ phi_y (side 1,
/// window W1) and u2 ~ phi_x (side 2, window W2).
GField recover_G(const Eigen::MatrixXd& dtn_diff, const Grid& grid, const CellRunge& side1, const CellRunge& side2,
                 const std::vector<std::pair<int, int>>& pairs, double young, double residual_cap);

struct MagnitudeProbe {
  std::array<double, 3> magnitude{};
  std::array<double, 3> error_bound{};
  /// Recovered cosine before clamping.
  std::array<double, 3> cosine{};
  bool clamped = false;
  bool covered = true;
};

/// |A^(k)(x0)| = arccos(R_{A1}) / (2 eps) with R_{A1} = R_{A2} - G / (2K) at
/// the probe pair x0 +- eps e_k. `offset` is eps in lattice steps.
MagnitudeProbe recover_A_magnitudes(const GField& G, const Grid& grid, const KernelSpec& spec,
                                    const MagneticPotential& reference, int x0_node, int offset,
                                    double clamp_tolerance);

enum class SignRelation { agreeing, opposing, undetermined };

struct SignPattern {
  std::array<int, 3> sign{};
  /// relation[k][l] for k < l; undetermined when a magnitude is below threshold.
  std::array<std::array<SignRelation, 3>, 3> relation{};
  bool ambiguous = false;
  bool covered = true;
};

/// Relative signs from the diagonal probes x0 +- eps (e_k + e_l), anchored at
/// the largest component (sign +1); components below `zero_threshold` get 0.
SignPattern recover_A_signs(const MagnitudeProbe& magnitudes, const GField& G, const Grid& grid,
                            const KernelSpec& spec, const MagneticPotential& reference, int x0_node, int offset,
                            const std::array<double, 3>& zero_threshold);

struct QRecovery {
  std::vector<double> q_est;
  std::vector<bool> unreliable;
  int iterations = 0;
  bool converged = true;
  double last_update = 0.0;
};

/// Electric potential from the DtN data given a magnetic potential. In
/// verification mode side 1 uses the unknown model's own solver; in data-only
/// mode both sides use the current estimate and the step is iterated.
QRecovery recover_q(const DtnMatrix& data, const MagneticPotential& A_known, const ElectricPotential& q0,
                    const LinearModel& reference, const LinearModel* truth, const InverseSettings& settings);

struct PointEstimate {
  int node = -1;
  int offset = 0;
  MagnitudeProbe magnitudes;
  SignPattern signs;
  Vec estimate{};
};

struct ReconstructionReport {
  ReconstructionMode mode = ReconstructionMode::verification;
  std::string sign_convention;
  std::string mass_term = "q*u*h";
  double eps = 0.0;
  std::vector<Vec> A_est;
  std::vector<double> q_est;
  std::vector<PointEstimate> points;
  std::vector<bool> q_unreliable;
  int ambiguous_points = 0;
  int uncovered_points = 0;
  int unreliable_pairs = 0;
  int clamped_points = 0;
  int q_iterations = 0;
  bool q_converged = true;
  double young_constant = 0.0;
  double max_runge_residual = 0.0;
  MidpointWitness witness;
  /// Errors against ground truth when it is supplied.
  std::optional<double> A_error;
  std::optional<int> A_sign;
  std::optional<double> q_error;
  /// Set by the linearized pipeline.
  std::optional<double> linearization_bias;
  std::optional<double> linearization_eps;
  bool smoke_test_only = false;
};

struct GroundTruth {
  const MagneticPotential* A = nullptr;
  const ElectricPotential* q = nullptr;
};

/// Full pipeline: G against the reference (A = 0) model, magnitudes, signs,
/// A_est, then q given A_est. `truth_model` is required in verification mode
/// (its solver provides the side-1 Runge data).
ReconstructionReport reconstruct(const DtnMatrix& data, const LinearModel& reference, const LinearModel* truth_model,
                                 const InverseSettings& settings, GroundTruth truth = {});

/// Error tables: min over sigma of sup |A_est - sigma A| / sup |A| over the
/// covered, unambiguous probe points, and sup |q_est - q| / sup |q| on omega.
void attach_errors(ReconstructionReport& report, const Grid& grid, const GroundTruth& truth);

std::string report_json(const ReconstructionReport& report, const Grid& grid);
/// JSON report plus A_est / q_est node CSV in the given directory.
void write_report(const ReconstructionReport& report, const Grid& grid, const std::string& directory,
                  std::vector<std::string>* written = nullptr);

}  // namespace fracmag
