#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "fracmag/scenario.hpp"

namespace fracmag::cli {

struct Context {
  Scenario scenario;
  std::filesystem::path out;
  int threads = 0;
  std::optional<ReconstructionMode> mode;
  /// DtN CSV to invert instead of forward-simulated data (sidecar: same stem, .json).
  std::optional<std::filesystem::path> data;
  bool dump_form = false;
};

/// Each command returns 0 when every reported invariant holds, 1 otherwise;
/// hard failures propagate as fracmag::Error.
int cmd_forward(const Context& ctx);
int cmd_dtn(const Context& ctx);
int cmd_identity(const Context& ctx);
int cmd_runge(const Context& ctx);
int cmd_invert(const Context& ctx);
int cmd_linearize(const Context& ctx);
int cmd_report(const Context& ctx);

}  // namespace fracmag::cli
