#include <iostream>
#include <map>
#include <string>

#include <boost/program_options.hpp>

#include "commands.hpp"
#include "fracmag/errors.hpp"
#include "fracmag/version.hpp"

namespace po = boost::program_options;

namespace {

constexpr int kExitInvariant = 1;
constexpr int kExitUsage = 2;

int exit_code(fracmag::ErrorKind kind) {
  switch (kind) {
    case fracmag::ErrorKind::config: return 2;
    case fracmag::ErrorKind::precondition: return 3;
    case fracmag::ErrorKind::numeric: return 4;
    case fracmag::ErrorKind::hypothesis: return 5;
    case fracmag::ErrorKind::domain: return 6;
  }
  return kExitInvariant;
}

using Command = int (*)(const fracmag::cli::Context&);

const std::map<std::string, Command>& commands() {
  static const std::map<std::string, Command> table{
      {"forward", fracmag::cli::cmd_forward},     {"dtn", fracmag::cli::cmd_dtn},
      {"identity", fracmag::cli::cmd_identity},   {"runge", fracmag::cli::cmd_runge},
      {"invert", fracmag::cli::cmd_invert},       {"linearize", fracmag::cli::cmd_linearize},
      {"report", fracmag::cli::cmd_report},
  };
  return table;
}

void usage(std::ostream& os, const po::options_description& opts) {
  os << "usage: fracmag <forward|dtn|identity|runge|invert|linearize|report> --scenario FILE [options]\n\n"
     << opts << '\n'
     << "exit codes: 0 ok, 1 invariant failed, 2 config, 3 precondition, 4 numeric, 5 hypothesis, 6 domain\n";
}

}  // namespace

int main(int argc, char** argv) {
  po::options_description opts("options");
  opts.add_options()
      ("help,h", "show this help")
      ("version", "print the version")
      ("scenario", po::value<std::string>(), "scenario YAML file")
      ("out", po::value<std::string>()->default_value("out"), "output directory")
      ("threads", po::value<int>()->default_value(0), "worker threads (0 = all cores)")
      ("mode", po::value<std::string>(), "reconstruction mode: verification | data-only")
      ("data", po::value<std::string>(), "invert: DtN CSV to use instead of simulated data")
      ("dump-form", po::bool_switch(), "forward: also write the assembled form as form.bin");
  po::options_description hidden;
  hidden.add_options()("command", po::value<std::string>());
  po::options_description all;
  all.add(opts).add(hidden);
  po::positional_options_description pos;
  pos.add("command", 1);

  po::variables_map vm;
  try {
    po::store(po::command_line_parser(argc, argv).options(all).positional(pos).run(), vm);
    po::notify(vm);
  } catch (const po::error& e) {
    std::cerr << "fracmag: " << e.what() << '\n';
    usage(std::cerr, opts);
    return kExitUsage;
  }
  if (vm.count("help")) {
    usage(std::cout, opts);
    return 0;
  }
  if (vm.count("version")) {
    std::cout << "fracmag " << fracmag::version_string() << '\n';
    return 0;
  }
  if (!vm.count("command") || !vm.count("scenario")) {
    usage(std::cerr, opts);
    return kExitUsage;
  }
  const auto it = commands().find(vm["command"].as<std::string>());
  if (it == commands().end()) {
    std::cerr << "fracmag: unknown command '" << vm["command"].as<std::string>() << "'\n";
    return kExitUsage;
  }

  try {
    fracmag::cli::Context ctx;
    ctx.scenario = fracmag::load_scenario(vm["scenario"].as<std::string>());
    ctx.out = vm["out"].as<std::string>();
    ctx.threads = vm["threads"].as<int>();
    if (ctx.threads < 0) throw fracmag::ConfigError("--threads must be >= 0");
    if (vm.count("mode")) {
      const auto m = vm["mode"].as<std::string>();
      if (m == "verification") ctx.mode = fracmag::ReconstructionMode::verification;
      else if (m == "data-only") ctx.mode = fracmag::ReconstructionMode::data_only;
      else throw fracmag::ConfigError("--mode must be verification or data-only, got '" + m + "'");
    }
    if (vm.count("data")) ctx.data = vm["data"].as<std::string>();
    ctx.dump_form = vm["dump-form"].as<bool>();
    return it->second(ctx);
  } catch (const fracmag::SmallnessExceeded& e) {
    std::cerr << "fracmag: numeric error: " << e.what() << " (last residual " << e.last_residual()
              << ", largest converged data scale " << e.converged_scale() << ")\n";
    return exit_code(e.kind());
  } catch (const fracmag::Error& e) {
    std::cerr << "fracmag: " << fracmag::to_string(e.kind()) << " error: " << e.what() << '\n';
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "fracmag: " << e.what() << '\n';
    return kExitInvariant;
  }
}
