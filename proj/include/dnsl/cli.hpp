#pragma once

#include "dnsl/config.hpp"
#include "dnsl/dynamics.hpp"
#include "dnsl/report.hpp"

namespace dnsl {

/// Exit codes of the experiment drivers.
enum ExitCode { kOk = 0, kInvalid = 1, kFlagged = 2 };

FlowModel model_from_config(const RunConfig& c);

// Per-subcommand drivers; each writes its artifacts under c.run.out and
// returns an ExitCode. `quiet` suppresses the stdout summary.
int run_check_forcing(const RunConfig& c, bool quiet = false);
int run_simulate(const RunConfig& c, bool quiet = false);
int run_tangent_check(const RunConfig& c, bool quiet = false);
int run_malliavin(const RunConfig& c, const std::string& sub_mode, bool quiet = false);
int run_fk_spectrum(const RunConfig& c, bool quiet = false);
int run_feller_check(const RunConfig& c, bool quiet = false);
int run_ldp(const RunConfig& c, bool quiet = false);
int run_steer(const RunConfig& c, bool quiet = false);

/// Full argv dispatch used by the command-line tool.
int run_cli(int argc, char** argv);

} // namespace dnsl
