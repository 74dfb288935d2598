#pragma once

// Batch commands. Each writes its CSV artifacts and manifest.json into
// config.output_dir and returns a process exit code:
//   0 success, 2 configuration error, 3 data error, 4 numerical failure,
//   1 anything else.
// The manifest is written on failure too, with an "error" object that is
// also printed to `err` as one line of JSON.

#include <exception>
#include <iosfwd>
#include <string>

#include "cdr/io.hpp"

namespace cdr {

enum class Command { kFit, kBands, kDecompose, kSimulate };

std::string command_name(Command c);

int run(Command command, const RunConfig& config, std::ostream& err);

// Parses the configuration first; a parse failure still leaves a manifest in
// output_dir or the default directory.
int run(Command command, const ConfigMap& config, std::ostream& err);

inline int run_fit(const RunConfig& c, std::ostream& err) { return run(Command::kFit, c, err); }
inline int run_bands(const RunConfig& c, std::ostream& err) { return run(Command::kBands, c, err); }
inline int run_decompose(const RunConfig& c, std::ostream& err) { return run(Command::kDecompose, c, err); }
inline int run_simulate(const RunConfig& c, std::ostream& err) { return run(Command::kSimulate, c, err); }

int exit_code_for(const std::exception& e);

// {"class": ..., "message": ..., "exit_code": ..., optional "row" / "cell"}.
std::string error_json(const std::exception& e);

}  // namespace cdr
