#pragma once

#include <iosfwd>

namespace gsedit {

/// Exit statuses of the command-line tool.
inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;  // bad arguments, config or input files
inline constexpr int kExitRuntime = 2;     // oracle failures, I/O errors, empty surfaces

/// Entry point of the `gsedit` tool. Subcommands: reconstruct, edit, extract-mesh,
/// refine-texture, render, metrics, pipeline. Results go to files; progress and
/// errors go to `err`, --print-config and --help to `out`.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

} // namespace gsedit
