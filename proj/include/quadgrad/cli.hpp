#pragma once

#include <iosfwd>

namespace quadgrad {

/// Parses `quadgrad <command> --config <path> [--seed <u64>] [--out <dir>]`,
/// runs the command and returns its exit code. The report goes to `out`,
/// warnings and errors to `err`.
int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace quadgrad
