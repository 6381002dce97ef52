#pragma once

#include <iosfwd>

#include "pedpred/error.hpp"

namespace pedpred {

/// 0 success, 2 input error, 3 empty/insufficient data, 4 numerical failure.
int exit_code(ErrorCode code);

/// Entry point of the `pedpred` tool: subcommands predict, evaluate, bench,
/// synth.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace pedpred
