#pragma once

#include <ostream>
#include <string>
#include <vector>

#include "lddm/error.hpp"

namespace lddm::cli {

// Process exit codes, one per error class.
enum ExitCode : int {
    ok = 0,
    usage = 1,
    io_error = 2,
    format_error = 3,
    config_error = 4,
    numerical_error = 5,
    validation_error = 6,
};

int exit_code_for(ErrorKind kind) noexcept;

// Runs one command line (args[0] is the program name). Every run writes
// exactly one summary line to `out`, ending in "OK" or "error <code>".
// Usage help, when requested or on a parse failure, goes to `err`.
int run(const std::vector<std::string> &args, std::ostream &out, std::ostream &err);

} // namespace lddm::cli
