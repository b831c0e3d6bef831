#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace lddm {

// Every failure raised by the library carries one of these kinds. The CLI maps
// them onto distinct process exit codes.
enum class ErrorKind {
    grid_mismatch,
    invalid_argument,
    non_convergent,
    not_psd,
    degenerate_partition,
    residual_too_large,
    missing_momenta,
    non_finite,
    io,
    bad_magic,
    malformed_header,
    header_mismatch,
    truncated_payload,
    unknown_key,
    bad_value,
    missing_kernel,
};

std::string_view to_string(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string &what)
        : std::runtime_error(what), kind_(kind) {}

    [[nodiscard]] ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

} // namespace lddm
