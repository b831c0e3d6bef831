#include "lddm/error.hpp"

namespace lddm {

std::string_view to_string(ErrorKind kind) noexcept {
    switch (kind) {
    case ErrorKind::grid_mismatch: return "GridMismatch";
    case ErrorKind::invalid_argument: return "InvalidArgument";
    case ErrorKind::non_convergent: return "NonConvergent";
    case ErrorKind::not_psd: return "NotPSD";
    case ErrorKind::degenerate_partition: return "DegeneratePartition";
    case ErrorKind::residual_too_large: return "ResidualTooLarge";
    case ErrorKind::missing_momenta: return "MissingMomenta";
    case ErrorKind::non_finite: return "NonFinite";
    case ErrorKind::io: return "IOError";
    case ErrorKind::bad_magic: return "BadMagic";
    case ErrorKind::malformed_header: return "MalformedHeader";
    case ErrorKind::header_mismatch: return "HeaderMismatch";
    case ErrorKind::truncated_payload: return "TruncatedPayload";
    case ErrorKind::unknown_key: return "UnknownKey";
    case ErrorKind::bad_value: return "BadValue";
    case ErrorKind::missing_kernel: return "MissingKernel";
    }
    return "Unknown";
}

} // namespace lddm
