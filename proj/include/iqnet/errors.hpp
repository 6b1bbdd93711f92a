#pragma once

#include <stdexcept>
#include <string>

namespace iqnet {

// Machine-checkable failure categories surfaced by the library.  Each value
// corresponds to a documented error contract of some operation; the textual
// message carries the specifics.
enum class ErrorCode {
    asymmetric,
    nonpositive_center,
    negative_weight,
    supercritical,
    above_threshold,
    degenerate,
    torus_too_small,
    unsupported_dimension,
    site_out_of_range,
    empty_window,
    frozen_site,
    clock_regression,
    ordering_violation,
    cluster_cap_exceeded,
    not_converged,
    insufficient_batches,
    step_too_large,
    parse_error,
    semantic_error,
};

const char* error_code_name(ErrorCode code);

class IqnetError : public std::runtime_error {
public:
    IqnetError(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(error_code_name(code)) + ": " + message),
          code_(code) {}

    ErrorCode code() const { return code_; }

private:
    ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
    throw IqnetError(code, message);
}

} // namespace iqnet
