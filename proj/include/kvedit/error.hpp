// Copyright 2026 The kvedit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace kvedit {

enum class ErrorKind {
    config,             // invalid configuration or plan
    usage,              // bad command line
    spec,               // invalid fixture / scene specification
    injection,          // KV injection shape mismatch
    numerical,          // NaN/Inf during denoising
    domain,             // argument outside a formula's domain
    undefined_correlation,
    no_edit,            // object addition with an empty delta
    degenerate_region,  // empty foreground or background
    missing_data,       // missing probe, capture or report field
    io,
    format,
};

/// Stable, machine-parsable name for an error kind ("config-error", ...).
std::string_view error_kind_name(ErrorKind kind);

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message) : std::runtime_error(message), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
    throw Error(kind, message);
}

inline void require(bool condition, ErrorKind kind, const std::string& message) {
    if (!condition) {
        throw Error(kind, message);
    }
}

}  // namespace kvedit
