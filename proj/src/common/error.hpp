// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The asr-triage Authors

#pragma once

#include <stdexcept>
#include <string>

namespace asr {

enum class ErrorCode {
    InvalidArgument = 1,
    Io,
    Parse,
    Validation,
    Config,
    NotFound,
    Conflict,
    Unavailable,
    PayloadTooLarge,
    Internal,
};

/// Base exception for everything the engine throws on purpose. The code
/// survives the trip across the C boundary.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

inline Error invalid_argument(const std::string& m) { return {ErrorCode::InvalidArgument, m}; }
inline Error io_error(const std::string& m) { return {ErrorCode::Io, m}; }
inline Error parse_error(const std::string& m) { return {ErrorCode::Parse, m}; }
inline Error validation_error(const std::string& m) { return {ErrorCode::Validation, m}; }
inline Error config_error(const std::string& m) { return {ErrorCode::Config, m}; }
inline Error not_found(const std::string& m) { return {ErrorCode::NotFound, m}; }
inline Error conflict(const std::string& m) { return {ErrorCode::Conflict, m}; }
inline Error unavailable(const std::string& m) { return {ErrorCode::Unavailable, m}; }

}  // namespace asr
