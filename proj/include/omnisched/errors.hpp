// Copyright 2026 The Omnisched Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace omnisched {

// Base class for everything thrown by this library.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Invalid input: bad config values, malformed files, violated preconditions.
// The CLI maps these to exit code 1. `code` is a stable machine-readable
// identifier, e.g. "SampleTooLarge" or "UnknownPolicy".
class ValidationError : public Error {
public:
    ValidationError(std::string code, const std::string& msg)
        : Error(code + ": " + msg), code_(std::move(code)) {}
    const std::string& code() const { return code_; }

private:
    std::string code_;
};

// A broken internal invariant (a bug, not a user error). CLI exit code 2.
class InvariantError : public Error {
public:
    InvariantError(std::string code, const std::string& msg)
        : Error(code + ": " + msg), code_(std::move(code)) {}
    const std::string& code() const { return code_; }

private:
    std::string code_;
};

}  // namespace omnisched
