// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace fusewire {

/// Base class for all library errors.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Bad or missing configuration (maps to CLI exit code 2).
struct ConfigError : Error {
    using Error::Error;
};

/// Caller violated an operation precondition.
struct InvalidInput : Error {
    using Error::Error;
};

/// A pipeline invariant was broken at runtime (maps to CLI exit code 1).
struct InvariantBreach : Error {
    using Error::Error;
};

/// Remote/fixture/replay backend failure. Pipeline stages catch these and
/// degrade instead of aborting the sample.
struct BackendError : Error {
    using Error::Error;
};

/// Fixture lookup missed; carries the digest so the fixture can be authored.
struct FixtureMissError : BackendError {
    FixtureMissError(const std::string& store, std::string digest_hex)
        : BackendError("fixture miss in " + store + ": " + digest_hex),
          digest(std::move(digest_hex)) {}
    std::string digest;
};

/// Replay consumed a response whose recorded request differs from the live one.
struct ReplayDivergenceError : BackendError {
    ReplayDivergenceError(std::string expected_digest, std::string actual_digest)
        : BackendError("replay divergence: recorded request " + expected_digest +
                       " but live request " + actual_digest),
          expected(std::move(expected_digest)),
          actual(std::move(actual_digest)) {}
    std::string expected;
    std::string actual;
};

}  // namespace fusewire
