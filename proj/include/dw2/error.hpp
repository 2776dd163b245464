// Copyright 2026 the dw2 authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace dw2 {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Malformed or invalid wall configuration. Carries the offending key in the message.
struct ConfigError : Error {
  using Error::Error;
};

// Wire-format violation: truncated frame, unknown tag, length mismatch.
// Signals protocol corruption; the connection must be aborted.
struct ProtocolError : Error {
  using Error::Error;
};

// Corrupt payload or dimension mismatch. Aborts the tile, not the connection.
struct CodecError : Error {
  using Error::Error;
};

struct SocketError : Error {
  using Error::Error;
};

// Session-level failure seen by the client library (service gone, handshake rejected).
struct SessionError : Error {
  using Error::Error;
};

}  // namespace dw2
