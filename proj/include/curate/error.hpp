// Copyright 2026 The Curate Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace curate {

/// Base class for every error raised by the engine.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input or a broken invariant in user-supplied data or config.
/// The CLI maps this to exit code 1.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// A remote service answered, but not in the agreed wire format.
class ProtocolError : public Error {
 public:
  using Error::Error;
};

/// A remote service could not be reached after all retries.
class TransportError : public Error {
 public:
  using Error::Error;
};

/// A pipeline stage failed hard on one clip. The CLI maps this to exit code 2.
class StageError : public Error {
 public:
  StageError(std::string stage, std::string clip_id, const std::string& what)
      : Error("stage " + stage + (clip_id.empty() ? "" : ", clip " + clip_id) + ": " + what),
        stage_(std::move(stage)),
        clip_id_(std::move(clip_id)) {}

  const std::string& stage() const { return stage_; }
  const std::string& clip_id() const { return clip_id_; }

 private:
  std::string stage_;
  std::string clip_id_;
};

}  // namespace curate
