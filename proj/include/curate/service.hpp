// Copyright 2026 The Curate Authors
// SPDX-License-Identifier: Apache-2.0
//
// JSON-over-HTTP transport for the external model services (embedding
// provider, proposer, scorer, alignment verifier), with a transcript
// recorder and a file-backed replay client for offline, deterministic runs.

#pragma once

#include <chrono>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>

#include "json.hpp"

namespace curate {

using Json = nlohmann::json;

struct RetryPolicy {
  int max_attempts = 3;
  std::chrono::milliseconds initial_backoff{200};
  double multiplier = 2.0;
};

/// Issues `POST path` with a JSON body and returns the decoded JSON reply.
class ServiceClient {
 public:
  virtual ~ServiceClient() = default;
  virtual Json post(const std::string& path, const Json& body) = 0;
};

/// cpp-httplib backed client. Connection failures and 5xx replies are
/// retried with exponential backoff; 4xx replies and undecodable bodies are
/// protocol errors and are not retried.
class HttpServiceClient final : public ServiceClient {
 public:
  /// `base_url` like "http://127.0.0.1:8080".
  HttpServiceClient(std::string base_url, std::chrono::milliseconds timeout = std::chrono::seconds(60),
                    RetryPolicy retry = {});
  Json post(const std::string& path, const Json& body) override;

  int attempts_made() const { return attempts_; }

 private:
  std::string base_url_;
  std::chrono::milliseconds timeout_;
  RetryPolicy retry_;
  int attempts_ = 0;
};

/// Forwards to an inner client and appends every exchange to a JSONL file:
/// {"endpoint": ..., "request": ..., "response": ...}.
class TranscriptRecorder final : public ServiceClient {
 public:
  TranscriptRecorder(ServiceClient& inner, std::filesystem::path transcript);
  Json post(const std::string& path, const Json& body) override;

 private:
  ServiceClient& inner_;
  std::filesystem::path transcript_;
  std::mutex mu_;
};

/// Answers from a recorded transcript; never touches the network. Requests
/// are matched on (endpoint, canonical request JSON). An unmatched request
/// is a TransportError.
class ReplayServiceClient final : public ServiceClient {
 public:
  explicit ReplayServiceClient(const std::filesystem::path& transcript);
  Json post(const std::string& path, const Json& body) override;

  std::size_t size() const { return responses_.size(); }

 private:
  std::map<std::string, Json> responses_;
};

/// In-process handler, for tests and scripted mocks.
class ScriptedServiceClient final : public ServiceClient {
 public:
  using Handler = std::function<Json(const std::string& path, const Json& body)>;
  explicit ScriptedServiceClient(Handler handler) : handler_(std::move(handler)) {}
  Json post(const std::string& path, const Json& body) override { return handler_(path, body); }

 private:
  Handler handler_;
};

std::string base64_encode(std::string_view bytes);

/// Reads a whole file as bytes.
std::string read_file_bytes(const std::filesystem::path& path);

}  // namespace curate
