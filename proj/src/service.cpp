// Copyright 2026 The Curate Authors
// SPDX-License-Identifier: Apache-2.0

#include "curate/service.hpp"

#include <fstream>
#include <sstream>
#include <thread>

#include "curate/error.hpp"
#include "httplib.h"

namespace curate {

HttpServiceClient::HttpServiceClient(std::string base_url, std::chrono::milliseconds timeout, RetryPolicy retry)
    : base_url_(std::move(base_url)), timeout_(timeout), retry_(retry) {
  if (retry_.max_attempts < 1) throw ValidationError("retry policy needs at least one attempt");
}

Json HttpServiceClient::post(const std::string& path, const Json& body) {
  httplib::Client client(base_url_);
  client.set_connection_timeout(timeout_);
  client.set_read_timeout(timeout_);
  client.set_write_timeout(timeout_);

  const std::string payload = body.dump();
  auto backoff = retry_.initial_backoff;
  std::string last_error;
  for (int attempt = 1; attempt <= retry_.max_attempts; ++attempt) {
    ++attempts_;
    auto res = client.Post(path, payload, "application/json");
    if (res && res->status >= 200 && res->status < 300) {
      try {
        return Json::parse(res->body);
      } catch (const Json::parse_error& e) {
        throw ProtocolError("POST " + path + ": malformed JSON reply: " + e.what());
      }
    }
    if (res && res->status >= 400 && res->status < 500) {
      throw ProtocolError("POST " + path + ": HTTP " + std::to_string(res->status) + ": " + res->body);
    }
    last_error = res ? "HTTP " + std::to_string(res->status) : httplib::to_string(res.error());
    if (attempt < retry_.max_attempts) {
      std::this_thread::sleep_for(backoff);
      backoff = std::chrono::milliseconds(static_cast<long>(backoff.count() * retry_.multiplier));
    }
  }
  throw TransportError("POST " + base_url_ + path + " failed after " + std::to_string(retry_.max_attempts) +
                       " attempts: " + last_error);
}

TranscriptRecorder::TranscriptRecorder(ServiceClient& inner, std::filesystem::path transcript)
    : inner_(inner), transcript_(std::move(transcript)) {}

Json TranscriptRecorder::post(const std::string& path, const Json& body) {
  Json response = inner_.post(path, body);
  std::lock_guard lock(mu_);
  std::ofstream out(transcript_, std::ios::app | std::ios::binary);
  if (!out) throw Error("cannot append to transcript " + transcript_.string());
  out << Json{{"endpoint", path}, {"request", body}, {"response", response}}.dump() << '\n';
  return response;
}

namespace {

std::string replay_key(const std::string& path, const Json& body) { return path + '\n' + body.dump(); }

}  // namespace

ReplayServiceClient::ReplayServiceClient(const std::filesystem::path& transcript) {
  std::ifstream in(transcript, std::ios::binary);
  if (!in) throw ValidationError("cannot open transcript " + transcript.string());
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const Json j = Json::parse(line);
      responses_[replay_key(j.at("endpoint").get<std::string>(), j.at("request"))] = j.at("response");
    } catch (const Json::exception& e) {
      throw ValidationError("transcript line " + std::to_string(line_no) + ": " + e.what());
    }
  }
}

Json ReplayServiceClient::post(const std::string& path, const Json& body) {
  auto it = responses_.find(replay_key(path, body));
  if (it == responses_.end()) throw TransportError("no transcript entry for POST " + path + " " + body.dump());
  return it->second;
}

std::string base64_encode(std::string_view bytes) {
  static constexpr char kAlphabet[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
  std::string out;
  out.reserve((bytes.size() + 2) / 3 * 4);
  std::size_t i = 0;
  for (; i + 2 < bytes.size(); i += 3) {
    const unsigned v = (static_cast<unsigned char>(bytes[i]) << 16) | (static_cast<unsigned char>(bytes[i + 1]) << 8) |
                       static_cast<unsigned char>(bytes[i + 2]);
    out += kAlphabet[(v >> 18) & 63];
    out += kAlphabet[(v >> 12) & 63];
    out += kAlphabet[(v >> 6) & 63];
    out += kAlphabet[v & 63];
  }
  if (i < bytes.size()) {
    unsigned v = static_cast<unsigned char>(bytes[i]) << 16;
    if (i + 1 < bytes.size()) v |= static_cast<unsigned char>(bytes[i + 1]) << 8;
    out += kAlphabet[(v >> 18) & 63];
    out += kAlphabet[(v >> 12) & 63];
    out += i + 1 < bytes.size() ? kAlphabet[(v >> 6) & 63] : '=';
    out += '=';
  }
  return out;
}

std::string read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace curate
