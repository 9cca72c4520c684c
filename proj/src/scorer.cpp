/*
 * Copyright 2026 The Ablate Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "ablate/scorer.hpp"

#include <cmath>
#include <thread>
#include <unordered_map>
#include <unordered_set>

#include "ablate/digest.hpp"
#include "ablate/errors.hpp"
#include "httplib.h"

namespace ablate {
namespace {

constexpr double kSumTolerance = 1e-6;

bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' ||
         c == '\f';
}

const nlohmann::json& require(const nlohmann::json& body, const char* field) {
  if (!body.is_object()) throw ProtocolError("body", "expected a JSON object");
  const auto it = body.find(field);
  if (it == body.end()) throw ProtocolError(field, "missing");
  return *it;
}

// RAII holder for one in-flight slot.
class SlotGuard {
 public:
  explicit SlotGuard(std::counting_semaphore<>& slots) : slots_(slots) {
    slots_.acquire();
  }
  ~SlotGuard() { slots_.release(); }
  SlotGuard(const SlotGuard&) = delete;
  SlotGuard& operator=(const SlotGuard&) = delete;

 private:
  std::counting_semaphore<>& slots_;
};

}  // namespace

void validate(const ScoreResult& result) {
  if (!std::isfinite(result.log_prob)) {
    throw ProtocolError("log_prob", "not a finite number");
  }
  if (result.token_log_probs.size() != result.tokens.size()) {
    throw ProtocolError("token_log_probs",
                        "length " + std::to_string(result.token_log_probs.size()) +
                            " differs from tokens length " +
                            std::to_string(result.tokens.size()));
  }
  double sum = 0.0;
  for (const double lp : result.token_log_probs) {
    if (!std::isfinite(lp)) {
      throw ProtocolError("token_log_probs", "contains a non-finite value");
    }
    sum += lp;
  }
  if (std::abs(sum - result.log_prob) > kSumTolerance) {
    throw ProtocolError("log_prob", "does not equal the sum of token_log_probs");
  }
}

nlohmann::json to_json(const ScoreResult& result) {
  return {{"log_prob", result.log_prob},
          {"token_log_probs", result.token_log_probs},
          {"tokens", result.tokens}};
}

ScoreResult score_result_from_json(const nlohmann::json& body) {
  ScoreResult result;
  const auto& log_prob = require(body, "log_prob");
  if (!log_prob.is_number()) throw ProtocolError("log_prob", "not a number");
  result.log_prob = log_prob.get<double>();

  const auto& lps = require(body, "token_log_probs");
  if (!lps.is_array()) throw ProtocolError("token_log_probs", "not an array");
  for (const auto& lp : lps) {
    if (!lp.is_number()) throw ProtocolError("token_log_probs", "non-numeric entry");
    result.token_log_probs.push_back(lp.get<double>());
  }
  const auto& tokens = require(body, "tokens");
  if (!tokens.is_array()) throw ProtocolError("tokens", "not an array");
  for (const auto& t : tokens) {
    if (!t.is_string()) throw ProtocolError("tokens", "non-string entry");
    result.tokens.push_back(t.get<std::string>());
  }
  validate(result);
  return result;
}

void validate(const EmbeddingResult& result) {
  if (result.tokens.size() != result.vectors.size()) {
    throw ProtocolError("vectors",
                        "length " + std::to_string(result.vectors.size()) +
                            " differs from tokens length " +
                            std::to_string(result.tokens.size()));
  }
  if (result.vectors.empty()) return;
  const std::size_t dim = result.vectors.front().size();
  if (dim == 0) throw ProtocolError("vectors", "zero-dimensional vector");
  for (const auto& v : result.vectors) {
    if (v.size() != dim) throw ProtocolError("vectors", "inconsistent dimensions");
    bool nonzero = false;
    for (const double x : v) {
      if (!std::isfinite(x)) throw ProtocolError("vectors", "non-finite component");
      nonzero = nonzero || x != 0.0;
    }
    if (!nonzero) throw ProtocolError("vectors", "all-zero vector");
  }
}

nlohmann::json to_json(const EmbeddingResult& result) {
  return {{"tokens", result.tokens}, {"vectors", result.vectors}};
}

EmbeddingResult embedding_result_from_json(const nlohmann::json& body) {
  EmbeddingResult result;
  const auto& tokens = require(body, "tokens");
  if (!tokens.is_array()) throw ProtocolError("tokens", "not an array");
  for (const auto& t : tokens) {
    if (!t.is_string()) throw ProtocolError("tokens", "non-string entry");
    result.tokens.push_back(t.get<std::string>());
  }
  const auto& vectors = require(body, "vectors");
  if (!vectors.is_array()) throw ProtocolError("vectors", "not an array");
  for (const auto& v : vectors) {
    if (!v.is_array()) throw ProtocolError("vectors", "entry is not an array");
    std::vector<double> vec;
    vec.reserve(v.size());
    for (const auto& x : v) {
      if (!x.is_number()) throw ProtocolError("vectors", "non-numeric component");
      vec.push_back(x.get<double>());
    }
    result.vectors.push_back(std::move(vec));
  }
  validate(result);
  return result;
}

ScoreResult score(ScoreBackend& backend, const ScoreQuery& query) {
  if (query.target.empty()) throw DataError("score query has an empty target");
  ScoreResult result = backend.score(query);
  validate(result);
  return result;
}

std::vector<std::string> split_whitespace(std::string_view text) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (pos < text.size()) {
    while (pos < text.size() && is_space(text[pos])) ++pos;
    const std::size_t begin = pos;
    while (pos < text.size() && !is_space(text[pos])) ++pos;
    if (pos > begin) out.emplace_back(text.substr(begin, pos - begin));
  }
  return out;
}

std::size_t distinct_token_count(std::string_view context,
                                 std::string_view target) {
  std::unordered_set<std::string> vocab;
  for (auto& t : split_whitespace(context)) vocab.insert(std::move(t));
  for (auto& t : split_whitespace(target)) vocab.insert(std::move(t));
  return vocab.size();
}

ScoreResult reference_score(std::string_view context, std::string_view target,
                            double alpha, std::size_t vocab_size) {
  if (!(alpha > 0.0) || !std::isfinite(alpha)) {
    throw DataError("reference scorer: alpha must be a positive finite number");
  }
  if (vocab_size == 0) throw DataError("reference scorer: vocab_size must be positive");
  ScoreResult result;
  result.tokens = split_whitespace(target);
  if (result.tokens.empty()) throw DataError("reference scorer: empty target");

  std::unordered_map<std::string, std::size_t> counts;
  std::size_t context_len = 0;
  for (auto& t : split_whitespace(context)) {
    ++counts[std::move(t)];
    ++context_len;
  }
  const double denominator =
      static_cast<double>(context_len) + alpha * static_cast<double>(vocab_size);
  result.token_log_probs.reserve(result.tokens.size());
  for (const auto& t : result.tokens) {
    const auto it = counts.find(t);
    const double count = it == counts.end() ? 0.0 : static_cast<double>(it->second);
    const double lp = std::log((count + alpha) / denominator);
    result.token_log_probs.push_back(lp);
    result.log_prob += lp;
  }
  return result;
}

ReferenceScorer::ReferenceScorer(double alpha) : alpha_(alpha) {
  if (!(alpha > 0.0) || !std::isfinite(alpha)) {
    throw UsageError("reference scorer: alpha must be a positive finite number");
  }
}

ScoreResult ReferenceScorer::score(const ScoreQuery& query) {
  const std::size_t vocab = query.vocab_size.value_or(
      distinct_token_count(query.context, query.target));
  return reference_score(query.context, query.target, alpha_, vocab);
}

nlohmann::json ReferenceScorer::describe() const {
  return {{"kind", "reference"}, {"alpha", alpha_}};
}

EmbeddingResult mock_embed(const std::vector<std::string>& tokens,
                           std::size_t dim) {
  if (dim < 8) throw UsageError("mock embedder: dim must be at least 8");
  EmbeddingResult result;
  result.tokens = tokens;
  result.vectors.reserve(tokens.size());
  for (const auto& token : tokens) {
    SplitMix64 stream(fnv1a64(token));
    std::vector<double> v(dim);
    double norm_sq = 0.0;
    for (auto& x : v) {
      // Top 53 bits -> [0, 1) -> [-1, 1).
      x = static_cast<double>(stream.next() >> 11) * 0x1.0p-53 * 2.0 - 1.0;
      norm_sq += x * x;
    }
    const double norm = std::sqrt(norm_sq);
    for (auto& x : v) x /= norm;
    result.vectors.push_back(std::move(v));
  }
  return result;
}

MockEmbedder::MockEmbedder(std::size_t dim) : dim_(dim) {
  if (dim < 8) throw UsageError("mock embedder: dim must be at least 8");
}

EmbeddingResult MockEmbedder::embed(std::string_view text) {
  return mock_embed(split_whitespace(text), dim_);
}

nlohmann::json MockEmbedder::describe() const {
  return {{"kind", "mock"}, {"dim", dim_}};
}

std::chrono::milliseconds RetryPolicy::backoff(int failed_attempts) const {
  if (failed_attempts < 1) return std::chrono::milliseconds{0};
  return base_backoff * (std::int64_t{1} << (failed_attempts - 1));
}

Endpoint Endpoint::parse(std::string_view url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string_view::npos) {
    throw UsageError("endpoint must look like http://host:port, got '" +
                     std::string(url) + "'");
  }
  const std::string_view scheme = url.substr(0, scheme_end);
  if (scheme != "http" && scheme != "https") {
    throw UsageError("unsupported endpoint scheme '" + std::string(scheme) + "'");
  }
  const auto path_start = url.find('/', scheme_end + 3);
  Endpoint endpoint;
  endpoint.scheme_host_port = std::string(url.substr(0, path_start));
  if (path_start != std::string_view::npos) {
    endpoint.path_prefix = std::string(url.substr(path_start));
    while (!endpoint.path_prefix.empty() && endpoint.path_prefix.back() == '/') {
      endpoint.path_prefix.pop_back();
    }
  }
  if (endpoint.scheme_host_port.size() == scheme_end + 3) {
    throw UsageError("endpoint has no host: '" + std::string(url) + "'");
  }
  return endpoint;
}

WireClient::WireClient(std::string endpoint_url, RetryPolicy policy,
                       std::ptrdiff_t in_flight)
    : endpoint_(Endpoint::parse(endpoint_url)),
      policy_(policy),
      slots_(in_flight < 1 ? 1 : in_flight) {
  if (policy_.max_attempts < 1) throw UsageError("retry policy needs >= 1 attempt");
}

nlohmann::json WireClient::post(const std::string& path,
                                const nlohmann::json& body) {
  return request("POST", path, &body);
}

nlohmann::json WireClient::get(const std::string& path) {
  return request("GET", path, nullptr);
}

nlohmann::json WireClient::request(const std::string& method,
                                   const std::string& path,
                                   const nlohmann::json* body) {
  SlotGuard slot(slots_);
  const std::string full_path = endpoint_.path_prefix + path;
  const std::string payload = body ? body->dump() : std::string();
  const auto seconds = std::chrono::duration_cast<std::chrono::seconds>(policy_.timeout);
  const auto micros = std::chrono::duration_cast<std::chrono::microseconds>(
                          policy_.timeout - seconds);

  std::string last_error;
  for (int attempt = 1; attempt <= policy_.max_attempts; ++attempt) {
    if (attempt > 1) std::this_thread::sleep_for(policy_.backoff(attempt - 1));

    // One client per call: httplib::Client is not safe for concurrent use.
    httplib::Client client(endpoint_.scheme_host_port);
    client.set_connection_timeout(seconds.count(), micros.count());
    client.set_read_timeout(seconds.count(), micros.count());
    client.set_write_timeout(seconds.count(), micros.count());
    const auto res = method == "POST"
                         ? client.Post(full_path, payload, "application/json")
                         : client.Get(full_path);
    if (!res) {
      last_error = "transport error: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status >= 500) {
      last_error = "HTTP " + std::to_string(res->status) + ": " + res->body;
      continue;
    }
    if (res->status >= 400) {
      throw BackendError(method + " " + endpoint_.url() + path + " failed with HTTP " +
                             std::to_string(res->status) + ": " + res->body,
                         /*retryable=*/false, attempt);
    }
    if (res->status != 200) {
      throw ProtocolError("status", "unexpected HTTP " + std::to_string(res->status));
    }
    try {
      return nlohmann::json::parse(res->body);
    } catch (const nlohmann::json::parse_error& e) {
      throw ProtocolError("body", std::string("malformed JSON: ") + e.what());
    }
  }
  throw BackendError(method + " " + endpoint_.url() + path + " failed after " +
                         std::to_string(policy_.max_attempts) +
                         " attempt(s): " + last_error,
                     /*retryable=*/true, policy_.max_attempts);
}

RemoteScorer::RemoteScorer(std::string endpoint_url, RetryPolicy policy,
                           std::ptrdiff_t in_flight)
    : client_(std::move(endpoint_url), policy, in_flight) {}

ScoreResult RemoteScorer::score(const ScoreQuery& query) {
  nlohmann::json body = {{"context", query.context}, {"target", query.target}};
  if (query.vocab_size) body["vocab_size"] = *query.vocab_size;
  return score_result_from_json(client_.post("/v1/score", body));
}

nlohmann::json RemoteScorer::describe() const {
  return {{"kind", "remote"}, {"endpoint", client_.endpoint().url()}};
}

std::string RemoteScorer::health() {
  const auto body = client_.get("/v1/health");
  const auto& status = require(body, "status");
  if (status != "ok") throw ProtocolError("status", "backend reports " + status.dump());
  const auto& model = require(body, "model");
  if (!model.is_string()) throw ProtocolError("model", "not a string");
  return model.get<std::string>();
}

RemoteEmbedder::RemoteEmbedder(std::string endpoint_url, RetryPolicy policy,
                               std::ptrdiff_t in_flight)
    : client_(std::move(endpoint_url), policy, in_flight) {}

EmbeddingResult RemoteEmbedder::embed(std::string_view text) {
  return embedding_result_from_json(
      client_.post("/v1/embed", {{"text", std::string(text)}}));
}

nlohmann::json RemoteEmbedder::describe() const {
  return {{"kind", "remote"}, {"endpoint", client_.endpoint().url()}};
}

ScoreResult remote_score(const std::string& endpoint_url,
                         const ScoreQuery& query, const RetryPolicy& policy) {
  RemoteScorer scorer(endpoint_url, policy, 1);
  return score(scorer, query);
}

EmbeddingResult remote_embed(const std::string& endpoint_url,
                             std::string_view text, const RetryPolicy& policy) {
  RemoteEmbedder embedder(endpoint_url, policy, 1);
  return embedder.embed(text);
}

}  // namespace ablate
