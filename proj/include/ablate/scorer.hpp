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

// Conditional log-probability backends f(X) = log P(T | X) and token
// embedding providers.

#pragma once

#include <atomic>
#include <chrono>
#include <cstddef>
#include <memory>
#include <optional>
#include <semaphore>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace ablate {

struct ScoreQuery {
  std::string context;  // possibly ablated rule text; may be empty
  std::string target;   // the script being scored; never empty
  // Vocabulary size of the unablated sample. Honoured by the reference
  // scorer and the mock server; other servers ignore it.
  std::optional<std::size_t> vocab_size;
};

struct ScoreResult {
  double log_prob = 0.0;
  std::vector<double> token_log_probs;
  std::vector<std::string> tokens;

  friend bool operator==(const ScoreResult&, const ScoreResult&) = default;
};

// Throws ProtocolError naming the first violated field.
void validate(const ScoreResult& result);
nlohmann::json to_json(const ScoreResult& result);
// Parses and validates a wire response body.
ScoreResult score_result_from_json(const nlohmann::json& body);

struct EmbeddingResult {
  std::vector<std::string> tokens;
  std::vector<std::vector<double>> vectors;
};

void validate(const EmbeddingResult& result);
nlohmann::json to_json(const EmbeddingResult& result);
EmbeddingResult embedding_result_from_json(const nlohmann::json& body);

// Interface every scoring backend implements. Implementations must tolerate
// concurrent calls.
class ScoreBackend {
 public:
  virtual ~ScoreBackend() = default;
  virtual ScoreResult score(const ScoreQuery& query) = 0;
  // Stable identity of the backend configuration (kind, endpoint, alpha).
  virtual nlohmann::json describe() const = 0;
};

class EmbedBackend {
 public:
  virtual ~EmbedBackend() = default;
  virtual EmbeddingResult embed(std::string_view text) = 0;
  virtual nlohmann::json describe() const = 0;
};

// Calls the backend and validates its answer.
ScoreResult score(ScoreBackend& backend, const ScoreQuery& query);

std::vector<std::string> split_whitespace(std::string_view text);

// Number of distinct whitespace tokens across both texts.
std::size_t distinct_token_count(std::string_view context,
                                 std::string_view target);

// Add-alpha unigram model of the target given the context:
//   log p(t_j) = ln((count(t_j in context) + alpha) / (N + alpha * V))
// with N the context length in tokens and V = vocab_size.
ScoreResult reference_score(std::string_view context, std::string_view target,
                            double alpha, std::size_t vocab_size);

class ReferenceScorer final : public ScoreBackend {
 public:
  explicit ReferenceScorer(double alpha = 1.0);

  // Uses query.vocab_size when set, else the distinct token count of
  // context and target.
  ScoreResult score(const ScoreQuery& query) override;
  nlohmann::json describe() const override;

  double alpha() const { return alpha_; }

 private:
  double alpha_;
};

// Forwards to another backend and counts the calls that reach it.
class CountingScorer final : public ScoreBackend {
 public:
  explicit CountingScorer(ScoreBackend& inner) : inner_(inner) {}

  ScoreResult score(const ScoreQuery& query) override {
    ++calls_;
    return inner_.score(query);
  }
  nlohmann::json describe() const override { return inner_.describe(); }

  std::size_t calls() const { return calls_.load(); }

 private:
  ScoreBackend& inner_;
  std::atomic<std::size_t> calls_{0};
};

// Deterministic unit vectors: FNV-1a of the token bytes seeds a splitmix64
// stream; each 64-bit draw becomes a component in [-1, 1) and the vector is
// L2 normalized.
EmbeddingResult mock_embed(const std::vector<std::string>& tokens,
                           std::size_t dim);

class MockEmbedder final : public EmbedBackend {
 public:
  explicit MockEmbedder(std::size_t dim = 64);

  // Whitespace-tokenizes `text` and calls mock_embed.
  EmbeddingResult embed(std::string_view text) override;
  nlohmann::json describe() const override;

 private:
  std::size_t dim_;
};

struct RetryPolicy {
  int max_attempts = 3;
  std::chrono::milliseconds base_backoff{250};
  std::chrono::milliseconds timeout{30000};

  // Pause after `failed_attempts` consecutive failures:
  // base * 2^(failed_attempts - 1), i.e. 250 ms, 500 ms, ... by default.
  std::chrono::milliseconds backoff(int failed_attempts) const;
};

// Splits "http://host:port/prefix" into the parts cpp-httplib wants.
struct Endpoint {
  std::string scheme_host_port;
  std::string path_prefix;

  static Endpoint parse(std::string_view url);
  std::string url() const { return scheme_host_port + path_prefix; }
};

// POSTs `body` to `path` under the endpoint with retries, returning the
// parsed JSON response. At most `in_flight` calls run at once per client.
class WireClient {
 public:
  WireClient(std::string endpoint_url, RetryPolicy policy,
             std::ptrdiff_t in_flight);

  nlohmann::json post(const std::string& path, const nlohmann::json& body);
  nlohmann::json get(const std::string& path);

  const Endpoint& endpoint() const { return endpoint_; }
  const RetryPolicy& policy() const { return policy_; }

 private:
  nlohmann::json request(const std::string& method, const std::string& path,
                         const nlohmann::json* body);

  Endpoint endpoint_;
  RetryPolicy policy_;
  std::counting_semaphore<> slots_;
};

class RemoteScorer final : public ScoreBackend {
 public:
  explicit RemoteScorer(std::string endpoint_url, RetryPolicy policy = {},
                        std::ptrdiff_t in_flight = 8);

  ScoreResult score(const ScoreQuery& query) override;
  nlohmann::json describe() const override;

  // GET /v1/health; returns the reported model name.
  std::string health();

 private:
  WireClient client_;
};

class RemoteEmbedder final : public EmbedBackend {
 public:
  explicit RemoteEmbedder(std::string endpoint_url, RetryPolicy policy = {},
                          std::ptrdiff_t in_flight = 8);

  EmbeddingResult embed(std::string_view text) override;
  nlohmann::json describe() const override;

 private:
  WireClient client_;
};

ScoreResult remote_score(const std::string& endpoint_url,
                         const ScoreQuery& query,
                         const RetryPolicy& policy = {});
EmbeddingResult remote_embed(const std::string& endpoint_url,
                             std::string_view text,
                             const RetryPolicy& policy = {});

}  // namespace ablate
