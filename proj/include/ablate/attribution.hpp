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

// Leave-one-word-out attribution: phi_i = f(X) - f(X without word i), where
// f(X) = log P(T | X) comes from a ScoreBackend.

#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ablate/corpus.hpp"
#include "ablate/errors.hpp"
#include "ablate/scorer.hpp"
#include "ablate/store.hpp"
#include "json.hpp"

namespace ablate {

struct AttributionEntry {
  std::string word;
  std::size_t index = 0;
  std::optional<double> score;  // absent for excluded stop words

  bool excluded() const { return !score.has_value(); }

  friend bool operator==(const AttributionEntry&, const AttributionEntry&) = default;
};

struct AttributionRecord {
  std::string sample_id;
  std::string model_id;
  double base_log_prob = 0.0;
  std::vector<AttributionEntry> entries;
  std::string config_digest;

  friend bool operator==(const AttributionRecord&, const AttributionRecord&) = default;
};

struct AttributionConfig {
  std::string model_id = "model";
  // Concurrent scoring calls within one sample.
  std::size_t in_flight = 1;
  // Samples processed concurrently by batch_attribute.
  std::size_t parallelism = 1;
  // batch_attribute throws once more than this many samples fail.
  std::size_t max_failures = 0;
  ScoreCache* cache = nullptr;
};

// Remaining token texts joined by single spaces. Throws DataError when
// index is out of range.
std::string ablate_input(const std::vector<WordToken>& tokens, std::size_t index);

// SHA-256 of model_id NUL context NUL target, with NUL vocab_size appended
// when the query carries a vocabulary hint.
std::string score_cache_key(std::string_view model_id, const ScoreQuery& query);

// Looks the query up in `cache` (if any) before asking the backend; fresh
// results are validated and stored.
ScoreResult cached_score(ScoreBackend& backend, const ScoreQuery& query,
                         std::string_view model_id, ScoreCache* cache);

std::string config_digest(const ScoreBackend& backend, const Stoplist& stoplist,
                          std::string_view model_id);

// A sample could not be attributed. word_index is empty when the unablated
// base score failed.
class AttributionError : public Error {
 public:
  AttributionError(ErrorKind kind, std::string sample_id,
                   std::optional<std::size_t> word_index, const std::string& cause);

  const std::string& sample_id() const { return sample_id_; }
  std::optional<std::size_t> word_index() const { return word_index_; }

 private:
  std::string sample_id_;
  std::optional<std::size_t> word_index_;
};

AttributionRecord attribute_sample(const RulePair& pair, ScoreBackend& backend,
                                   const Stoplist& stoplist,
                                   const AttributionConfig& config);

struct BatchFailure {
  std::string sample_id;
  ErrorKind kind = ErrorKind::kData;
  std::string message;
};

struct BatchResult {
  std::vector<AttributionRecord> records;  // corpus order, failed samples omitted
  std::vector<BatchFailure> failures;
};

class BatchError : public Error {
 public:
  BatchError(ErrorKind kind, const std::string& message, std::vector<BatchFailure> failures)
      : Error(kind, message), failures_(std::move(failures)) {}

  const std::vector<BatchFailure>& failures() const { return failures_; }

 private:
  std::vector<BatchFailure> failures_;
};

// Throws BatchError when failures exceed config.max_failures.
BatchResult batch_attribute(const std::vector<RulePair>& corpus, ScoreBackend& backend,
                            const Stoplist& stoplist, const AttributionConfig& config);

nlohmann::ordered_json to_json(const AttributionRecord& record);
AttributionRecord attribution_from_json(const nlohmann::json& obj);

std::string attributions_to_jsonl(const std::vector<AttributionRecord>& records);
void write_attributions(const std::filesystem::path& path,
                        const std::vector<AttributionRecord>& records);
std::vector<AttributionRecord> read_attributions(const std::filesystem::path& path);

}  // namespace ablate
