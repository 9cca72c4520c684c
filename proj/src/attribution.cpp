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

#include "ablate/attribution.hpp"

#include <cmath>
#include <fstream>

#include "ablate/digest.hpp"
#include "ablate/parallel.hpp"

namespace ablate {
namespace {

ErrorKind kind_of(const std::exception_ptr& error) {
  try {
    std::rethrow_exception(error);
  } catch (const Error& e) {
    return e.kind();
  } catch (...) {
    return ErrorKind::kData;
  }
}

std::string message_of(const std::exception_ptr& error) {
  try {
    std::rethrow_exception(error);
  } catch (const std::exception& e) {
    return e.what();
  } catch (...) {
    return "unknown error";
  }
}

std::string describe_location(const std::string& sample_id,
                              std::optional<std::size_t> word_index) {
  return "sample '" + sample_id + "': " +
         (word_index ? "ablation of word " + std::to_string(*word_index)
                     : std::string("base score"));
}

}  // namespace

std::string ablate_input(const std::vector<WordToken>& tokens, std::size_t index) {
  if (index >= tokens.size()) {
    throw DataError("ablation index " + std::to_string(index) + " out of range for " +
                    std::to_string(tokens.size()) + " words");
  }
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i == index) continue;
    if (!out.empty()) out.push_back(' ');
    out += tokens[i].text;
  }
  return out;
}

std::string score_cache_key(std::string_view model_id, const ScoreQuery& query) {
  std::string material;
  material.reserve(model_id.size() + query.context.size() + query.target.size() + 24);
  material.append(model_id);
  material.push_back('\0');
  material.append(query.context);
  material.push_back('\0');
  material.append(query.target);
  if (query.vocab_size) {
    material.push_back('\0');
    material.append(std::to_string(*query.vocab_size));
  }
  return sha256_hex(material);
}

ScoreResult cached_score(ScoreBackend& backend, const ScoreQuery& query,
                         std::string_view model_id, ScoreCache* cache) {
  std::string key;
  if (cache) {
    key = score_cache_key(model_id, query);
    if (auto hit = cache->get(key)) return *std::move(hit);
  }
  ScoreResult result = score(backend, query);
  if (cache) cache->put(key, result);
  return result;
}

std::string config_digest(const ScoreBackend& backend, const Stoplist& stoplist,
                          std::string_view model_id) {
  const nlohmann::json material = {{"backend", backend.describe()},
                                   {"model_id", model_id},
                                   {"stopword_digest", stoplist.digest}};
  return sha256_hex(material.dump());
}

AttributionError::AttributionError(ErrorKind kind, std::string sample_id,
                                   std::optional<std::size_t> word_index,
                                   const std::string& cause)
    : Error(kind, describe_location(sample_id, word_index) + ": " + cause),
      sample_id_(std::move(sample_id)),
      word_index_(word_index) {}

AttributionRecord attribute_sample(const RulePair& pair, ScoreBackend& backend,
                                   const Stoplist& stoplist,
                                   const AttributionConfig& config) {
  const std::vector<WordToken> tokens = tokenize_rule(pair.rule_text, stoplist);
  if (tokens.empty()) {
    throw AttributionError(ErrorKind::kData, pair.id, std::nullopt, "rule has no words");
  }
  if (pair.reference_script.empty()) {
    throw AttributionError(ErrorKind::kData, pair.id, std::nullopt, "empty reference script");
  }

  const std::string base_context = join_words(tokens);
  const std::size_t vocab = distinct_token_count(base_context, pair.reference_script);

  // Slot 0 is the unablated context; slot k+1 ablates word ablated[k].
  std::vector<std::size_t> ablated;
  for (const auto& token : tokens) {
    if (!token.is_stopword) ablated.push_back(token.index);
  }
  std::vector<ScoreQuery> queries;
  queries.reserve(ablated.size() + 1);
  queries.push_back({base_context, pair.reference_script, vocab});
  for (const std::size_t i : ablated) {
    queries.push_back({ablate_input(tokens, i), pair.reference_script, vocab});
  }

  std::vector<double> log_probs(queries.size());
  const auto errors = parallel_for_each_index(queries.size(), config.in_flight, [&](std::size_t q) {
    log_probs[q] = cached_score(backend, queries[q], config.model_id, config.cache).log_prob;
  });
  for (std::size_t q = 0; q < errors.size(); ++q) {
    if (!errors[q]) continue;
    const std::optional<std::size_t> word =
        q == 0 ? std::nullopt : std::optional<std::size_t>(ablated[q - 1]);
    throw AttributionError(kind_of(errors[q]), pair.id, word, message_of(errors[q]));
  }

  AttributionRecord record;
  record.sample_id = pair.id;
  record.model_id = config.model_id;
  record.base_log_prob = log_probs[0];
  record.config_digest = config_digest(backend, stoplist, config.model_id);
  record.entries.reserve(tokens.size());
  std::size_t next = 0;
  for (const auto& token : tokens) {
    AttributionEntry entry{.word = token.text, .index = token.index, .score = std::nullopt};
    if (!token.is_stopword) {
      entry.score = log_probs[0] - log_probs[1 + next];
      ++next;
    }
    record.entries.push_back(std::move(entry));
  }
  return record;
}

BatchResult batch_attribute(const std::vector<RulePair>& corpus, ScoreBackend& backend,
                            const Stoplist& stoplist, const AttributionConfig& config) {
  std::vector<std::optional<AttributionRecord>> slots(corpus.size());
  const auto errors =
      parallel_for_each_index(corpus.size(), config.parallelism, [&](std::size_t i) {
        slots[i] = attribute_sample(corpus[i], backend, stoplist, config);
      });

  BatchResult result;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    if (errors[i]) {
      result.failures.push_back(
          {corpus[i].id, kind_of(errors[i]), message_of(errors[i])});
    } else {
      result.records.push_back(*std::move(slots[i]));
    }
  }
  if (result.failures.size() > config.max_failures) {
    // Backend trouble outranks data trouble when choosing the exit class.
    ErrorKind kind = ErrorKind::kData;
    for (const auto& f : result.failures) {
      if (f.kind == ErrorKind::kBackend) kind = ErrorKind::kBackend;
    }
    throw BatchError(kind,
                     std::to_string(result.failures.size()) + " of " +
                         std::to_string(corpus.size()) + " samples failed (first: " +
                         result.failures.front().message + ")",
                     result.failures);
  }
  return result;
}

nlohmann::ordered_json to_json(const AttributionRecord& record) {
  nlohmann::ordered_json words = nlohmann::ordered_json::array();
  for (const auto& entry : record.entries) {
    nlohmann::ordered_json w = {{"w", entry.word}, {"i", entry.index}};
    if (entry.score) {
      w["score"] = *entry.score;
    } else {
      w["excluded"] = true;
    }
    words.push_back(std::move(w));
  }
  return {{"sample_id", record.sample_id},
          {"model_id", record.model_id},
          {"base_log_prob", record.base_log_prob},
          {"config_digest", record.config_digest},
          {"words", std::move(words)}};
}

AttributionRecord attribution_from_json(const nlohmann::json& obj) {
  const auto bad = [](const std::string& what) {
    return DataError("attribution record: " + what);
  };
  if (!obj.is_object()) throw bad("expected a JSON object");
  AttributionRecord record;
  try {
    record.sample_id = obj.at("sample_id").get<std::string>();
    record.model_id = obj.at("model_id").get<std::string>();
    record.base_log_prob = obj.at("base_log_prob").get<double>();
    record.config_digest = obj.at("config_digest").get<std::string>();
    for (const auto& w : obj.at("words")) {
      AttributionEntry entry;
      entry.word = w.at("w").get<std::string>();
      entry.index = w.at("i").get<std::size_t>();
      const bool has_score = w.contains("score");
      const bool excluded = w.value("excluded", false);
      if (has_score == excluded) {
        throw bad("word " + std::to_string(entry.index) +
                  " must carry exactly one of 'score' or 'excluded'");
      }
      if (has_score) {
        entry.score = w.at("score").get<double>();
        if (!std::isfinite(*entry.score)) throw bad("non-finite score");
      }
      if (entry.index != record.entries.size()) {
        throw bad("word indices must run 0..d-1 in order");
      }
      record.entries.push_back(std::move(entry));
    }
  } catch (const nlohmann::json::exception& e) {
    throw bad(e.what());
  }
  return record;
}

std::string attributions_to_jsonl(const std::vector<AttributionRecord>& records) {
  std::string out;
  for (const auto& record : records) {
    out += to_json(record).dump();
    out.push_back('\n');
  }
  return out;
}

void write_attributions(const std::filesystem::path& path,
                        const std::vector<AttributionRecord>& records) {
  write_file_atomic(path, attributions_to_jsonl(records));
}

std::vector<AttributionRecord> read_attributions(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open attribution file: " + path.string());
  std::vector<AttributionRecord> records;
  std::string line;
  std::size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto obj = nlohmann::json::parse(line, nullptr, false);
    if (obj.is_discarded()) {
      throw DataError(path.string() + ":" + std::to_string(line_number) + ": malformed JSON");
    }
    try {
      records.push_back(attribution_from_json(obj));
    } catch (const DataError& e) {
      throw DataError(path.string() + ":" + std::to_string(line_number) + ": " + e.what());
    }
  }
  return records;
}

}  // namespace ablate
