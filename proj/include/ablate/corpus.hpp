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

// Rule-script corpora, word segmentation and stop-word marking.

#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace ablate {

// One corpus sample: a building rule (model input) and the script it should
// produce, plus optional scripts generated by fine-tuned model variants.
struct RulePair {
  std::string id;
  std::string rule_text;
  std::string reference_script;
  std::map<std::string, std::string> generated_scripts;
  std::vector<std::string> tags;

  friend bool operator==(const RulePair&, const RulePair&) = default;
};

struct WordToken {
  std::string text;
  std::size_t index = 0;
  // Byte offsets into the rule text, half open.
  std::size_t begin = 0;
  std::size_t end = 0;
  bool is_stopword = false;

  friend bool operator==(const WordToken&, const WordToken&) = default;
};

// Lowercase stop words together with the SHA-256 of the bytes they were
// loaded from, so runs can record exactly which list was used.
struct Stoplist {
  std::set<std::string, std::less<>> words;
  std::string digest;
  std::string source;  // file path, or "builtin"

  bool contains(std::string_view word) const {
    return words.find(word) != words.end();
  }
};

// Parses one JSONL corpus line. `line_number` only feeds error messages.
RulePair parse_rule_pair(std::string_view line, std::size_t line_number);

nlohmann::json rule_pair_to_json(const RulePair& pair);

// Loads a JSONL corpus. Blank lines are skipped; ids must be unique.
std::vector<RulePair> load_corpus(const std::filesystem::path& path);

// Maximal runs of non-whitespace characters, in order.
std::vector<WordToken> segment_words(std::string_view rule_text);

// Lowercased token with leading and trailing non-alphanumeric bytes removed.
// Bytes >= 0x80 (UTF-8 sequences) count as letters.
std::string stopword_key(std::string_view token);

std::vector<WordToken> mark_stopwords(std::vector<WordToken> tokens,
                                      const Stoplist& stoplist);

// Segments and marks in one step.
std::vector<WordToken> tokenize_rule(std::string_view rule_text,
                                     const Stoplist& stoplist);

Stoplist parse_stoplist(std::string_view text, std::string source);
Stoplist load_stoplist(const std::filesystem::path& path);

// The bundled English list (identical to data/stopwords_en.txt).
std::string_view default_stoplist_text();
Stoplist default_stoplist();

// Token texts joined by single spaces.
std::string join_words(const std::vector<WordToken>& tokens);

}  // namespace ablate
