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

#include "ablate/corpus.hpp"

#include <fstream>
#include <sstream>
#include <unordered_set>

#include "ablate/digest.hpp"
#include "ablate/errors.hpp"
#include "stopwords_en.inc"

namespace ablate {
namespace {

bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' ||
         c == '\f';
}

bool is_word_char(char c) {
  const auto u = static_cast<unsigned char>(c);
  return u >= 0x80 || (u >= '0' && u <= '9') || (u >= 'a' && u <= 'z') ||
         (u >= 'A' && u <= 'Z');
}

std::string required_string(const nlohmann::json& obj, const char* key,
                            std::size_t line_number) {
  const auto it = obj.find(key);
  if (it == obj.end() || !it->is_string()) {
    throw DataError("corpus line " + std::to_string(line_number) +
                    ": missing string field '" + key + "'");
  }
  auto value = it->get<std::string>();
  if (value.empty()) {
    throw DataError("corpus line " + std::to_string(line_number) +
                    ": field '" + key + "' is empty");
  }
  return value;
}

}  // namespace

RulePair parse_rule_pair(std::string_view line, std::size_t line_number) {
  const std::string where = "corpus line " + std::to_string(line_number);
  nlohmann::json obj;
  try {
    obj = nlohmann::json::parse(line);
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError(where + ": malformed JSON (" + e.what() + ")");
  }
  if (!obj.is_object()) throw DataError(where + ": expected a JSON object");

  RulePair pair;
  pair.id = required_string(obj, "id", line_number);
  pair.rule_text = required_string(obj, "rule", line_number);
  pair.reference_script = required_string(obj, "reference_script", line_number);

  if (const auto it = obj.find("generated"); it != obj.end()) {
    if (!it->is_object()) throw DataError(where + ": 'generated' must be an object");
    for (const auto& [model_id, script] : it->items()) {
      if (!script.is_string()) {
        throw DataError(where + ": generated script for '" + model_id +
                        "' must be a string");
      }
      pair.generated_scripts.emplace(model_id, script.get<std::string>());
    }
  }
  if (const auto it = obj.find("tags"); it != obj.end()) {
    if (!it->is_array()) throw DataError(where + ": 'tags' must be an array");
    for (const auto& tag : *it) {
      if (!tag.is_string()) throw DataError(where + ": tags must be strings");
      pair.tags.push_back(tag.get<std::string>());
    }
  }
  return pair;
}

nlohmann::json rule_pair_to_json(const RulePair& pair) {
  nlohmann::json obj = {{"id", pair.id},
                        {"rule", pair.rule_text},
                        {"reference_script", pair.reference_script}};
  if (!pair.generated_scripts.empty()) obj["generated"] = pair.generated_scripts;
  if (!pair.tags.empty()) obj["tags"] = pair.tags;
  return obj;
}

std::vector<RulePair> load_corpus(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open corpus file: " + path.string());

  std::vector<RulePair> corpus;
  std::unordered_set<std::string> seen;
  std::string line;
  std::size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    RulePair pair = parse_rule_pair(line, line_number);
    if (!seen.insert(pair.id).second) {
      throw DataError("corpus line " + std::to_string(line_number) +
                      ": duplicate id '" + pair.id + "'");
    }
    corpus.push_back(std::move(pair));
  }
  return corpus;
}

std::vector<WordToken> segment_words(std::string_view rule_text) {
  std::vector<WordToken> tokens;
  std::size_t pos = 0;
  while (pos < rule_text.size()) {
    while (pos < rule_text.size() && is_space(rule_text[pos])) ++pos;
    if (pos == rule_text.size()) break;
    const std::size_t begin = pos;
    while (pos < rule_text.size() && !is_space(rule_text[pos])) ++pos;
    tokens.push_back({.text = std::string(rule_text.substr(begin, pos - begin)),
                      .index = tokens.size(),
                      .begin = begin,
                      .end = pos,
                      .is_stopword = false});
  }
  return tokens;
}

std::string stopword_key(std::string_view token) {
  std::size_t first = 0;
  std::size_t last = token.size();
  while (first < last && !is_word_char(token[first])) ++first;
  while (last > first && !is_word_char(token[last - 1])) --last;
  std::string key(token.substr(first, last - first));
  for (char& c : key) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return key;
}

std::vector<WordToken> mark_stopwords(std::vector<WordToken> tokens,
                                      const Stoplist& stoplist) {
  for (auto& token : tokens) {
    const std::string key = stopword_key(token.text);
    token.is_stopword = !key.empty() && stoplist.contains(key);
  }
  return tokens;
}

std::vector<WordToken> tokenize_rule(std::string_view rule_text,
                                     const Stoplist& stoplist) {
  return mark_stopwords(segment_words(rule_text), stoplist);
}

Stoplist parse_stoplist(std::string_view text, std::string source) {
  Stoplist stoplist;
  stoplist.digest = sha256_hex(text);
  stoplist.source = std::move(source);
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    const auto last = line.find_last_not_of(" \t\r");
    stoplist.words.insert(line.substr(first, last - first + 1));
  }
  return stoplist;
}

Stoplist load_stoplist(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open stop-word file: " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_stoplist(buffer.str(), path.string());
}

std::string_view default_stoplist_text() { return kDefaultStopwordsText; }

Stoplist default_stoplist() {
  return parse_stoplist(default_stoplist_text(), "builtin");
}

std::string join_words(const std::vector<WordToken>& tokens) {
  std::string out;
  for (const auto& token : tokens) {
    if (!out.empty()) out.push_back(' ');
    out += token.text;
  }
  return out;
}

}  // namespace ablate
