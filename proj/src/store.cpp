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

#include "ablate/store.hpp"

#include <unistd.h>

#include <cctype>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <iostream>
#include <iterator>
#include <sstream>
#include <system_error>
#include <thread>

#include "ablate/digest.hpp"
#include "ablate/errors.hpp"

namespace ablate {
namespace {

std::atomic<std::uint64_t> temp_counter{0};

const char* const kKnownManifestFields[] = {
    "run_id",          "created_at",     "corpus_path", "corpus_digest",
    "models",          "alpha",          "stopword_path", "stopword_digest",
    "parallelism",     "tool_version"};

template <typename T>
T field(const nlohmann::json& obj, const char* key) {
  const auto it = obj.find(key);
  if (it == obj.end()) throw DataError(std::string("manifest: missing field '") + key + "'");
  try {
    return it->get<T>();
  } catch (const nlohmann::json::exception&) {
    throw DataError(std::string("manifest: field '") + key + "' has the wrong type");
  }
}

bool is_hex_digest(const std::string& key) {
  if (key.size() != 64) return false;
  for (const char c : key) {
    if (!std::isxdigit(static_cast<unsigned char>(c)) ||
        std::isupper(static_cast<unsigned char>(c))) {
      return false;
    }
  }
  return true;
}

}  // namespace

void write_file_atomic(const std::filesystem::path& path, std::string_view contents) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ostringstream suffix;
  suffix << ".tmp." << ::getpid() << "." << std::this_thread::get_id() << "."
         << temp_counter.fetch_add(1);
  const std::filesystem::path temp = path.string() + suffix.str();
  {
    std::ofstream out(temp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + temp.string());
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out.flush()) throw DataError("cannot write " + temp.string());
  }
  std::error_code ec;
  std::filesystem::rename(temp, path, ec);
  if (ec) {
    std::filesystem::remove(temp, ec);
    throw DataError("cannot move " + temp.string() + " into place at " + path.string());
  }
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read file: " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::string current_timestamp() {
  std::time_t seconds = 0;
  if (const char* epoch = std::getenv("SOURCE_DATE_EPOCH"); epoch && *epoch) {
    seconds = static_cast<std::time_t>(std::strtoll(epoch, nullptr, 10));
  } else {
    seconds = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  }
  std::tm utc{};
  ::gmtime_r(&seconds, &utc);
  char buffer[32];
  std::strftime(buffer, sizeof(buffer), "%Y-%m-%dT%H:%M:%SZ", &utc);
  return buffer;
}

nlohmann::json to_json(const RunManifest& manifest) {
  nlohmann::json obj = manifest.extra.is_object() ? manifest.extra : nlohmann::json::object();
  obj["run_id"] = manifest.run_id;
  obj["created_at"] = manifest.created_at;
  obj["corpus_path"] = manifest.corpus_path;
  obj["corpus_digest"] = manifest.corpus_digest;
  nlohmann::json models = nlohmann::json::array();
  for (const auto& m : manifest.models) {
    models.push_back({{"model_id", m.model_id},
                      {"endpoint", m.endpoint},
                      {"parameters", m.parameters}});
  }
  obj["models"] = std::move(models);
  obj["alpha"] = manifest.alpha;
  obj["stopword_path"] = manifest.stopword_path;
  obj["stopword_digest"] = manifest.stopword_digest;
  obj["parallelism"] = manifest.parallelism;
  obj["tool_version"] = manifest.tool_version;
  return obj;
}

RunManifest manifest_from_json(const nlohmann::json& obj) {
  if (!obj.is_object()) throw DataError("manifest: expected a JSON object");
  RunManifest m;
  m.run_id = field<std::string>(obj, "run_id");
  m.created_at = field<std::string>(obj, "created_at");
  m.corpus_path = field<std::string>(obj, "corpus_path");
  m.corpus_digest = field<std::string>(obj, "corpus_digest");
  const auto models = field<nlohmann::json>(obj, "models");
  if (!models.is_array()) throw DataError("manifest: 'models' must be an array");
  for (const auto& entry : models) {
    ModelEntry model;
    model.model_id = field<std::string>(entry, "model_id");
    model.endpoint = field<std::string>(entry, "endpoint");
    if (const auto it = entry.find("parameters"); it != entry.end()) {
      model.parameters = *it;
    }
    m.models.push_back(std::move(model));
  }
  m.alpha = field<double>(obj, "alpha");
  m.stopword_path = field<std::string>(obj, "stopword_path");
  m.stopword_digest = field<std::string>(obj, "stopword_digest");
  m.parallelism = field<int>(obj, "parallelism");
  m.tool_version = field<std::string>(obj, "tool_version");
  m.extra = obj;
  for (const char* known : kKnownManifestFields) m.extra.erase(known);
  return m;
}

std::filesystem::path write_manifest(const RunManifest& manifest,
                                     const std::filesystem::path& dir) {
  const auto path = dir / "manifest.json";
  write_file_atomic(path, to_json(manifest).dump(2) + "\n");
  return path;
}

RunManifest read_manifest(const std::filesystem::path& path, bool verify) {
  const std::string text = read_file(path);
  nlohmann::json obj;
  try {
    obj = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError("manifest " + path.string() + ": malformed JSON (" + e.what() + ")");
  }
  RunManifest manifest = manifest_from_json(obj);
  if (!verify) return manifest;

  const auto check = [](const std::string& what, const std::string& file,
                        const std::string& expected) {
    std::string actual;
    try {
      actual = sha256_file(file);
    } catch (const DataError&) {
      throw IntegrityError(what + " file " + file + " referenced by manifest is missing");
    }
    if (actual != expected) {
      throw IntegrityError(what + " file " + file + " changed since the manifest was written (expected sha256 " +
                           expected + ", found " + actual + ")");
    }
  };
  check("corpus", manifest.corpus_path, manifest.corpus_digest);
  if (manifest.stopword_path != "builtin") {
    check("stop-word", manifest.stopword_path, manifest.stopword_digest);
  }
  return manifest;
}

DiskScoreCache::DiskScoreCache(std::filesystem::path root) : root_(std::move(root)) {}

std::filesystem::path DiskScoreCache::entry_path(const std::string& key) const {
  if (!is_hex_digest(key)) throw DataError("cache key is not a SHA-256 hex digest: " + key);
  return root_ / key.substr(0, 2) / key.substr(2, 2) / (key + ".json");
}

std::optional<ScoreResult> DiskScoreCache::get(const std::string& key) {
  const auto path = entry_path(key);
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    ++misses_;
    return std::nullopt;
  }
  const std::string text{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  try {
    ScoreResult result = score_result_from_json(nlohmann::json::parse(text));
    ++hits_;
    return result;
  } catch (const std::exception& e) {
    ++corrupt_;
    ++misses_;
    std::cerr << "warning: ignoring corrupt cache entry " << path.string() << ": "
              << e.what() << "\n";
    return std::nullopt;
  }
}

void DiskScoreCache::put(const std::string& key, const ScoreResult& result) {
  write_file_atomic(entry_path(key), to_json(result).dump());
}

}  // namespace ablate
