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

// On-disk persistence: run manifests, the content-addressed score cache, and
// atomic file writes.

#pragma once

#include <atomic>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ablate/scorer.hpp"
#include "json.hpp"

namespace ablate {

// Writes via a sibling temp file and rename(2), so readers never observe a
// partially written file.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

std::string read_file(const std::filesystem::path& path);

// RFC 3339 UTC. Honours SOURCE_DATE_EPOCH for reproducible outputs.
std::string current_timestamp();

struct ModelEntry {
  std::string model_id;
  std::string endpoint;  // URL, or "reference"
  nlohmann::json parameters = nlohmann::json::object();

  friend bool operator==(const ModelEntry&, const ModelEntry&) = default;
};

struct RunManifest {
  std::string run_id;
  std::string created_at;
  std::string corpus_path;
  std::string corpus_digest;
  std::vector<ModelEntry> models;
  double alpha = 1.0;
  std::string stopword_path;  // file path, or "builtin"
  std::string stopword_digest;
  int parallelism = 1;
  std::string tool_version;
  // Fields this version does not know about; re-emitted verbatim.
  nlohmann::json extra = nlohmann::json::object();

  friend bool operator==(const RunManifest&, const RunManifest&) = default;
};

nlohmann::json to_json(const RunManifest& manifest);
RunManifest manifest_from_json(const nlohmann::json& obj);

// Writes <dir>/manifest.json and returns its path.
std::filesystem::path write_manifest(const RunManifest& manifest,
                                     const std::filesystem::path& dir);

// With `verify`, re-hashes the corpus and stop-word files the manifest
// points at and throws IntegrityError on any mismatch.
RunManifest read_manifest(const std::filesystem::path& path, bool verify = false);

class ScoreCache {
 public:
  virtual ~ScoreCache() = default;
  virtual std::optional<ScoreResult> get(const std::string& key) = 0;
  virtual void put(const std::string& key, const ScoreResult& result) = 0;
};

// One JSON file per entry at <root>/<aa>/<bb>/<key>.json. Safe for
// concurrent readers and writers across threads and processes.
class DiskScoreCache final : public ScoreCache {
 public:
  explicit DiskScoreCache(std::filesystem::path root);

  // Corrupt or unreadable entries are reported on stderr and treated as
  // absent.
  std::optional<ScoreResult> get(const std::string& key) override;
  void put(const std::string& key, const ScoreResult& result) override;

  std::filesystem::path entry_path(const std::string& key) const;

  std::size_t hits() const { return hits_.load(); }
  std::size_t misses() const { return misses_.load(); }
  std::size_t corrupt_entries() const { return corrupt_.load(); }

 private:
  std::filesystem::path root_;
  std::atomic<std::size_t> hits_{0};
  std::atomic<std::size_t> misses_{0};
  std::atomic<std::size_t> corrupt_{0};
};

}  // namespace ablate
