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

// Embedding-based greedy-matching similarity between generated and
// reference scripts.

#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ablate/analysis.hpp"
#include "ablate/corpus.hpp"
#include "ablate/scorer.hpp"
#include "json.hpp"

namespace ablate {

struct SemSimScore {
  double precision = 0.0;
  double recall = 0.0;
  std::optional<double> f1;      // empty when P + R <= 0
  std::optional<double> f_beta;  // empty when beta^2 P + R <= 0
  double beta = 1.0;
  std::size_t n_gen_tokens = 0;
  std::size_t n_ref_tokens = 0;
};

// (1 + beta^2) P R / (beta^2 P + R), or empty when the denominator is not
// positive.
std::optional<double> f_beta_score(double precision, double recall, double beta);

// P: mean over generated vectors of the best cosine against the reference.
// R: mean over reference vectors of the best cosine against the generated.
SemSimScore greedy_match(std::span<const std::vector<double>> gen_vectors,
                         std::span<const std::vector<double>> ref_vectors, double beta);

// Embeds both scripts with the backend (its tokenization is authoritative)
// and greedy-matches them.
SemSimScore evaluate_pair(const RulePair& pair, const std::string& model_id,
                          EmbedBackend& embedder, double beta);

struct SampleScore {
  std::string sample_id;
  SemSimScore score;
};

struct ModelEvaluation {
  std::string model_id;
  std::vector<SampleScore> samples;  // corpus order
  std::optional<BoxSummary> box_f1;
  std::optional<BoxSummary> box_fbeta;
};

struct EvaluationFailure {
  std::string sample_id;
  std::string model_id;
  std::string message;
};

struct CorpusEvaluation {
  double beta = 3.0;
  std::vector<ModelEvaluation> models;  // in requested order
  std::vector<EvaluationFailure> failures;
};

struct EvaluationConfig {
  double beta = 3.0;
  std::size_t parallelism = 1;
  std::size_t max_failures = 0;
};

// One score per (sample, model). Failures beyond config.max_failures throw
// DataError (BackendError if any failure came from the backend).
CorpusEvaluation evaluate_corpus(const std::vector<RulePair>& corpus,
                                 const std::vector<std::string>& model_ids,
                                 EmbedBackend& embedder, const EvaluationConfig& config);

nlohmann::ordered_json to_json(const CorpusEvaluation& evaluation);

}  // namespace ablate
