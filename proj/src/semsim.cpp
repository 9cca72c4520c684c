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

#include "ablate/semsim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ablate/errors.hpp"
#include "ablate/parallel.hpp"

namespace ablate {
namespace {

double cosine(const std::vector<double>& a, const std::vector<double>& b) {
  double dot = 0.0;
  double aa = 0.0;
  double bb = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    dot += a[k] * b[k];
    aa += a[k] * a[k];
    bb += b[k] * b[k];
  }
  return dot / std::sqrt(aa * bb);
}

// Mean over `rows` of the best cosine against any of `cols`. Precision and
// recall are the two argument orders of this one function, which makes
// swapping the inputs swap P and R bit for bit.
double mean_best_match(std::span<const std::vector<double>> rows,
                       std::span<const std::vector<double>> cols) {
  double total = 0.0;
  for (const auto& r : rows) {
    double best = -std::numeric_limits<double>::infinity();
    for (const auto& c : cols) best = std::max(best, cosine(r, c));
    total += best;
  }
  return total / static_cast<double>(rows.size());
}

void check_vectors(std::span<const std::vector<double>> vectors, std::size_t dim,
                   const char* which) {
  for (const auto& v : vectors) {
    if (v.size() != dim) throw DataError(std::string(which) + " vectors have inconsistent dimensions");
    if (std::all_of(v.begin(), v.end(), [](double x) { return x == 0.0; })) {
      throw DataError(std::string(which) + " contains an all-zero vector");
    }
  }
}

std::optional<BoxSummary> box_of(const std::vector<SampleScore>& samples, bool use_f1) {
  std::vector<double> values;
  for (const auto& s : samples) {
    const auto& v = use_f1 ? s.score.f1 : s.score.f_beta;
    if (v) values.push_back(*v);
  }
  if (values.empty()) return std::nullopt;
  return box_stats(values);
}

nlohmann::ordered_json optional_number(const std::optional<double>& v) {
  return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
}

}  // namespace

std::optional<double> f_beta_score(double precision, double recall, double beta) {
  const double b2 = beta * beta;
  const double denominator = b2 * precision + recall;
  if (!(denominator > 0.0)) return std::nullopt;
  return (1.0 + b2) * precision * recall / denominator;
}

SemSimScore greedy_match(std::span<const std::vector<double>> gen_vectors,
                         std::span<const std::vector<double>> ref_vectors, double beta) {
  if (!(beta > 0.0)) throw UsageError("beta must be positive");
  if (gen_vectors.empty()) throw DataError("greedy match: generated script has no tokens");
  if (ref_vectors.empty()) throw DataError("greedy match: reference script has no tokens");
  const std::size_t dim = gen_vectors.front().size();
  if (dim == 0) throw DataError("greedy match: zero-dimensional embeddings");
  check_vectors(gen_vectors, dim, "generated");
  check_vectors(ref_vectors, dim, "reference");

  SemSimScore score;
  score.beta = beta;
  score.n_gen_tokens = gen_vectors.size();
  score.n_ref_tokens = ref_vectors.size();
  score.precision = mean_best_match(gen_vectors, ref_vectors);
  score.recall = mean_best_match(ref_vectors, gen_vectors);
  score.f1 = f_beta_score(score.precision, score.recall, 1.0);
  score.f_beta = f_beta_score(score.precision, score.recall, beta);
  return score;
}

SemSimScore evaluate_pair(const RulePair& pair, const std::string& model_id,
                          EmbedBackend& embedder, double beta) {
  const auto it = pair.generated_scripts.find(model_id);
  if (it == pair.generated_scripts.end()) {
    throw DataError("sample '" + pair.id + "' has no generated script for model '" + model_id + "'");
  }
  const EmbeddingResult gen = embedder.embed(it->second);
  validate(gen);
  const EmbeddingResult ref = embedder.embed(pair.reference_script);
  validate(ref);
  if (gen.vectors.empty()) {
    throw DataError("sample '" + pair.id + "': generated script for '" + model_id +
                    "' has no tokens");
  }
  return greedy_match(gen.vectors, ref.vectors, beta);
}

CorpusEvaluation evaluate_corpus(const std::vector<RulePair>& corpus,
                                 const std::vector<std::string>& model_ids,
                                 EmbedBackend& embedder, const EvaluationConfig& config) {
  if (!(config.beta > 0.0)) throw UsageError("beta must be positive");
  const std::size_t jobs = corpus.size() * model_ids.size();
  std::vector<std::optional<SemSimScore>> slots(jobs);
  const auto errors = parallel_for_each_index(jobs, config.parallelism, [&](std::size_t job) {
    const auto& pair = corpus[job % corpus.size()];
    const auto& model = model_ids[job / corpus.size()];
    slots[job] = evaluate_pair(pair, model, embedder, config.beta);
  });

  CorpusEvaluation evaluation;
  evaluation.beta = config.beta;
  bool backend_failure = false;
  for (std::size_t m = 0; m < model_ids.size(); ++m) {
    ModelEvaluation model{.model_id = model_ids[m]};
    for (std::size_t s = 0; s < corpus.size(); ++s) {
      const std::size_t job = m * corpus.size() + s;
      if (errors[job]) {
        std::string message = "unknown error";
        try {
          std::rethrow_exception(errors[job]);
        } catch (const Error& e) {
          message = e.what();
          backend_failure = backend_failure || e.kind() == ErrorKind::kBackend;
        } catch (const std::exception& e) {
          message = e.what();
        }
        evaluation.failures.push_back({corpus[s].id, model_ids[m], message});
        continue;
      }
      model.samples.push_back({corpus[s].id, *slots[job]});
    }
    model.box_f1 = box_of(model.samples, true);
    model.box_fbeta = box_of(model.samples, false);
    evaluation.models.push_back(std::move(model));
  }
  if (evaluation.failures.size() > config.max_failures) {
    const std::string message = std::to_string(evaluation.failures.size()) +
                                " evaluation(s) failed (first: " +
                                evaluation.failures.front().message + ")";
    if (backend_failure) throw BackendError(message, false, 1);
    throw DataError(message);
  }
  return evaluation;
}

nlohmann::ordered_json to_json(const CorpusEvaluation& evaluation) {
  nlohmann::ordered_json models = nlohmann::ordered_json::array();
  for (const auto& model : evaluation.models) {
    nlohmann::ordered_json samples = nlohmann::ordered_json::array();
    for (const auto& s : model.samples) {
      samples.push_back({{"sample_id", s.sample_id},
                         {"precision", s.score.precision},
                         {"recall", s.score.recall},
                         {"f1", optional_number(s.score.f1)},
                         {"f_beta", optional_number(s.score.f_beta)},
                         {"n_gen_tokens", s.score.n_gen_tokens},
                         {"n_ref_tokens", s.score.n_ref_tokens}});
    }
    models.push_back(
        {{"model_id", model.model_id},
         {"samples", std::move(samples)},
         {"box_f1", model.box_f1 ? to_json(*model.box_f1) : nlohmann::ordered_json(nullptr)},
         {"box_fbeta",
          model.box_fbeta ? to_json(*model.box_fbeta) : nlohmann::ordered_json(nullptr)}});
  }
  nlohmann::ordered_json out = {{"beta", evaluation.beta}, {"models", std::move(models)}};
  if (!evaluation.failures.empty()) {
    nlohmann::ordered_json failures = nlohmann::ordered_json::array();
    for (const auto& f : evaluation.failures) {
      failures.push_back(
          {{"sample_id", f.sample_id}, {"model_id", f.model_id}, {"error", f.message}});
    }
    out["failures"] = std::move(failures);
  }
  return out;
}

}  // namespace ablate
