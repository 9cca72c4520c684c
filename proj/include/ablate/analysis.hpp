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

// Cross-model comparison of attribution vectors: cosine similarity, paired
// hypothesis tests and box-plot summaries.

#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ablate/attribution.hpp"
#include "json.hpp"

namespace ablate {

struct SimilarityRecord {
  std::string sample_id;
  std::string model_a;
  std::string model_b;
  double cosine = 0.0;
};

enum class TestMethod { kPairedT, kWilcoxonSignedRank };

const char* to_string(TestMethod method);

struct HypothesisTestResult {
  TestMethod method = TestMethod::kPairedT;
  double statistic = 0.0;
  double p_value = 1.0;
  std::size_t n = 0;  // effective pairs (non-zero differences for Wilcoxon)
  nlohmann::ordered_json detail = nlohmann::ordered_json::object();
};

struct BoxSummary {
  double median = 0.0;
  double q1 = 0.0;
  double q3 = 0.0;
  double whisker_low = 0.0;
  double whisker_high = 0.0;
  std::vector<double> outliers;  // ascending
  std::size_t n = 0;
};

nlohmann::ordered_json to_json(const BoxSummary& box);
BoxSummary box_from_json(const nlohmann::json& obj);
nlohmann::ordered_json to_json(const HypothesisTestResult& result);

// Score vectors over the non-excluded entries of two records for the same
// sample. Throws DataError naming the first index where words or exclusion
// masks differ.
std::pair<std::vector<double>, std::vector<double>> align_vectors(
    const AttributionRecord& a, const AttributionRecord& b);

// u.v / (|u| |v|), clamped to [-1, 1]. Throws DegenerateDataError if either
// vector is all zero, DataError on length mismatch or empty input.
double cosine_similarity(std::span<const double> u, std::span<const double> v);

struct PairSimilarities {
  std::string model_a;
  std::string model_b;
  std::vector<SimilarityRecord> samples;  // sorted by sample_id
  double mean_cosine = 0.0;
  BoxSummary box;
};

// Every unordered model pair (a < b), each over all shared samples. Throws
// DataError listing sample ids missing from any model.
std::vector<PairSimilarities> pairwise_similarities(
    const std::map<std::string, std::vector<AttributionRecord>>& records_by_model);

// Two-sided paired t-test on d_i = x_i - y_i with n - 1 degrees of freedom.
HypothesisTestResult paired_t_test(std::span<const double> xs, std::span<const double> ys);

enum class WilcoxonMode {
  kAuto,    // exact for n_nonzero <= 20, normal approximation above
  kExact,
  kNormal,
};

inline constexpr std::size_t kWilcoxonExactLimit = 20;

// Two-sided Wilcoxon signed-rank test. Zero differences are dropped, tied
// magnitudes get average ranks, statistic W = min(W+, W-).
HypothesisTestResult wilcoxon_signed_rank(std::span<const double> xs,
                                          std::span<const double> ys,
                                          WilcoxonMode mode = WilcoxonMode::kAuto);

// Quartiles by linear interpolation at position p * (n - 1) of the sorted
// data; whiskers at the most extreme points within 1.5 IQR of the box.
BoxSummary box_stats(std::span<const double> values);

// I_x(a, b) by Lentz's continued fraction.
double regularized_incomplete_beta(double a, double b, double x);
// P(T <= t) for Student's t with `df` degrees of freedom.
double student_t_cdf(double t, double df);
// P(|T| >= |t|) = I_{df/(df+t^2)}(df/2, 1/2).
double student_t_two_sided_p(double t, double df);
double normal_cdf(double z);

// One paired test between two similarity series that share a pivot model,
// e.g. sim(a, b) against sim(a, c). Degenerate data is recorded, not thrown.
struct ComparisonTest {
  std::string comparison;  // "<a>-vs-<b> vs <a>-vs-<c>"
  std::string pivot;
  TestMethod method = TestMethod::kPairedT;
  std::optional<HypothesisTestResult> result;
  std::string error;
};

struct AnalysisResult {
  std::vector<PairSimilarities> pairs;
  std::vector<ComparisonTest> tests;
};

AnalysisResult compare_models(
    const std::map<std::string, std::vector<AttributionRecord>>& records_by_model);

nlohmann::ordered_json to_json(const AnalysisResult& analysis);
std::string similarities_csv(const AnalysisResult& analysis);

}  // namespace ablate
