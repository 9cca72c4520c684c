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

#include "ablate/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>

#include "ablate/errors.hpp"

namespace ablate {
namespace {

constexpr int kMaxContinuedFractionTerms = 500;
constexpr double kFractionEps = 1e-16;
constexpr double kTiny = 1e-300;

// Continued fraction for I_x(a, b), modified Lentz evaluation. Converges
// quickly for x < (a + 1) / (a + b + 2).
double beta_continued_fraction(double a, double b, double x) {
  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxContinuedFractionTerms; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::abs(delta - 1.0) < kFractionEps) break;
  }
  return h;
}

void require_paired(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size()) {
    throw DataError("paired test needs equal-length samples (" + std::to_string(xs.size()) +
                    " vs " + std::to_string(ys.size()) + ")");
  }
}

double quantile_sorted(const std::vector<double>& sorted, double p) {
  const double h = p * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= sorted.size()) return sorted.back();
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[lo + 1] - sorted[lo]);
}

std::string pair_label(const std::string& a, const std::string& b) {
  return a + "-vs-" + b;
}

std::string csv_field(const std::string& value) {
  if (value.find_first_of(",\"\n\r") == std::string::npos) return value;
  std::string quoted = "\"";
  for (const char c : value) {
    if (c == '"') quoted.push_back('"');
    quoted.push_back(c);
  }
  quoted.push_back('"');
  return quoted;
}

}  // namespace

const char* to_string(TestMethod method) {
  switch (method) {
    case TestMethod::kPairedT:
      return "paired-t";
    case TestMethod::kWilcoxonSignedRank:
      return "wilcoxon-signed-rank";
  }
  return "unknown";
}

nlohmann::ordered_json to_json(const BoxSummary& box) {
  return {{"n", box.n},
          {"median", box.median},
          {"q1", box.q1},
          {"q3", box.q3},
          {"whisker_low", box.whisker_low},
          {"whisker_high", box.whisker_high},
          {"outliers", box.outliers}};
}

BoxSummary box_from_json(const nlohmann::json& obj) {
  try {
    BoxSummary box;
    box.n = obj.at("n").get<std::size_t>();
    box.median = obj.at("median").get<double>();
    box.q1 = obj.at("q1").get<double>();
    box.q3 = obj.at("q3").get<double>();
    box.whisker_low = obj.at("whisker_low").get<double>();
    box.whisker_high = obj.at("whisker_high").get<double>();
    box.outliers = obj.at("outliers").get<std::vector<double>>();
    return box;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed box summary: ") + e.what());
  }
}

nlohmann::ordered_json to_json(const HypothesisTestResult& result) {
  return {{"method", to_string(result.method)},
          {"statistic", result.statistic},
          {"p_value", result.p_value},
          {"n", result.n},
          {"detail", result.detail}};
}

std::pair<std::vector<double>, std::vector<double>> align_vectors(
    const AttributionRecord& a, const AttributionRecord& b) {
  if (a.sample_id != b.sample_id) {
    throw DataError("cannot align records of different samples ('" + a.sample_id +
                    "' vs '" + b.sample_id + "')");
  }
  const std::size_t common = std::min(a.entries.size(), b.entries.size());
  for (std::size_t i = 0; i < common; ++i) {
    const auto& ea = a.entries[i];
    const auto& eb = b.entries[i];
    if (ea.word != eb.word || ea.excluded() != eb.excluded()) {
      throw DataError("sample '" + a.sample_id + "': records differ at word index " +
                      std::to_string(i));
    }
  }
  if (a.entries.size() != b.entries.size()) {
    throw DataError("sample '" + a.sample_id + "': records differ at word index " +
                    std::to_string(common));
  }
  std::pair<std::vector<double>, std::vector<double>> out;
  for (std::size_t i = 0; i < common; ++i) {
    if (a.entries[i].excluded()) continue;
    out.first.push_back(*a.entries[i].score);
    out.second.push_back(*b.entries[i].score);
  }
  return out;
}

double cosine_similarity(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) throw DataError("cosine similarity of vectors of different length");
  if (u.empty()) throw DegenerateDataError("cosine similarity of empty vectors is undefined");
  double dot = 0.0;
  double uu = 0.0;
  double vv = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    dot += u[i] * v[i];
    uu += u[i] * u[i];
    vv += v[i] * v[i];
  }
  if (uu == 0.0 || vv == 0.0) {
    throw DegenerateDataError("cosine similarity with an all-zero vector is undefined");
  }
  return std::clamp(dot / (std::sqrt(uu) * std::sqrt(vv)), -1.0, 1.0);
}

std::vector<PairSimilarities> pairwise_similarities(
    const std::map<std::string, std::vector<AttributionRecord>>& records_by_model) {
  // model -> sample_id -> record
  std::map<std::string, std::map<std::string, const AttributionRecord*>> index;
  std::set<std::string> all_samples;
  for (const auto& [model, records] : records_by_model) {
    auto& by_sample = index[model];
    for (const auto& record : records) {
      if (!by_sample.emplace(record.sample_id, &record).second) {
        throw DataError("model '" + model + "' has duplicate sample '" + record.sample_id + "'");
      }
      all_samples.insert(record.sample_id);
    }
  }
  std::ostringstream missing;
  for (const auto& [model, by_sample] : index) {
    std::vector<std::string> absent;
    for (const auto& s : all_samples) {
      if (!by_sample.contains(s)) absent.push_back(s);
    }
    if (absent.empty()) continue;
    missing << " " << model << " lacks [";
    for (std::size_t i = 0; i < absent.size(); ++i) missing << (i ? "," : "") << absent[i];
    missing << "]";
  }
  if (!missing.str().empty()) throw DataError("sample sets differ:" + missing.str());

  std::vector<PairSimilarities> pairs;
  for (auto a = index.begin(); a != index.end(); ++a) {
    for (auto b = std::next(a); b != index.end(); ++b) {
      PairSimilarities pair{.model_a = a->first, .model_b = b->first};
      std::vector<double> cosines;
      for (const auto& sample : all_samples) {
        const auto [u, v] = align_vectors(*a->second.at(sample), *b->second.at(sample));
        double cosine = 0.0;
        try {
          cosine = cosine_similarity(u, v);
        } catch (const DataError& e) {
          throw DegenerateDataError("sample '" + sample + "', " + pair_label(a->first, b->first) +
                                    ": " + e.what());
        }
        pair.samples.push_back({sample, a->first, b->first, cosine});
        cosines.push_back(cosine);
      }
      if (!cosines.empty()) {
        pair.mean_cosine = std::accumulate(cosines.begin(), cosines.end(), 0.0) /
                           static_cast<double>(cosines.size());
        pair.box = box_stats(cosines);
      }
      pairs.push_back(std::move(pair));
    }
  }
  return pairs;
}

HypothesisTestResult paired_t_test(std::span<const double> xs, std::span<const double> ys) {
  require_paired(xs, ys);
  const std::size_t n = xs.size();
  if (n < 2) throw DataError("paired t-test needs at least 2 pairs");
  std::vector<double> d(n);
  for (std::size_t i = 0; i < n; ++i) d[i] = xs[i] - ys[i];
  if (std::all_of(d.begin(), d.end(), [&](double x) { return x == d.front(); })) {
    throw DegenerateDataError("paired t-test: all differences are equal (zero variance)");
  }
  const double mean = std::accumulate(d.begin(), d.end(), 0.0) / static_cast<double>(n);
  double ss = 0.0;
  for (const double x : d) ss += (x - mean) * (x - mean);
  const double sd = std::sqrt(ss / static_cast<double>(n - 1));
  if (sd == 0.0) throw DegenerateDataError("paired t-test: zero variance of differences");

  const double df = static_cast<double>(n - 1);
  HypothesisTestResult result;
  result.method = TestMethod::kPairedT;
  result.statistic = mean / (sd / std::sqrt(static_cast<double>(n)));
  result.p_value = student_t_two_sided_p(result.statistic, df);
  result.n = n;
  result.detail = {{"df", n - 1}, {"mean_difference", mean}};
  return result;
}

HypothesisTestResult wilcoxon_signed_rank(std::span<const double> xs, std::span<const double> ys,
                                          WilcoxonMode mode) {
  require_paired(xs, ys);
  std::vector<double> d;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double diff = xs[i] - ys[i];
    if (diff != 0.0) d.push_back(diff);
  }
  const std::size_t n = d.size();
  if (n == 0) throw DegenerateDataError("Wilcoxon test: all differences are zero");

  // Doubled average ranks are integers, which keeps the exact null
  // distribution in integer arithmetic.
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return std::abs(d[a]) < std::abs(d[b]); });
  std::vector<std::size_t> rank2(n);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && std::abs(d[order[j + 1]]) == std::abs(d[order[i]])) ++j;
    // Positions i..j (0-based) share rank ((i+1) + (j+1)) / 2.
    for (std::size_t k = i; k <= j; ++k) rank2[order[k]] = i + j + 2;
    i = j + 1;
  }
  std::size_t w_plus2 = 0;
  std::size_t w_minus2 = 0;
  for (std::size_t i = 0; i < n; ++i) (d[i] > 0 ? w_plus2 : w_minus2) += rank2[i];
  const std::size_t w2 = std::min(w_plus2, w_minus2);
  const double w = static_cast<double>(w2) / 2.0;

  const bool exact = mode == WilcoxonMode::kExact ||
                     (mode == WilcoxonMode::kAuto && n <= kWilcoxonExactLimit);
  if (exact && n > 62) throw DataError("exact Wilcoxon test supports at most 62 pairs");

  double p = 1.0;
  if (exact) {
    // counts[s] = number of sign assignments whose doubled positive rank
    // sum is s, over all 2^n assignments.
    const std::size_t total2 = w_plus2 + w_minus2;
    std::vector<double> counts(total2 + 1, 0.0);
    counts[0] = 1.0;
    std::size_t reach = 0;
    for (const std::size_t r : rank2) {
      for (std::size_t s = reach + 1; s-- > 0;) {
        if (counts[s] != 0.0) counts[s + r] += counts[s];
      }
      reach += r;
    }
    double extreme = 0.0;
    for (std::size_t s = 0; s <= total2; ++s) {
      if (std::min(s, total2 - s) <= w2) extreme += counts[s];
    }
    p = extreme / std::ldexp(1.0, static_cast<int>(n));
  } else {
    const double nn = static_cast<double>(n);
    const double mean = nn * (nn + 1.0) / 4.0;
    const double sd = std::sqrt(nn * (nn + 1.0) * (2.0 * nn + 1.0) / 24.0);
    const double z = std::max(0.0, (mean - w - 0.5) / sd);
    p = std::erfc(z / std::sqrt(2.0));
  }

  HypothesisTestResult result;
  result.method = TestMethod::kWilcoxonSignedRank;
  result.statistic = w;
  result.p_value = std::clamp(p, 0.0, 1.0);
  result.n = n;
  result.detail = {{"n_nonzero", n},
                   {"exact", exact},
                   {"w_plus", static_cast<double>(w_plus2) / 2.0},
                   {"w_minus", static_cast<double>(w_minus2) / 2.0}};
  return result;
}

BoxSummary box_stats(std::span<const double> values) {
  if (values.empty()) throw DataError("box summary of an empty sample");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  BoxSummary box;
  box.n = sorted.size();
  box.q1 = quantile_sorted(sorted, 0.25);
  box.median = quantile_sorted(sorted, 0.5);
  box.q3 = quantile_sorted(sorted, 0.75);
  const double iqr = box.q3 - box.q1;
  const double low_fence = box.q1 - 1.5 * iqr;
  const double high_fence = box.q3 + 1.5 * iqr;
  box.whisker_low = box.q1;
  box.whisker_high = box.q3;
  bool low_set = false;
  for (const double x : sorted) {
    if (x < low_fence || x > high_fence) {
      box.outliers.push_back(x);
      continue;
    }
    if (!low_set) {
      box.whisker_low = x;
      low_set = true;
    }
    box.whisker_high = x;
  }
  return box;
}

double regularized_incomplete_beta(double a, double b, double x) {
  if (!(a > 0.0) || !(b > 0.0)) throw DataError("incomplete beta needs a, b > 0");
  if (std::isnan(x)) return x;
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double log_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                           a * std::log(x) + b * std::log1p(-x);
  const double front = std::exp(log_front);
  if (x < (a + 1.0) / (a + b + 2.0)) {
    return front * beta_continued_fraction(a, b, x) / a;
  }
  return 1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b;
}

double student_t_two_sided_p(double t, double df) {
  if (!(df > 0.0)) throw DataError("Student t needs df > 0");
  if (std::isinf(t)) return 0.0;
  return std::clamp(regularized_incomplete_beta(df / 2.0, 0.5, df / (df + t * t)), 0.0, 1.0);
}

double student_t_cdf(double t, double df) {
  const double tail = student_t_two_sided_p(t, df) / 2.0;
  return t >= 0.0 ? 1.0 - tail : tail;
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

AnalysisResult compare_models(
    const std::map<std::string, std::vector<AttributionRecord>>& records_by_model) {
  AnalysisResult analysis;
  analysis.pairs = pairwise_similarities(records_by_model);

  std::map<std::pair<std::string, std::string>, const PairSimilarities*> by_pair;
  for (const auto& pair : analysis.pairs) by_pair[{pair.model_a, pair.model_b}] = &pair;
  const auto series = [&](const std::string& x, const std::string& y) {
    const auto* pair = by_pair.at(x < y ? std::pair{x, y} : std::pair{y, x});
    std::vector<double> out;
    for (const auto& s : pair->samples) out.push_back(s.cosine);
    return out;
  };

  std::vector<std::string> models;
  for (const auto& [model, records] : records_by_model) models.push_back(model);
  for (const auto& pivot : models) {
    for (std::size_t i = 0; i < models.size(); ++i) {
      for (std::size_t j = i + 1; j < models.size(); ++j) {
        const auto& q = models[i];
        const auto& r = models[j];
        if (q == pivot || r == pivot) continue;
        const auto xs = series(pivot, q);
        const auto ys = series(pivot, r);
        const std::string label = pair_label(pivot, q) + " vs " + pair_label(pivot, r);
        for (const auto method : {TestMethod::kPairedT, TestMethod::kWilcoxonSignedRank}) {
          ComparisonTest test{.comparison = label, .pivot = pivot, .method = method};
          try {
            test.result = method == TestMethod::kPairedT ? paired_t_test(xs, ys)
                                                         : wilcoxon_signed_rank(xs, ys);
          } catch (const DataError& e) {
            test.error = e.what();
          }
          analysis.tests.push_back(std::move(test));
        }
      }
    }
  }
  return analysis;
}

nlohmann::ordered_json to_json(const AnalysisResult& analysis) {
  nlohmann::ordered_json pairs = nlohmann::ordered_json::array();
  for (const auto& pair : analysis.pairs) {
    nlohmann::ordered_json samples = nlohmann::ordered_json::array();
    for (const auto& s : pair.samples) {
      samples.push_back({{"sample_id", s.sample_id}, {"cosine", s.cosine}});
    }
    nlohmann::ordered_json entry = {{"model_a", pair.model_a},
                                    {"model_b", pair.model_b},
                                    {"mean_cosine", pair.mean_cosine},
                                    {"samples", std::move(samples)}};
    entry["box"] = pair.samples.empty() ? nlohmann::ordered_json(nullptr) : to_json(pair.box);
    pairs.push_back(std::move(entry));
  }
  nlohmann::ordered_json tests = nlohmann::ordered_json::array();
  for (const auto& test : analysis.tests) {
    nlohmann::ordered_json entry = {{"comparison", test.comparison},
                                    {"pivot", test.pivot},
                                    {"method", to_string(test.method)}};
    if (test.result) {
      entry["statistic"] = test.result->statistic;
      entry["p_value"] = test.result->p_value;
      entry["n"] = test.result->n;
      entry["detail"] = test.result->detail;
    } else {
      entry["error"] = test.error;
    }
    tests.push_back(std::move(entry));
  }
  return {{"pairs", std::move(pairs)}, {"tests", std::move(tests)}};
}

std::string similarities_csv(const AnalysisResult& analysis) {
  std::string out = "sample_id,model_a,model_b,cosine\n";
  for (const auto& pair : analysis.pairs) {
    for (const auto& s : pair.samples) {
      out += csv_field(s.sample_id) + "," + csv_field(s.model_a) + "," +
             csv_field(s.model_b) + "," +
             nlohmann::json(s.cosine).dump() + "\n";
    }
  }
  return out;
}

}  // namespace ablate
