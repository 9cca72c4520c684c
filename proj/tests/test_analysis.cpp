#include <algorithm>
#include <cmath>
#include <random>

#include "ablate/analysis.hpp"
#include "ablate/errors.hpp"
#include "doctest.h"

using namespace ablate;

namespace {

AttributionRecord record(std::string sample, std::string model,
                         std::vector<std::optional<double>> scores) {
  AttributionRecord r{.sample_id = std::move(sample), .model_id = std::move(model)};
  for (std::size_t i = 0; i < scores.size(); ++i) {
    r.entries.push_back({"w" + std::to_string(i), i, scores[i]});
  }
  return r;
}

// Enumerates every sign assignment of the ranks 1..n.
double enumerate_wilcoxon_p(const std::vector<double>& diffs) {
  std::vector<std::pair<double, double>> by_abs;
  for (double d : diffs) {
    if (d != 0.0) by_abs.push_back({std::abs(d), d});
  }
  std::sort(by_abs.begin(), by_abs.end());
  const std::size_t n = by_abs.size();
  std::vector<double> ranks(n);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && by_abs[j].first == by_abs[i].first) ++j;
    for (std::size_t k = i; k < j; ++k) ranks[k] = (i + 1 + j) / 2.0;
    i = j;
  }
  double total = 0.0, w_plus = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    total += ranks[i];
    if (by_abs[i].second > 0) w_plus += ranks[i];
  }
  const double w = std::min(w_plus, total - w_plus);
  std::size_t hits = 0;
  for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << n); ++mask) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (mask >> i & 1) s += ranks[i];
    }
    if (std::min(s, total - s) <= w) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(std::uint64_t{1} << n);
}

}  // namespace

TEST_CASE("cosine similarity") {
  const std::vector<double> u = {0.3, -1.2, 2.5, 0.01};
  std::vector<double> neg, scaled;
  for (double x : u) {
    neg.push_back(-x);
    scaled.push_back(x * 7.25);
  }
  CHECK(std::abs(cosine_similarity(u, u) - 1.0) <= 1e-12);
  CHECK(std::abs(cosine_similarity(u, neg) + 1.0) <= 1e-12);
  CHECK(std::abs(cosine_similarity(std::vector{1.0, 0.0}, std::vector{0.0, 3.0})) <= 1e-12);
  CHECK(std::abs(cosine_similarity(u, scaled) - 1.0) <= 1e-12);
  CHECK_THROWS_AS(cosine_similarity(std::vector{0.0, 0.0}, std::vector{1.0, 1.0}), DegenerateDataError);
  CHECK_THROWS_AS(cosine_similarity(std::vector<double>{}, std::vector<double>{}), DegenerateDataError);
  CHECK_THROWS_AS(cosine_similarity(std::vector{1.0}, std::vector{1.0, 2.0}), DataError);

  std::mt19937_64 rng(3);
  std::normal_distribution<double> normal;
  for (int i = 0; i < 200; ++i) {
    std::vector<double> a(5), b(5);
    for (auto& x : a) x = normal(rng);
    for (auto& x : b) x = normal(rng);
    const double c = cosine_similarity(a, b);
    CHECK(c >= -1.0);
    CHECK(c <= 1.0);
    CHECK(c == doctest::Approx(cosine_similarity(b, a)).epsilon(1e-14));
  }
}

TEST_CASE("attribution vectors align on excluded words") {
  const auto a = record("s", "m1", {1.0, std::nullopt, 2.0});
  const auto b = record("s", "m2", {3.0, std::nullopt, 4.0});
  const auto [x, y] = align_vectors(a, b);
  CHECK(x == std::vector{1.0, 2.0});
  CHECK(y == std::vector{3.0, 4.0});

  CHECK_THROWS_AS(align_vectors(a, record("t", "m2", {3.0, std::nullopt, 4.0})), DataError);
  CHECK_THROWS_AS(align_vectors(a, record("s", "m2", {3.0, 5.0, 4.0})), DataError);
  CHECK_THROWS_AS(align_vectors(a, record("s", "m2", {3.0})), DataError);
}

TEST_CASE("pairwise similarities") {
  std::map<std::string, std::vector<AttributionRecord>> by_model;
  by_model["fft"] = {record("s2", "fft", {1, 0}), record("s1", "fft", {1, 1})};
  by_model["lora"] = {record("s1", "lora", {1, -1}), record("s2", "lora", {2, 0})};
  by_model["qlora"] = {record("s1", "qlora", {2, 2}), record("s2", "qlora", {0, 1})};
  const auto pairs = pairwise_similarities(by_model);
  REQUIRE(pairs.size() == 3);
  CHECK(pairs[0].model_a == "fft");
  CHECK(pairs[0].model_b == "lora");
  CHECK(pairs[2].model_a == "lora");
  CHECK(pairs[2].model_b == "qlora");
  std::size_t total = 0;
  for (const auto& p : pairs) total += p.samples.size();
  CHECK(total == 6);
  CHECK(pairs[0].samples[0].sample_id == "s1");
  CHECK(std::abs(pairs[0].samples[0].cosine) <= 1e-12);
  CHECK(pairs[0].samples[1].cosine == doctest::Approx(1.0));
  CHECK(pairs[0].mean_cosine == doctest::Approx(0.5));
  CHECK(pairs[1].samples[0].cosine == doctest::Approx(1.0));  // fft-qlora s1

  std::map<std::string, std::vector<AttributionRecord>> self;
  self["a"] = by_model["fft"];
  self["b"] = by_model["fft"];
  for (auto& r : self["b"]) r.model_id = "b";
  for (const auto& s : pairwise_similarities(self)[0].samples) {
    CHECK(std::abs(s.cosine - 1.0) <= 1e-12);
  }

  auto missing = by_model;
  missing["qlora"].pop_back();
  CHECK_THROWS_WITH_AS(pairwise_similarities(missing), doctest::Contains("s2"), DataError);
  auto dup = by_model;
  dup["fft"].push_back(record("s1", "fft", {1, 1}));
  CHECK_THROWS_AS(pairwise_similarities(dup), DataError);
}

TEST_CASE("paired t-test") {
  const std::vector<double> xs = {2, 4, 6, 8, 10};
  const std::vector<double> ys = {1, 2, 3, 4, 5};
  const auto r = paired_t_test(xs, ys);
  CHECK(r.statistic == doctest::Approx(4.242640687119285).epsilon(1e-12));
  CHECK(r.p_value == doctest::Approx(0.01323559956368269).epsilon(1e-10));
  CHECK(r.detail.at("df") == 4);
  CHECK(r.n == 5);

  const auto zero = paired_t_test(std::vector{1.0, -1.0}, std::vector{0.0, 0.0});
  CHECK(zero.statistic == 0.0);
  CHECK(zero.p_value == doctest::Approx(1.0));

  CHECK_THROWS_AS(paired_t_test(std::vector{1.0, 2.0}, std::vector{0.0, 1.0}), DegenerateDataError);
  CHECK_THROWS_AS(paired_t_test(std::vector{1.0}, std::vector{0.0}), DataError);
  CHECK_THROWS_AS(paired_t_test(std::vector{1.0, 2.0}, std::vector{0.0}), DataError);

  // Swapping the arguments flips the sign only.
  const auto swapped = paired_t_test(ys, xs);
  CHECK(swapped.statistic == doctest::Approx(-r.statistic));
  CHECK(swapped.p_value == doctest::Approx(r.p_value));
}

TEST_CASE("t and normal distribution functions") {
  struct Row {
    double t, df, cdf;
  };
  // High-precision reference values.
  const Row rows[] = {
      {0.5, 1, 0.64758361765043327418},  {-1.3, 2, 0.1616235159080201851},
      {2.0, 3, 0.93033701572057841158},  {4.2426, 4, 0.99338198514312212627},
      {1.0, 10, 0.82955343384897006366}, {-2.5, 30, 0.0090578245340333470509},
      {3.0, 7.5, 0.99080453069589774487}, {0.0, 5, 0.5},
  };
  for (const auto& row : rows) {
    CHECK(std::abs(student_t_cdf(row.t, row.df) - row.cdf) <= 1e-10);
  }
  CHECK(std::abs(normal_cdf(-3) - 0.0013498980316300945267) <= 1e-12);
  CHECK(std::abs(normal_cdf(0.5) - 0.69146246127401310364) <= 1e-12);
  CHECK(std::abs(normal_cdf(2) - 0.9772498680518207928) <= 1e-12);
  CHECK(std::abs(regularized_incomplete_beta(2, 3, 0.4) - 0.5248) <= 1e-12);
  CHECK(regularized_incomplete_beta(2, 3, 0) == 0.0);
  CHECK(regularized_incomplete_beta(2, 3, 1) == 1.0);
}

TEST_CASE("wilcoxon signed-rank exact") {
  const std::vector<double> diffs = {1, -2, 3, -4, 5, 6};
  const std::vector<double> zeros(diffs.size(), 0.0);
  const auto r = wilcoxon_signed_rank(diffs, zeros);
  CHECK(r.statistic == 6.0);
  CHECK(r.p_value == 0.4375);
  CHECK(r.p_value == enumerate_wilcoxon_p(diffs));
  CHECK(r.detail.at("exact") == true);
  CHECK(r.detail.at("w_plus") == 15.0);
  CHECK(r.detail.at("w_minus") == 6.0);

  const auto all_positive = wilcoxon_signed_rank(std::vector{1.0, 2.0, 3.0, 4.0}, std::vector(4, 0.0));
  CHECK(all_positive.statistic == 0.0);
  CHECK(all_positive.p_value == 0.125);

  const auto with_zeros =
      wilcoxon_signed_rank(std::vector{1.0, 0.0, -2.0, 0.0, 3.0}, std::vector(5, 0.0));
  CHECK(with_zeros.n == 3);
  CHECK(with_zeros.p_value == enumerate_wilcoxon_p({1, -2, 3}));

  CHECK_THROWS_AS(wilcoxon_signed_rank(std::vector{1.0, 2.0}, std::vector{1.0, 2.0}), DegenerateDataError);

  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 1 + rng() % 14;
    std::vector<double> d(n);
    for (auto& x : d) x = static_cast<double>(static_cast<int>(rng() % 9) - 4);  // ties and zeros
    if (std::all_of(d.begin(), d.end(), [](double x) { return x == 0.0; })) continue;
    const auto res = wilcoxon_signed_rank(d, std::vector(n, 0.0), WilcoxonMode::kExact);
    CHECK(res.p_value == enumerate_wilcoxon_p(d));
  }
}

TEST_CASE("wilcoxon exact and normal agree at n = 20") {
  std::mt19937_64 rng(23);
  std::normal_distribution<double> normal(0.1, 1.0);
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> d(20);
    for (auto& x : d) x = normal(rng);
    const std::vector<double> z(20, 0.0);
    const auto exact = wilcoxon_signed_rank(d, z, WilcoxonMode::kExact);
    const auto approx = wilcoxon_signed_rank(d, z, WilcoxonMode::kNormal);
    CHECK(exact.statistic == approx.statistic);
    worst = std::max(worst, std::abs(exact.p_value - approx.p_value));
    CHECK(wilcoxon_signed_rank(d, z).detail.at("exact") == true);
  }
  CHECK(worst <= 0.02);
  std::vector<double> d21(21);
  for (auto& x : d21) x = normal(rng);
  CHECK(wilcoxon_signed_rank(d21, std::vector(21, 0.0)).detail.at("exact") == false);
}

TEST_CASE("box summaries") {
  const auto a = box_stats(std::vector{1.0, 2.0, 3.0, 4.0, 100.0});
  CHECK(a.median == 3.0);
  CHECK(a.q1 == 2.0);
  CHECK(a.q3 == 4.0);
  CHECK(a.whisker_low == 1.0);
  CHECK(a.whisker_high == 4.0);
  CHECK(a.outliers == std::vector{100.0});
  CHECK(a.n == 5);

  const auto b = box_stats(std::vector{3.0, 1.0, 4.0, 1.0, 5.0, 9.0, 2.0, 6.0});
  CHECK(b.q1 == doctest::Approx(1.75));
  CHECK(b.median == doctest::Approx(3.5));
  CHECK(b.q3 == doctest::Approx(5.25));
  CHECK(b.whisker_low == 1.0);
  CHECK(b.whisker_high == 9.0);
  CHECK(b.outliers.empty());

  const auto single = box_stats(std::vector{0.5});
  CHECK(single.median == 0.5);
  CHECK(single.whisker_low == 0.5);
  CHECK(single.whisker_high == 0.5);
  CHECK_THROWS_AS(box_stats(std::vector<double>{}), DataError);

  std::vector<double> shifted;
  for (double x : {3.0, 1.0, 4.0, 1.0, 5.0, 9.0, 2.0, 6.0}) shifted.push_back(x + 10.0);
  const auto c = box_stats(shifted);
  CHECK(c.median == doctest::Approx(b.median + 10.0));
  CHECK(c.q1 == doctest::Approx(b.q1 + 10.0));
  CHECK(c.whisker_high == doctest::Approx(b.whisker_high + 10.0));

  CHECK(box_from_json(nlohmann::json::parse(to_json(a).dump())).outliers == a.outliers);
}

TEST_CASE("compare_models output shape") {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> normal;
  std::map<std::string, std::vector<AttributionRecord>> by_model;
  for (const char* model : {"fft", "lora", "qlora"}) {
    for (int s = 0; s < 8; ++s) {
      std::vector<std::optional<double>> scores(4);
      for (auto& x : scores) x = normal(rng);
      by_model[model].push_back(record("s" + std::to_string(s), model, scores));
    }
  }
  const auto analysis = compare_models(by_model);
  CHECK(analysis.pairs.size() == 3);
  REQUIRE(analysis.tests.size() == 6);  // 3 pivots x 2 methods
  CHECK(analysis.tests[0].pivot == "fft");
  CHECK(analysis.tests[0].comparison == "fft-vs-lora vs fft-vs-qlora");
  CHECK(analysis.tests[0].method == TestMethod::kPairedT);
  CHECK(analysis.tests[1].method == TestMethod::kWilcoxonSignedRank);
  for (const auto& t : analysis.tests) {
    REQUIRE(t.result.has_value());
    CHECK(t.result->p_value >= 0.0);
    CHECK(t.result->p_value <= 1.0);
  }
  const auto json = to_json(analysis);
  CHECK(json.at("pairs").size() == 3);
  CHECK(json.at("tests").size() == 6);

  const std::string csv = similarities_csv(analysis);
  CHECK(csv.rfind("sample_id,model_a,model_b,cosine\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 1 + 24);

  // Two identical models make the pivot test degenerate but not fatal.
  by_model["lora"] = by_model["fft"];
  const auto degenerate = compare_models(by_model);
  REQUIRE(degenerate.tests.size() == 6);
  const auto& qlora_pivot = degenerate.tests[4];
  CHECK(qlora_pivot.pivot == "qlora");
  CHECK_FALSE(qlora_pivot.result.has_value());
  CHECK_FALSE(qlora_pivot.error.empty());
}
