#include <cmath>
#include <random>

#include "ablate/attribution.hpp"
#include "ablate/digest.hpp"
#include "ablate/errors.hpp"
#include "doctest.h"
#include "test_util.hpp"

using namespace ablate;
using ablate::testing::TempDir;

namespace {

Stoplist stoplist_of(std::initializer_list<const char*> words) {
  Stoplist s;
  for (const char* w : words) s.words.insert(w);
  s.digest = "test";
  return s;
}

RulePair pair_of(std::string id, std::string rule, std::string target) {
  return {.id = std::move(id), .rule_text = std::move(rule), .reference_script = std::move(target)};
}

// Fails on the Nth call (1-based) whose context matches `poison`.
class FailingBackend final : public ScoreBackend {
 public:
  explicit FailingBackend(std::string poison) : poison_(std::move(poison)) {}
  ScoreResult score(const ScoreQuery& q) override {
    if (q.context == poison_) throw BackendError("boom", true, 3);
    return inner_.score(q);
  }
  nlohmann::json describe() const override { return {{"kind", "failing"}}; }

 private:
  std::string poison_;
  ReferenceScorer inner_{1.0};
};

}  // namespace

TEST_CASE("ablate_input") {
  const auto tokens = segment_words("No discharge pipe");
  CHECK(ablate_input(tokens, 1) == "No pipe");
  CHECK(ablate_input(tokens, 0) == "discharge pipe");
  CHECK(ablate_input(segment_words("a"), 0) == "");
  CHECK_THROWS_AS(ablate_input(tokens, 3), DataError);
}

TEST_CASE("closed-form attribution of rule 'a b' for target 'a'") {
  ReferenceScorer backend(1.0);
  const auto record = attribute_sample(pair_of("s", "a b", "a"), backend, stoplist_of({}), {});
  REQUIRE(record.entries.size() == 2);
  CHECK(record.base_log_prob == doctest::Approx(std::log(0.5)).epsilon(1e-15));
  // phi_a = ln 0.5 - ln(1/3) = ln 1.5; phi_b = ln 0.5 - ln(2/3) = ln 0.75
  CHECK(std::abs(*record.entries[0].score - std::log(1.5)) <= 1e-12);
  CHECK(std::abs(*record.entries[1].score - std::log(0.75)) <= 1e-12);
  CHECK(record.entries[0].word == "a");
  CHECK(record.entries[1].index == 1);
  CHECK(record.config_digest.size() == 64);
}

TEST_CASE("stop words are excluded, not scored") {
  ReferenceScorer backend(1.0);
  const auto record =
      attribute_sample(pair_of("s", "the pipe", "pipe"), backend, stoplist_of({"the"}), {});
  REQUIRE(record.entries.size() == 2);
  CHECK(record.entries[0].excluded());
  CHECK_FALSE(record.entries[1].excluded());
}

TEST_CASE("unchanged score gives zero attribution") {
  class ConstantBackend final : public ScoreBackend {
   public:
    ScoreResult score(const ScoreQuery&) override {
      return {.log_prob = -3.0, .token_log_probs = {-3.0}, .tokens = {"t"}};
    }
    nlohmann::json describe() const override { return {{"kind", "constant"}}; }
  } backend;
  const auto record = attribute_sample(pair_of("s", "x y z", "t"), backend, stoplist_of({}), {});
  for (const auto& e : record.entries) CHECK(std::abs(*e.score) <= 1e-9);
}

TEST_CASE("failure names the word and emits nothing") {
  FailingBackend backend("a c");
  try {
    attribute_sample(pair_of("s1", "a b c", "a"), backend, stoplist_of({}), {});
    FAIL("expected failure");
  } catch (const AttributionError& e) {
    CHECK(e.sample_id() == "s1");
    REQUIRE(e.word_index().has_value());
    CHECK(*e.word_index() == 1);
    CHECK(e.kind() == ErrorKind::kBackend);
  }
  FailingBackend base_fails("a b c");
  try {
    attribute_sample(pair_of("s1", "a b c", "a"), base_fails, stoplist_of({}), {});
    FAIL("expected failure");
  } catch (const AttributionError& e) {
    CHECK_FALSE(e.word_index().has_value());
  }
  ReferenceScorer ok;
  CHECK_THROWS_AS(attribute_sample(pair_of("s", "   ", "a"), ok, stoplist_of({}), {}), AttributionError);
}

TEST_CASE("base context is the single-space join of the rule") {
  class Recorder final : public ScoreBackend {
   public:
    ScoreResult score(const ScoreQuery& q) override {
      std::lock_guard lock(mu);
      contexts.push_back(q.context);
      return reference_score(q.context, q.target, 1.0, *q.vocab_size);
    }
    nlohmann::json describe() const override { return {{"kind", "recorder"}}; }
    std::mutex mu;
    std::vector<std::string> contexts;
  } backend;
  attribute_sample(pair_of("s", "  No\tdischarge \n pipe ", "pipe"), backend, stoplist_of({}), {});
  REQUIRE(backend.contexts.size() == 4);  // d + 1 calls
  CHECK(backend.contexts[0] == "No discharge pipe");
  CHECK(backend.contexts[1] == "discharge pipe");
  CHECK(backend.contexts[2] == "No pipe");
  CHECK(backend.contexts[3] == "No discharge");
}

TEST_CASE("matches a brute-force oracle on random rules") {
  std::mt19937_64 rng(11);
  ReferenceScorer backend(0.7);
  const auto stop = stoplist_of({"w1", "w2"});
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<std::string> words;
    const int d = 1 + static_cast<int>(rng() % 8);
    for (int k = 0; k < d; ++k) words.push_back("w" + std::to_string(rng() % 7));
    std::string rule, target;
    for (const auto& w : words) rule += w + " ";
    for (int k = 0; k < 3; ++k) target += "w" + std::to_string(rng() % 9) + " ";

    const auto record = attribute_sample(pair_of("s", rule, target), backend, stop, {});
    const std::string full = join_words(segment_words(rule));
    const std::size_t vocab = distinct_token_count(full, target);
    const double base = reference_score(full, target, 0.7, vocab).log_prob;
    REQUIRE(record.entries.size() == words.size());
    for (std::size_t i = 0; i < words.size(); ++i) {
      const auto& e = record.entries[i];
      if (stop.contains(words[i])) {
        CHECK(e.excluded());
        continue;
      }
      std::string reduced;
      for (std::size_t j = 0; j < words.size(); ++j) {
        if (j == i) continue;
        if (!reduced.empty()) reduced += ' ';
        reduced += words[j];
      }
      const double expected = base - reference_score(reduced, target, 0.7, vocab).log_prob;
      CHECK(std::abs(*e.score - expected) <= 1e-9);
    }
  }
}

TEST_CASE("batch order, parallelism and the cache") {
  std::mt19937_64 rng(5);
  std::vector<RulePair> corpus;
  for (int i = 0; i < 12; ++i) {
    std::string rule, target;
    for (int k = 0; k < 6; ++k) rule += "w" + std::to_string(rng() % 9) + " ";
    for (int k = 0; k < 4; ++k) target += "w" + std::to_string(rng() % 12) + " ";
    corpus.push_back(pair_of("s" + std::to_string(i), rule, target));
  }
  ReferenceScorer reference(1.0);
  const auto stop = stoplist_of({"w0"});

  const auto serial = batch_attribute(corpus, reference, stop, {.model_id = "ref"});
  REQUIRE(serial.records.size() == corpus.size());
  for (std::size_t i = 0; i < corpus.size(); ++i) CHECK(serial.records[i].sample_id == corpus[i].id);

  const auto parallel =
      batch_attribute(corpus, reference, stop, {.model_id = "ref", .in_flight = 4, .parallelism = 8});
  CHECK(parallel.records == serial.records);
  CHECK(attributions_to_jsonl(parallel.records) == attributions_to_jsonl(serial.records));

  TempDir dir;
  DiskScoreCache cache(dir / "cache");
  CountingScorer cold_counter(reference);
  const auto cold = batch_attribute(corpus, cold_counter, stop,
                                    {.model_id = "ref", .parallelism = 4, .cache = &cache});
  CHECK(cold_counter.calls() > 0);
  CountingScorer warm_counter(reference);
  const auto warm = batch_attribute(corpus, warm_counter, stop,
                                    {.model_id = "ref", .parallelism = 4, .cache = &cache});
  CHECK(warm_counter.calls() == 0);
  CHECK(attributions_to_jsonl(warm.records) == attributions_to_jsonl(serial.records));
  CHECK(attributions_to_jsonl(cold.records) == attributions_to_jsonl(serial.records));
}

TEST_CASE("cache keys separate models, contexts, targets and vocabularies") {
  const ScoreQuery q{"a b", "a", 2};
  const auto k = score_cache_key("m", q);
  CHECK(k.size() == 64);
  CHECK(k != score_cache_key("m2", q));
  CHECK(k != score_cache_key("m", {"a b", "b", 2}));
  CHECK(k != score_cache_key("m", {"a", "b a", 2}));  // NUL separators prevent shifting
  CHECK(k != score_cache_key("m", {"a b", "a", 3}));
  CHECK(score_cache_key("m", {"a b", "a", std::nullopt}) == sha256_hex(std::string("m\0a b\0a", 7)));
}

TEST_CASE("batch failure threshold") {
  std::vector<RulePair> corpus = {pair_of("ok", "a b", "a"), pair_of("bad", "z c", "a")};
  FailingBackend backend("z");
  try {
    batch_attribute(corpus, backend, stoplist_of({}), {});
    FAIL("expected batch failure");
  } catch (const BatchError& e) {
    REQUIRE(e.failures().size() == 1);
    CHECK(e.failures()[0].sample_id == "bad");
    CHECK(e.kind() == ErrorKind::kBackend);
  }
  const auto tolerant = batch_attribute(corpus, backend, stoplist_of({}), {.max_failures = 1});
  REQUIRE(tolerant.records.size() == 1);
  CHECK(tolerant.records[0].sample_id == "ok");
  CHECK(tolerant.failures.size() == 1);
}

TEST_CASE("attribution JSONL format") {
  AttributionRecord r{.sample_id = "s",
                      .model_id = "m",
                      .base_log_prob = -1.5,
                      .entries = {{"the", 0, std::nullopt}, {"pipe", 1, 0.25}},
                      .config_digest = "d"};
  const std::string line = to_json(r).dump();
  CHECK(line ==
        R"({"sample_id":"s","model_id":"m","base_log_prob":-1.5,"config_digest":"d","words":[{"w":"the","i":0,"excluded":true},{"w":"pipe","i":1,"score":0.25}]})");
  CHECK(attribution_from_json(nlohmann::json::parse(line)) == r);

  TempDir dir;
  write_attributions(dir / "a.jsonl", {r, r});
  CHECK(read_attributions(dir / "a.jsonl") == std::vector<AttributionRecord>{r, r});

  auto bad = nlohmann::json::parse(line);
  bad["words"][1]["excluded"] = true;
  CHECK_THROWS_AS(attribution_from_json(bad), DataError);
  bad = nlohmann::json::parse(line);
  bad["words"][1]["i"] = 5;
  CHECK_THROWS_AS(attribution_from_json(bad), DataError);
}
