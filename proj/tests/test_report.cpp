#include <regex>

#include "ablate/errors.hpp"
#include "ablate/report.hpp"
#include "doctest.h"

using namespace ablate;

namespace {

AttributionRecord record(std::string sample, std::string model,
                         std::vector<std::pair<std::string, std::optional<double>>> words) {
  AttributionRecord r{.sample_id = std::move(sample), .model_id = std::move(model),
                      .config_digest = "digest"};
  for (std::size_t i = 0; i < words.size(); ++i) {
    r.entries.push_back({words[i].first, i, words[i].second});
  }
  return r;
}

std::vector<AttributionRecord> three_models() {
  return {record("s", "m1", {{"the", std::nullopt}, {"pipe", 0.4}, {"drains", -0.1}}),
          record("s", "m2", {{"the", std::nullopt}, {"pipe", -0.9}, {"drains", 0.3}}),
          record("s", "m3", {{"the", std::nullopt}, {"pipe", 0.2}, {"drains", 0.0}})};
}

std::size_t count_saturated(const RenderedModel& m) {
  std::size_t n = 0;
  for (const auto& w : m.words) n += w.intensity == 1.0;
  return n;
}

}  // namespace

TEST_CASE("normalization scales") {
  const auto records = three_models();
  const auto shared = compute_scale(records, NormalizationMode::kSharedMax);
  CHECK(shared.at({"s", "m1"}) == 0.9);
  CHECK(shared.at({"s", "m2"}) == 0.9);
  CHECK(shared.at({"s", "m3"}) == 0.9);
  const auto per_model = compute_scale(records, NormalizationMode::kPerModel);
  CHECK(per_model.at({"s", "m1"}) == 0.4);
  CHECK(per_model.at({"s", "m2"}) == 0.9);
  CHECK(per_model.at({"s", "m3"}) == 0.2);

  const std::vector<AttributionRecord> zero = {record("z", "m", {{"a", 0.0}, {"b", 0.0}})};
  CHECK_THROWS_AS(compute_scale(zero, NormalizationMode::kPerModel), DegenerateDataError);
  const std::vector<AttributionRecord> all_stop = {record("z", "m", {{"a", std::nullopt}})};
  CHECK_THROWS_AS(compute_scale(all_stop, NormalizationMode::kSharedMax), DegenerateDataError);

  // With one model the two modes coincide.
  const std::vector<AttributionRecord> single = {three_models()[0]};
  CHECK(compute_scale(single, NormalizationMode::kSharedMax) ==
        compute_scale(single, NormalizationMode::kPerModel));
}

TEST_CASE("layout saturation per mode") {
  HeatmapSpec spec{.mode = NormalizationMode::kSharedMax, .records = three_models()};
  const auto shared = layout_heatmap(spec);
  REQUIRE(shared.samples.size() == 1);
  std::size_t saturated = 0;
  for (const auto& m : shared.samples[0].models) saturated += count_saturated(m);
  CHECK(saturated == 1);
  CHECK(shared.samples[0].models[1].words[1].intensity == 1.0);
  CHECK(shared.samples[0].models[0].words[1].intensity == doctest::Approx(0.4 / 0.9));

  spec.mode = NormalizationMode::kPerModel;
  const auto per_model = layout_heatmap(spec);
  for (const auto& m : per_model.samples[0].models) CHECK(count_saturated(m) == 1);

  const auto& m3 = per_model.samples[0].models[2];
  CHECK(m3.words[2].score == 0.0);
  CHECK(m3.words[2].color.empty());
  CHECK(m3.words[0].color.empty());
  CHECK_FALSE(m3.words[0].score.has_value());

  const auto json = to_json(per_model);
  CHECK(json.at("mode") == "per-model");
  CHECK(json.at("samples")[0].at("models")[0].at("scale") == 0.4);
  CHECK(json.at("samples")[0].at("models")[0].at("words")[0].at("excluded") == true);
}

TEST_CASE("colors") {
  const ColorScheme scheme;
  CHECK(blend_color(scheme, 1.0, 1.0) == "#b2182b");
  CHECK(blend_color(scheme, -1.0, 1.0) == "#2166ac");
  CHECK(blend_color(scheme, 1.0, 0.0) == "#ffffff");
  CHECK(blend_color(scheme, -0.5, 0.5).size() == 7);
}

TEST_CASE("heatmap html") {
  auto records = three_models();
  records[0].entries[2].word = "<b>&";
  const HeatmapSpec spec{.mode = NormalizationMode::kSharedMax, .records = records, .title = "T"};
  const std::string html = render_heatmap(spec);
  CHECK(html == render_heatmap(spec));
  CHECK(html.find("&lt;b&gt;&amp;") != std::string::npos);
  CHECK(html.find("<b>&") == std::string::npos);
  CHECK(html.find("data-model-id=\"m2\"") != std::string::npos);

  // Stop words are plain spans; zero scores have no underline.
  CHECK(html.find("<span class=\"stop\" data-i=\"0\">the</span>") != std::string::npos);
  const std::regex zero_span(R"(<span class="w" data-i="2" data-score="0\.0" data-intensity="0\.0">)");
  CHECK(std::regex_search(html, zero_span));

  // Word order survives rendering: read the words back out of the m1 block.
  const auto start = html.find("<div class=\"model\" data-model-id=\"m1\"");
  const auto end = html.find("<div class=\"model\" data-model-id=\"m2\"");
  const std::string block = html.substr(start, end - start);
  const std::regex span(R"re(<span class="(?:w|stop)" data-i="(\d+)"[^>]*>([^<]*)</span>)re");
  std::vector<std::string> words;
  std::vector<int> indices;
  for (std::sregex_iterator it(block.begin(), block.end(), span), last; it != last; ++it) {
    indices.push_back(std::stoi((*it)[1]));
    words.push_back((*it)[2]);
  }
  CHECK(indices == std::vector{0, 1, 2});
  CHECK(words == std::vector<std::string>{"the", "pipe", "&lt;b&gt;&amp;"});
}

TEST_CASE("boxplot svg") {
  std::map<std::string, BoxSummary> groups;
  groups["qlora-vs-lora"] = box_stats(std::vector{0.3, 0.4, 0.5, 0.6, 2.0});
  groups["fft-vs-lora"] = box_stats(std::vector{0.2, 0.3});
  groups["fft-vs-qlora"] = box_stats(std::vector{0.7, 0.7, 0.7});
  const std::string svg = render_boxplot(groups, "cosine");
  CHECK(svg == render_boxplot(groups, "cosine"));
  CHECK(svg.rfind("<svg", 0) == 0);

  const std::regex group(R"re(<g class="box" data-label="([^"]+)")re");
  std::vector<std::string> labels;
  for (std::sregex_iterator it(svg.begin(), svg.end(), group), last; it != last; ++it) {
    labels.push_back((*it)[1]);
  }
  CHECK(labels == std::vector<std::string>{"fft-vs-lora", "fft-vs-qlora", "qlora-vs-lora"});

  // Constant group draws a zero-height box.
  const auto at = svg.find("data-label=\"fft-vs-qlora\"");
  const auto rect = svg.find("<rect class=\"iqr\"", at);
  CHECK(svg.substr(rect, svg.find("/>", rect) - rect).find("height=\"0.00\"") != std::string::npos);
  CHECK(svg.find("data-outliers=\"2.0\"") != std::string::npos);
  CHECK(std::count(svg.begin(), svg.end(), '\n') > 10);

  const auto json = boxplot_json(groups, "cosine");
  CHECK(json.at("groups").size() == 3);
}

TEST_CASE("mode parsing") {
  CHECK(parse_normalization_mode("shared-max") == NormalizationMode::kSharedMax);
  CHECK(parse_normalization_mode("per-model") == NormalizationMode::kPerModel);
  CHECK_THROWS_AS(parse_normalization_mode("global"), UsageError);
  CHECK(std::string(to_string(NormalizationMode::kPerModel)) == "per-model");
}
