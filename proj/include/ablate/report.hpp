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

// Static reports: attribution heatmaps (HTML) and box plots (SVG).

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "ablate/analysis.hpp"
#include "ablate/attribution.hpp"
#include "json.hpp"

namespace ablate {

enum class NormalizationMode {
  // One scale per sample: the largest |score| over every model's record.
  kSharedMax,
  // Each record scaled by its own largest |score|.
  kPerModel,
};

NormalizationMode parse_normalization_mode(std::string_view text);
const char* to_string(NormalizationMode mode);

struct Rgb {
  std::uint8_t r = 0;
  std::uint8_t g = 0;
  std::uint8_t b = 0;
};

// Diverging scheme: white at zero, blending towards `negative` or `positive`
// in proportion to |score| / scale.
struct ColorScheme {
  Rgb negative{0x21, 0x66, 0xac};
  Rgb positive{0xb2, 0x18, 0x2b};
};

std::string blend_color(const ColorScheme& scheme, double score, double intensity);

struct HeatmapSpec {
  NormalizationMode mode = NormalizationMode::kSharedMax;
  std::vector<AttributionRecord> records;
  ColorScheme scheme;
  std::string title = "Word attribution";
};

using SampleModelKey = std::pair<std::string, std::string>;  // (sample_id, model_id)

// Throws DegenerateDataError when a record has no scored word or a
// normalization group has only zero scores.
std::map<SampleModelKey, double> compute_scale(const std::vector<AttributionRecord>& records,
                                               NormalizationMode mode);

struct RenderedWord {
  std::string word;
  std::size_t index = 0;
  std::optional<double> score;
  double intensity = 0.0;  // |score| / scale, 0 for excluded words
  std::string color;       // "#rrggbb", empty for excluded or zero words
};

struct RenderedModel {
  std::string model_id;
  std::string config_digest;
  double scale = 0.0;
  std::vector<RenderedWord> words;
};

struct RenderedSample {
  std::string sample_id;
  std::vector<RenderedModel> models;  // first-appearance order
};

struct HeatmapLayout {
  NormalizationMode mode = NormalizationMode::kSharedMax;
  std::string title;
  std::vector<RenderedSample> samples;  // first-appearance order
};

// All numbers the heatmap will display.
HeatmapLayout layout_heatmap(const HeatmapSpec& spec);
nlohmann::ordered_json to_json(const HeatmapLayout& layout);

std::string render_heatmap(const HeatmapSpec& spec);

// One glyph per group in label order. Summary values are embedded as data-*
// attributes on each group element.
std::string render_boxplot(const std::map<std::string, BoxSummary>& groups,
                           const std::string& title);
nlohmann::ordered_json boxplot_json(const std::map<std::string, BoxSummary>& groups,
                                    const std::string& title);

std::string html_escape(std::string_view text);

}  // namespace ablate
