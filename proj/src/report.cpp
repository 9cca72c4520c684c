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

#include "ablate/report.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>

#include "ablate/errors.hpp"

namespace ablate {
namespace {

// Shortest round-trip decimal form, identical to the JSON exports.
std::string exact(double x) { return nlohmann::json(x).dump(); }

std::uint8_t mix(std::uint8_t hue, double t) {
  return static_cast<std::uint8_t>(std::lround(255.0 + t * (static_cast<double>(hue) - 255.0)));
}

double max_abs_score(const AttributionRecord& record) {
  double best = 0.0;
  bool any = false;
  for (const auto& entry : record.entries) {
    if (!entry.score) continue;
    any = true;
    best = std::max(best, std::abs(*entry.score));
  }
  if (!any) {
    throw DegenerateDataError("sample '" + record.sample_id + "', model '" + record.model_id +
                              "': no scored words to normalize");
  }
  return best;
}

constexpr double kPlotHeight = 360.0;
constexpr double kPlotTop = 50.0;
constexpr double kPlotLeft = 70.0;
constexpr double kGroupWidth = 120.0;
constexpr double kBoxWidth = 60.0;

}  // namespace

NormalizationMode parse_normalization_mode(std::string_view text) {
  if (text == "shared-max") return NormalizationMode::kSharedMax;
  if (text == "per-model") return NormalizationMode::kPerModel;
  throw UsageError("unknown normalization mode '" + std::string(text) +
                   "' (expected shared-max or per-model)");
}

const char* to_string(NormalizationMode mode) {
  return mode == NormalizationMode::kSharedMax ? "shared-max" : "per-model";
}

std::string blend_color(const ColorScheme& scheme, double score, double intensity) {
  const Rgb& hue = score < 0.0 ? scheme.negative : scheme.positive;
  const double t = std::clamp(intensity, 0.0, 1.0);
  return fmt::format("#{:02x}{:02x}{:02x}", mix(hue.r, t), mix(hue.g, t), mix(hue.b, t));
}

std::map<SampleModelKey, double> compute_scale(const std::vector<AttributionRecord>& records,
                                               NormalizationMode mode) {
  std::map<SampleModelKey, double> scales;
  std::map<std::string, double> sample_max;
  for (const auto& record : records) {
    const double m = max_abs_score(record);
    scales[{record.sample_id, record.model_id}] = m;
    auto& shared = sample_max[record.sample_id];
    shared = std::max(shared, m);
  }
  for (auto& [key, scale] : scales) {
    if (mode == NormalizationMode::kSharedMax) scale = sample_max.at(key.first);
    if (!(scale > 0.0)) {
      throw DegenerateDataError(
          "sample '" + key.first + "'" +
          (mode == NormalizationMode::kPerModel ? ", model '" + key.second + "'" : "") +
          ": every score is zero, so there is no color scale");
    }
  }
  return scales;
}

HeatmapLayout layout_heatmap(const HeatmapSpec& spec) {
  const auto scales = compute_scale(spec.records, spec.mode);
  HeatmapLayout layout{.mode = spec.mode, .title = spec.title};
  std::map<std::string, std::size_t> sample_slot;
  for (const auto& record : spec.records) {
    auto [it, inserted] = sample_slot.emplace(record.sample_id, layout.samples.size());
    if (inserted) layout.samples.push_back({.sample_id = record.sample_id});
    RenderedModel model{.model_id = record.model_id,
                        .config_digest = record.config_digest,
                        .scale = scales.at({record.sample_id, record.model_id})};
    for (const auto& entry : record.entries) {
      RenderedWord word{.word = entry.word, .index = entry.index, .score = entry.score};
      if (entry.score) {
        word.intensity = std::abs(*entry.score) / model.scale;
        if (word.intensity > 0.0) word.color = blend_color(spec.scheme, *entry.score, word.intensity);
      }
      model.words.push_back(std::move(word));
    }
    layout.samples[it->second].models.push_back(std::move(model));
  }
  return layout;
}

nlohmann::ordered_json to_json(const HeatmapLayout& layout) {
  nlohmann::ordered_json samples = nlohmann::ordered_json::array();
  for (const auto& sample : layout.samples) {
    nlohmann::ordered_json models = nlohmann::ordered_json::array();
    for (const auto& model : sample.models) {
      nlohmann::ordered_json words = nlohmann::ordered_json::array();
      for (const auto& w : model.words) {
        nlohmann::ordered_json word = {{"w", w.word}, {"i", w.index}};
        if (w.score) {
          word["score"] = *w.score;
          word["intensity"] = w.intensity;
          word["color"] = w.color.empty() ? nlohmann::ordered_json(nullptr)
                                          : nlohmann::ordered_json(w.color);
        } else {
          word["excluded"] = true;
        }
        words.push_back(std::move(word));
      }
      models.push_back({{"model_id", model.model_id},
                        {"config_digest", model.config_digest},
                        {"scale", model.scale},
                        {"words", std::move(words)}});
    }
    samples.push_back({{"sample_id", sample.sample_id}, {"models", std::move(models)}});
  }
  return {{"title", layout.title}, {"mode", to_string(layout.mode)}, {"samples", std::move(samples)}};
}

std::string html_escape(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  for (const char c : text) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&#39;"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

std::string render_heatmap(const HeatmapSpec& spec) {
  const HeatmapLayout layout = layout_heatmap(spec);
  std::vector<std::string> model_ids;
  std::vector<std::string> digests;
  for (const auto& sample : layout.samples) {
    for (const auto& model : sample.models) {
      if (std::find(model_ids.begin(), model_ids.end(), model.model_id) == model_ids.end()) {
        model_ids.push_back(model.model_id);
        digests.push_back(model.config_digest);
      }
    }
  }

  std::string html;
  html += "<!DOCTYPE html>\n<html lang=\"en\">\n<head>\n<meta charset=\"utf-8\">\n";
  html += "<title>" + html_escape(layout.title) + "</title>\n";
  html +=
      "<style>\n"
      "body{font-family:sans-serif;margin:2em;color:#222}\n"
      ".sample{margin-bottom:2em;border-top:1px solid #ccc}\n"
      ".model{margin:0.6em 0}\n"
      ".model-label{font-size:0.85em;color:#555}\n"
      ".rule{line-height:2.2;font-family:monospace}\n"
      ".w{text-decoration-thickness:3px;text-underline-offset:4px}\n"
      ".stop{color:#888}\n"
      "</style>\n</head>\n<body>\n";
  html += "<h1>" + html_escape(layout.title) + "</h1>\n";
  html += "<section class=\"legend\" data-mode=\"" + std::string(to_string(layout.mode)) + "\">\n";
  html += "<p>Normalization: <b>" + std::string(to_string(layout.mode)) + "</b> (" +
          (layout.mode == NormalizationMode::kSharedMax
               ? "one color scale per sample, set by the largest |score| over all models"
               : "each model scaled by its own largest |score|") +
          "). Underline intensity = |score| / scale; red = positive, blue = negative, "
          "no underline = zero; grey words are excluded stop words.</p>\n<ul>\n";
  for (std::size_t i = 0; i < model_ids.size(); ++i) {
    html += "<li class=\"legend-model\" data-model-id=\"" + html_escape(model_ids[i]) +
            "\">" + html_escape(model_ids[i]) + " (config " + html_escape(digests[i]) + ")</li>\n";
  }
  html += "</ul>\n</section>\n";

  for (const auto& sample : layout.samples) {
    html += "<section class=\"sample\" data-sample-id=\"" + html_escape(sample.sample_id) + "\">\n";
    html += "<h2>" + html_escape(sample.sample_id) + "</h2>\n";
    for (const auto& model : sample.models) {
      html += "<div class=\"model\" data-model-id=\"" + html_escape(model.model_id) +
              "\" data-scale=\"" + exact(model.scale) + "\" data-config-digest=\"" +
              html_escape(model.config_digest) + "\">\n";
      html += "<div class=\"model-label\">" + html_escape(model.model_id) + " &middot; scale " +
              exact(model.scale) + "</div>\n<p class=\"rule\">";
      for (std::size_t k = 0; k < model.words.size(); ++k) {
        const auto& w = model.words[k];
        if (k) html += " ";
        const std::string index = std::to_string(w.index);
        if (!w.score) {
          html += "<span class=\"stop\" data-i=\"" + index + "\">" + html_escape(w.word) + "</span>";
          continue;
        }
        html += "<span class=\"w\" data-i=\"" + index + "\" data-score=\"" + exact(*w.score) +
                "\" data-intensity=\"" + exact(w.intensity) + "\"";
        if (!w.color.empty()) {
          html += " style=\"text-decoration-line:underline;text-decoration-color:" + w.color + "\"";
        }
        html += ">" + html_escape(w.word) + "</span>";
      }
      html += "</p>\n</div>\n";
    }
    html += "</section>\n";
  }
  html += "</body>\n</html>\n";
  return html;
}

std::string render_boxplot(const std::map<std::string, BoxSummary>& groups,
                           const std::string& title) {
  if (groups.empty()) throw DataError("box plot needs at least one group");
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (const auto& [label, box] : groups) {
    lo = std::min({lo, box.whisker_low, box.q1});
    hi = std::max({hi, box.whisker_high, box.q3});
    for (const double o : box.outliers) {
      lo = std::min(lo, o);
      hi = std::max(hi, o);
    }
  }
  if (hi - lo <= 0.0) {
    lo -= 0.5;
    hi += 0.5;
  } else {
    const double pad = 0.05 * (hi - lo);
    lo -= pad;
    hi += pad;
  }
  const auto y_of = [&](double v) { return kPlotTop + (hi - v) / (hi - lo) * kPlotHeight; };
  const double width = kPlotLeft + kGroupWidth * static_cast<double>(groups.size()) + 20.0;
  const double height = kPlotTop + kPlotHeight + 60.0;

  std::string svg;
  svg += fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{:.0f}\" height=\"{:.0f}\" "
      "viewBox=\"0 0 {:.0f} {:.0f}\" font-family=\"sans-serif\" font-size=\"12\">\n",
      width, height, width, height);
  svg += "<title>" + html_escape(title) + "</title>\n";
  svg += "<rect width=\"100%\" height=\"100%\" fill=\"#ffffff\"/>\n";
  svg += fmt::format("<text x=\"{:.2f}\" y=\"25\" text-anchor=\"middle\" font-size=\"15\">{}</text>\n",
                     width / 2.0, html_escape(title));

  svg += "<g class=\"axis\">\n";
  svg += fmt::format("<line x1=\"{:.2f}\" y1=\"{:.2f}\" x2=\"{:.2f}\" y2=\"{:.2f}\" stroke=\"#000\"/>\n",
                     kPlotLeft, kPlotTop, kPlotLeft, kPlotTop + kPlotHeight);
  constexpr int kTicks = 5;
  for (int t = 0; t <= kTicks; ++t) {
    const double v = lo + (hi - lo) * t / kTicks;
    const double y = y_of(v);
    svg += fmt::format(
        "<line x1=\"{:.2f}\" y1=\"{:.2f}\" x2=\"{:.2f}\" y2=\"{:.2f}\" stroke=\"#000\"/>"
        "<text x=\"{:.2f}\" y=\"{:.2f}\" text-anchor=\"end\">{:.3f}</text>\n",
        kPlotLeft - 5.0, y, kPlotLeft, y, kPlotLeft - 8.0, y + 4.0, v);
  }
  svg += "</g>\n";

  std::size_t slot = 0;
  for (const auto& [label, box] : groups) {
    const double cx = kPlotLeft + kGroupWidth * (static_cast<double>(slot) + 0.5);
    const double left = cx - kBoxWidth / 2.0;
    std::string outliers;
    for (const double o : box.outliers) outliers += (outliers.empty() ? "" : " ") + exact(o);
    svg += "<g class=\"box\" data-label=\"" + html_escape(label) + "\" data-n=\"" +
           std::to_string(box.n) + "\" data-median=\"" + exact(box.median) + "\" data-q1=\"" +
           exact(box.q1) + "\" data-q3=\"" + exact(box.q3) + "\" data-whisker-low=\"" +
           exact(box.whisker_low) + "\" data-whisker-high=\"" + exact(box.whisker_high) +
           "\" data-outliers=\"" + outliers + "\">\n";
    svg += fmt::format(
        "<line class=\"whisker\" x1=\"{0:.2f}\" y1=\"{1:.2f}\" x2=\"{0:.2f}\" y2=\"{2:.2f}\" stroke=\"#000\"/>\n"
        "<line class=\"whisker\" x1=\"{0:.2f}\" y1=\"{3:.2f}\" x2=\"{0:.2f}\" y2=\"{4:.2f}\" stroke=\"#000\"/>\n",
        cx, y_of(box.whisker_high), y_of(box.q3), y_of(box.q1), y_of(box.whisker_low));
    svg += fmt::format(
        "<line class=\"cap\" x1=\"{:.2f}\" y1=\"{:.2f}\" x2=\"{:.2f}\" y2=\"{:.2f}\" stroke=\"#000\"/>\n"
        "<line class=\"cap\" x1=\"{:.2f}\" y1=\"{:.2f}\" x2=\"{:.2f}\" y2=\"{:.2f}\" stroke=\"#000\"/>\n",
        cx - kBoxWidth / 4.0, y_of(box.whisker_high), cx + kBoxWidth / 4.0, y_of(box.whisker_high),
        cx - kBoxWidth / 4.0, y_of(box.whisker_low), cx + kBoxWidth / 4.0, y_of(box.whisker_low));
    svg += fmt::format(
        "<rect class=\"iqr\" x=\"{:.2f}\" y=\"{:.2f}\" width=\"{:.2f}\" height=\"{:.2f}\" "
        "fill=\"#9ecae1\" stroke=\"#000\"/>\n",
        left, y_of(box.q3), kBoxWidth, y_of(box.q1) - y_of(box.q3));
    svg += fmt::format(
        "<line class=\"median\" x1=\"{:.2f}\" y1=\"{:.2f}\" x2=\"{:.2f}\" y2=\"{:.2f}\" "
        "stroke=\"#d62728\" stroke-width=\"2\"/>\n",
        left, y_of(box.median), left + kBoxWidth, y_of(box.median));
    for (const double o : box.outliers) {
      svg += fmt::format(
          "<circle class=\"outlier\" cx=\"{:.2f}\" cy=\"{:.2f}\" r=\"3\" fill=\"none\" stroke=\"#000\"/>\n",
          cx, y_of(o));
    }
    svg += fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\" text-anchor=\"middle\">{}</text>\n", cx,
                       kPlotTop + kPlotHeight + 20.0, html_escape(label));
    svg += "</g>\n";
    ++slot;
  }
  svg += "</svg>\n";
  return svg;
}

nlohmann::ordered_json boxplot_json(const std::map<std::string, BoxSummary>& groups,
                                    const std::string& title) {
  nlohmann::ordered_json out = {{"title", title}, {"groups", nlohmann::ordered_json::array()}};
  for (const auto& [label, box] : groups) {
    auto entry = to_json(box);
    entry["label"] = label;
    out["groups"].push_back(std::move(entry));
  }
  return out;
}

}  // namespace ablate
