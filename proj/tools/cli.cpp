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

#include "cli.hpp"

#include <signal.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <set>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "ablate/analysis.hpp"
#include "ablate/attribution.hpp"
#include "ablate/corpus.hpp"
#include "ablate/digest.hpp"
#include "ablate/errors.hpp"
#include "ablate/mock_server.hpp"
#include "ablate/report.hpp"
#include "ablate/scorer.hpp"
#include "ablate/semsim.hpp"
#include "ablate/store.hpp"
#include "json.hpp"

#ifndef ABLATE_VERSION
#define ABLATE_VERSION "0.0.0"
#endif

namespace ablate::cli {
namespace {

namespace fs = std::filesystem;

// Reads --config files shaped like the command tree, e.g.
//   {"attribute": {"corpus": "c.jsonl", "alpha": 0.5}}
class JsonConfig : public CLI::Config {
 public:
  std::string to_config(const CLI::App* app, bool default_also, bool, std::string) const override {
    nlohmann::ordered_json out = nlohmann::ordered_json::object();
    dump_app(app, default_also, out);
    return out.dump(2);
  }

  std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
    nlohmann::json root;
    try {
      input >> root;
    } catch (const nlohmann::json::exception& e) {
      throw CLI::ConversionError(std::string("config file is not valid JSON: ") + e.what());
    }
    if (!root.is_object()) throw CLI::ConversionError("config file must hold a JSON object");
    std::vector<CLI::ConfigItem> items;
    collect(root, {}, items);
    return items;
  }

 private:
  static std::string scalar(const nlohmann::json& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
    return v.dump();
  }

  static void collect(const nlohmann::json& obj, const std::vector<std::string>& parents,
                      std::vector<CLI::ConfigItem>& items) {
    for (const auto& [key, value] : obj.items()) {
      if (value.is_object()) {
        auto next = parents;
        next.push_back(key);
        collect(value, next, items);
        continue;
      }
      CLI::ConfigItem item;
      item.parents = parents;
      item.name = key;
      if (value.is_array()) {
        for (const auto& v : value) item.inputs.push_back(scalar(v));
      } else {
        item.inputs.push_back(scalar(value));
      }
      items.push_back(std::move(item));
    }
  }

  static void dump_app(const CLI::App* app, bool default_also, nlohmann::ordered_json& out) {
    for (const CLI::Option* opt : app->get_options()) {
      const std::string& name = opt->get_single_name();
      if (name.empty() || name == "help" || name == "config") continue;
      const auto results = opt->as<std::vector<std::string>>();
      if (!results.empty()) {
        out[name] = results.size() == 1 ? nlohmann::ordered_json(results.front())
                                        : nlohmann::ordered_json(results);
      } else if (default_also && !opt->get_default_str().empty()) {
        out[name] = opt->get_default_str();
      }
    }
    for (const CLI::App* sub : app->get_subcommands({})) {
      nlohmann::ordered_json child = nlohmann::ordered_json::object();
      dump_app(sub, default_also, child);
      if (!child.empty()) out[sub->get_name()] = std::move(child);
    }
  }
};

struct BackendArgs {
  std::string backend;
  std::string endpoint;
  double alpha = 1.0;
  int retries = 3;
  int backoff_ms = 250;
  int timeout_ms = 30000;
  int in_flight = 4;
};

struct AttributeArgs {
  std::string corpus;
  std::string model_id;
  std::string out;
  std::string stopwords;
  std::string cache;
  int parallel = 1;
  int max_failures = 0;
  BackendArgs backend;
};

struct CompareArgs {
  std::vector<std::string> inputs;
  std::string out;
  std::string csv;
};

struct EvaluateArgs {
  std::string corpus;
  std::vector<std::string> models;
  std::string embedder;
  std::string embed_endpoint;
  int dim = 64;
  double beta = 3.0;
  std::string out;
  int parallel = 1;
  int max_failures = 0;
  BackendArgs backend;
};

struct HeatmapArgs {
  std::vector<std::string> attributions;
  std::string mode = "shared-max";
  std::string out;
  std::string json_out;
  std::string title = "Word attribution";
};

struct BoxplotArgs {
  std::string input;
  std::string out;
  std::string json_out;
};

struct MockServerArgs {
  std::string host = "127.0.0.1";
  int port = 8080;
  double alpha = 1.0;
  int dim = 64;
  std::string model = "reference-unigram";
};

CLI::Option* env(CLI::Option* opt, const std::string& name) {
  return opt->envname("ABLATE_" + name);
}

void add_backend_options(CLI::App* cmd, BackendArgs& args) {
  env(cmd->add_option("--retries", args.retries, "Attempts per request (transport errors, 5xx)")
          ->capture_default_str(),
      "RETRIES");
  env(cmd->add_option("--backoff-ms", args.backoff_ms, "Base retry backoff; doubles per retry")
          ->capture_default_str(),
      "BACKOFF_MS");
  env(cmd->add_option("--timeout-ms", args.timeout_ms, "Per-request timeout")->capture_default_str(),
      "TIMEOUT_MS");
  env(cmd->add_option("--in-flight", args.in_flight, "Concurrent requests per endpoint")
          ->capture_default_str(),
      "IN_FLIGHT");
}

RetryPolicy policy_of(const BackendArgs& args) {
  if (args.retries < 1) throw UsageError("--retries must be at least 1");
  if (args.timeout_ms < 1) throw UsageError("--timeout-ms must be positive");
  return {.max_attempts = args.retries,
          .base_backoff = std::chrono::milliseconds(args.backoff_ms),
          .timeout = std::chrono::milliseconds(args.timeout_ms)};
}

std::size_t positive(int value, const char* flag) {
  if (value < 1) throw UsageError(std::string(flag) + " must be at least 1");
  return static_cast<std::size_t>(value);
}

void write_json(const fs::path& path, const nlohmann::ordered_json& doc) {
  write_file_atomic(path, doc.dump(2) + "\n");
}

// Records how an output was produced: the command line plus a digest of
// every input, written next to the output as <output>.manifest.json (or
// <dir>/manifest.json for directory outputs).
void write_invocation(const fs::path& manifest_path, const std::vector<std::string>& command_line,
                      const std::vector<std::string>& inputs) {
  nlohmann::ordered_json digests = nlohmann::ordered_json::array();
  for (const auto& input : inputs) {
    digests.push_back({{"path", input}, {"sha256", sha256_file(input)}});
  }
  std::vector<std::string> argv(command_line.begin() + (command_line.empty() ? 0 : 1),
                                command_line.end());
  const nlohmann::ordered_json doc = {{"argv", argv},
                                      {"inputs", std::move(digests)},
                                      {"tool_version", ABLATE_VERSION},
                                      {"created_at", current_timestamp()}};
  write_file_atomic(manifest_path, doc.dump(2) + "\n");
}

fs::path sidecar(const std::string& output) { return output + ".manifest.json"; }

nlohmann::json read_json(const fs::path& path) {
  const auto doc = nlohmann::json::parse(read_file(path), nullptr, false);
  if (doc.is_discarded()) throw DataError(path.string() + ": malformed JSON");
  return doc;
}

// ---------------------------------------------------------------- attribute

int cmd_attribute(const AttributeArgs& args, const std::vector<std::string>& command_line,
                  std::ostream& out, std::ostream& err) {
  if (args.model_id.empty() || args.model_id.find('/') != std::string::npos) {
    throw UsageError("--model-id must be non-empty and contain no '/'");
  }
  const std::vector<RulePair> corpus = load_corpus(args.corpus);
  const Stoplist stoplist =
      args.stopwords.empty() ? default_stoplist() : load_stoplist(args.stopwords);

  std::unique_ptr<ScoreBackend> backend;
  ModelEntry model{.model_id = args.model_id};
  const BackendArgs& b = args.backend;
  if (!b.endpoint.empty()) {
    if (!b.backend.empty() && b.backend != "remote") {
      throw UsageError("--endpoint cannot be combined with --backend " + b.backend);
    }
    auto remote = std::make_unique<RemoteScorer>(b.endpoint, policy_of(b), b.in_flight);
    model.endpoint = b.endpoint;
    model.parameters = {{"retries", b.retries}, {"timeout_ms", b.timeout_ms}};
    backend = std::move(remote);
  } else if (b.backend.empty() || b.backend == "reference") {
    backend = std::make_unique<ReferenceScorer>(b.alpha);
    model.endpoint = "reference";
    model.parameters = {{"alpha", b.alpha}};
  } else {
    throw UsageError("unknown --backend '" + b.backend + "' (use reference, or --endpoint URL)");
  }
  CountingScorer counting(*backend);

  std::unique_ptr<DiskScoreCache> cache;
  if (!args.cache.empty()) cache = std::make_unique<DiskScoreCache>(args.cache);

  AttributionConfig config{.model_id = args.model_id,
                           .in_flight = positive(b.in_flight, "--in-flight"),
                           .parallelism = positive(args.parallel, "--parallel"),
                           .max_failures = static_cast<std::size_t>(std::max(0, args.max_failures)),
                           .cache = cache.get()};
  const BatchResult result = batch_attribute(corpus, counting, stoplist, config);

  const fs::path run_dir(args.out);
  write_attributions(run_dir / "attributions" / (args.model_id + ".jsonl"), result.records);

  RunManifest manifest;
  const fs::path manifest_path = run_dir / "manifest.json";
  const std::string corpus_digest = sha256_file(args.corpus);
  if (fs::exists(manifest_path)) {
    manifest = read_manifest(manifest_path);
    if (manifest.corpus_digest != corpus_digest || manifest.stopword_digest != stoplist.digest) {
      throw IntegrityError("run directory " + run_dir.string() +
                           " was created for a different corpus or stop-word list");
    }
  } else {
    manifest.run_id = run_dir.filename().string();
    if (manifest.run_id.empty()) manifest.run_id = run_dir.parent_path().filename().string();
    manifest.created_at = current_timestamp();
    manifest.corpus_path = args.corpus;
    manifest.corpus_digest = corpus_digest;
    manifest.stopword_path = stoplist.source;
    manifest.stopword_digest = stoplist.digest;
  }
  manifest.alpha = b.alpha;
  manifest.parallelism = args.parallel;
  manifest.tool_version = ABLATE_VERSION;
  std::erase_if(manifest.models, [&](const ModelEntry& m) { return m.model_id == args.model_id; });
  manifest.models.push_back(model);
  manifest.extra["invocations"][args.model_id] =
      std::vector<std::string>(command_line.begin() + (command_line.empty() ? 0 : 1), command_line.end());
  if (!result.failures.empty()) {
    nlohmann::json failures = nlohmann::json::array();
    for (const auto& f : result.failures) {
      failures.push_back({{"model_id", args.model_id}, {"sample_id", f.sample_id}, {"error", f.message}});
    }
    manifest.extra["failures"] = failures;
  }
  write_manifest(manifest, run_dir);

  err << "attribute: model=" << args.model_id << " samples=" << corpus.size()
      << " records=" << result.records.size() << " failures=" << result.failures.size()
      << " backend_calls=" << counting.calls()
      << " cache_hits=" << (cache ? cache->hits() : 0) << "\n";
  out << (run_dir / "attributions" / (args.model_id + ".jsonl")).string() << "\n";
  return 0;
}

// ------------------------------------------------------------------ compare

std::map<std::string, std::vector<AttributionRecord>> load_models(
    const std::vector<std::string>& inputs) {
  std::map<std::string, std::vector<AttributionRecord>> by_model;
  for (const auto& spec : inputs) {
    std::string label;
    std::string path = spec;
    if (const auto eq = spec.find('='); eq != std::string::npos && !fs::exists(spec)) {
      label = spec.substr(0, eq);
      path = spec.substr(eq + 1);
    }
    auto records = read_attributions(path);
    if (label.empty()) {
      std::set<std::string> ids;
      for (const auto& r : records) ids.insert(r.model_id);
      if (ids.size() != 1) {
        throw DataError(path + ": expected records of exactly one model, found " +
                        std::to_string(ids.size()));
      }
      label = *ids.begin();
    }
    for (auto& r : records) r.model_id = label;
    if (!by_model.emplace(label, std::move(records)).second) {
      throw UsageError("model '" + label + "' given twice; label inputs as model=path");
    }
  }
  return by_model;
}

int cmd_compare(const CompareArgs& args, const std::vector<std::string>& command_line,
                std::ostream& out) {
  if (args.inputs.size() < 2) throw UsageError("compare needs at least two --input files");
  const auto by_model = load_models(args.inputs);
  const AnalysisResult analysis = compare_models(by_model);
  auto doc = to_json(analysis);
  doc["metadata"] = {{"quartile_method", "linear interpolation at p*(n-1) (type 7)"},
                     {"wilcoxon_exact_max_n", kWilcoxonExactLimit},
                     {"tool_version", ABLATE_VERSION}};
  write_json(args.out, doc);
  if (!args.csv.empty()) write_file_atomic(args.csv, similarities_csv(analysis));
  std::vector<std::string> inputs;
  for (const auto& spec : args.inputs) {
    const auto eq = spec.find('=');
    inputs.push_back(eq != std::string::npos && !fs::exists(spec) ? spec.substr(eq + 1) : spec);
  }
  write_invocation(sidecar(args.out), command_line, inputs);
  for (const auto& pair : analysis.pairs) {
    out << pair.model_a << "-vs-" << pair.model_b << " mean_cosine=" << nlohmann::json(pair.mean_cosine).dump()
        << "\n";
  }
  return 0;
}

// ----------------------------------------------------------------- evaluate

int cmd_evaluate(const EvaluateArgs& args, const std::vector<std::string>& command_line,
                 std::ostream& out) {
  const auto corpus = load_corpus(args.corpus);
  std::vector<std::string> models = args.models;
  if (models.empty()) {
    std::set<std::string> ids;
    for (const auto& pair : corpus) {
      for (const auto& [id, script] : pair.generated_scripts) ids.insert(id);
    }
    models.assign(ids.begin(), ids.end());
  }
  if (models.empty()) throw DataError("corpus has no generated scripts to evaluate");

  std::unique_ptr<EmbedBackend> embedder;
  if (!args.embed_endpoint.empty()) {
    if (!args.embedder.empty() && args.embedder != "remote") {
      throw UsageError("--embed-endpoint cannot be combined with --embedder " + args.embedder);
    }
    embedder = std::make_unique<RemoteEmbedder>(args.embed_endpoint, policy_of(args.backend),
                                                args.backend.in_flight);
  } else if (args.embedder.empty() || args.embedder == "mock") {
    embedder = std::make_unique<MockEmbedder>(positive(args.dim, "--dim"));
  } else {
    throw UsageError("unknown --embedder '" + args.embedder + "' (use mock, or --embed-endpoint URL)");
  }

  const EvaluationConfig config{.beta = args.beta,
                                .parallelism = positive(args.parallel, "--parallel"),
                                .max_failures = static_cast<std::size_t>(std::max(0, args.max_failures))};
  const CorpusEvaluation evaluation = evaluate_corpus(corpus, models, *embedder, config);
  auto doc = to_json(evaluation);
  doc["embedder"] = embedder->describe();
  doc["corpus_digest"] = sha256_file(args.corpus);
  write_json(args.out, doc);
  write_invocation(sidecar(args.out), command_line, {args.corpus});
  for (const auto& model : evaluation.models) {
    out << model.model_id << " samples=" << model.samples.size();
    if (model.box_f1) out << " median_f1=" << nlohmann::json(model.box_f1->median).dump();
    if (model.box_fbeta) out << " median_fbeta=" << nlohmann::json(model.box_fbeta->median).dump();
    out << "\n";
  }
  return 0;
}

// ------------------------------------------------------------------- report

int cmd_heatmap(const HeatmapArgs& args, const std::vector<std::string>& command_line,
                std::ostream& out) {
  HeatmapSpec spec;
  spec.mode = parse_normalization_mode(args.mode);
  spec.title = args.title;
  std::set<std::pair<std::string, std::string>> seen;
  for (const auto& path : args.attributions) {
    for (auto& record : read_attributions(path)) {
      if (!seen.insert({record.sample_id, record.model_id}).second) {
        throw DataError("duplicate record for sample '" + record.sample_id + "', model '" +
                        record.model_id + "'");
      }
      spec.records.push_back(std::move(record));
    }
  }
  if (spec.records.empty()) throw DataError("no attribution records to render");
  const HeatmapLayout layout = layout_heatmap(spec);
  write_file_atomic(args.out, render_heatmap(spec));
  if (!args.json_out.empty()) write_json(args.json_out, to_json(layout));
  write_invocation(sidecar(args.out), command_line, args.attributions);
  out << args.out << "\n";
  return 0;
}

int cmd_boxplot(const BoxplotArgs& args, const std::vector<std::string>& command_line,
                std::ostream& out) {
  const nlohmann::json doc = read_json(args.input);
  // metric name -> (plot title, groups)
  std::map<std::string, std::pair<std::string, std::map<std::string, BoxSummary>>> metrics;
  if (doc.contains("pairs")) {
    auto& cosine = metrics["cosine"];
    cosine.first = "Cosine similarity of attribution vectors";
    for (const auto& pair : doc.at("pairs")) {
      if (pair.at("box").is_null()) continue;
      cosine.second[pair.at("model_a").get<std::string>() + "-vs-" +
                    pair.at("model_b").get<std::string>()] = box_from_json(pair.at("box"));
    }
  } else if (doc.contains("models")) {
    const double beta = doc.at("beta").get<double>();
    auto& f1 = metrics["f1"];
    auto& fbeta = metrics["fbeta"];
    f1.first = "F1 semantic similarity";
    fbeta.first = "F" + nlohmann::json(beta).dump() + " semantic similarity";
    for (const auto& model : doc.at("models")) {
      const auto id = model.at("model_id").get<std::string>();
      if (!model.at("box_f1").is_null()) f1.second[id] = box_from_json(model.at("box_f1"));
      if (!model.at("box_fbeta").is_null()) fbeta.second[id] = box_from_json(model.at("box_fbeta"));
    }
  } else {
    throw DataError(args.input + ": neither a compare nor an evaluate output");
  }

  nlohmann::ordered_json dump = nlohmann::ordered_json::object();
  for (const auto& [metric, plot] : metrics) {
    if (plot.second.empty()) continue;
    const fs::path path = fs::path(args.out) / (metric + ".svg");
    write_file_atomic(path, render_boxplot(plot.second, plot.first));
    dump[metric] = boxplot_json(plot.second, plot.first);
    out << path.string() << "\n";
  }
  if (dump.empty()) throw DataError(args.input + ": no box summaries to plot");
  if (!args.json_out.empty()) write_json(args.json_out, dump);
  write_invocation(fs::path(args.out) / "manifest.json", command_line, {args.input});
  return 0;
}

// -------------------------------------------------------------- mock-server

int cmd_mock_server(const MockServerArgs& args, std::ostream& out, std::ostream& err) {
  MockServerOptions options{.alpha = args.alpha,
                            .embed_dim = positive(args.dim, "--dim"),
                            .model_name = args.model,
                            .host = args.host,
                            .log = [&err](const std::string& line) { err << line << std::endl; }};
  MockServer server(std::move(options));

  // Deliver SIGINT/SIGTERM to a waiter thread instead of an async handler.
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);
  std::jthread waiter([&server, signals] {
    int received = 0;
    sigwait(&signals, &received);
    server.stop();
  });

  try {
    server.listen(args.port, [&](int port) {
      out << "listening on http://" << args.host << ":" << port << std::endl;
    });
  } catch (...) {
    pthread_kill(waiter.native_handle(), SIGTERM);
    throw;
  }
  return 0;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Word-level ablation attribution, comparison and reporting for text-generation models",
               "ablate"};
  app.config_formatter(std::make_shared<JsonConfig>());
  app.set_config("--config", "", "JSON file mirroring the command-line flags");
  app.set_version_flag("--version", ABLATE_VERSION);
  app.require_subcommand(1);
  app.fallthrough();

  AttributeArgs attribute;
  auto* attr = app.add_subcommand("attribute", "Score every non-stop word of each rule by ablation");
  env(attr->add_option("--corpus", attribute.corpus, "Corpus JSONL")->required(), "CORPUS");
  env(attr->add_option("--backend", attribute.backend.backend, "Built-in backend: reference"), "BACKEND");
  env(attr->add_option("--endpoint", attribute.backend.endpoint, "Wire-protocol scoring endpoint URL"),
      "ENDPOINT");
  env(attr->add_option("--model-id", attribute.model_id, "Model label for the outputs")->required(),
      "MODEL_ID");
  env(attr->add_option("--out", attribute.out, "Run directory")->required(), "OUT");
  env(attr->add_option("--stopwords", attribute.stopwords, "Stop-word file (default: bundled list)"),
      "STOPWORDS");
  env(attr->add_option("--alpha", attribute.backend.alpha, "Reference scorer smoothing")
          ->capture_default_str(),
      "ALPHA");
  env(attr->add_option("--parallel", attribute.parallel, "Samples attributed concurrently")
          ->capture_default_str(),
      "PARALLEL");
  env(attr->add_option("--cache", attribute.cache, "Score cache directory"), "CACHE");
  env(attr->add_option("--max-failures", attribute.max_failures, "Tolerated failed samples")
          ->capture_default_str(),
      "MAX_FAILURES");
  add_backend_options(attr, attribute.backend);

  CompareArgs compare;
  auto* cmp = app.add_subcommand("compare", "Cosine similarities and paired tests across models");
  env(cmp->add_option("--input", compare.inputs, "Attribution JSONL, optionally as model=path")
          ->required(),
      "INPUT");
  env(cmp->add_option("--out", compare.out, "Analysis JSON output")->required(), "OUT");
  env(cmp->add_option("--csv", compare.csv, "Per-sample cosine CSV output"), "CSV");

  EvaluateArgs evaluate;
  auto* eval = app.add_subcommand("evaluate", "Greedy-matching semantic similarity of generated scripts");
  env(eval->add_option("--corpus", evaluate.corpus, "Corpus JSONL")->required(), "CORPUS");
  env(eval->add_option("--model", evaluate.models, "Model ids (default: all generated)"), "MODEL");
  env(eval->add_option("--embedder", evaluate.embedder, "Built-in embedder: mock"), "EMBEDDER");
  env(eval->add_option("--embed-endpoint", evaluate.embed_endpoint, "Wire-protocol embedding endpoint URL"),
      "EMBED_ENDPOINT");
  env(eval->add_option("--dim", evaluate.dim, "Mock embedding dimension")->capture_default_str(), "DIM");
  env(eval->add_option("--beta", evaluate.beta, "F-beta weight (F1 is always reported)")
          ->capture_default_str(),
      "BETA");
  env(eval->add_option("--out", evaluate.out, "Evaluation JSON output")->required(), "OUT");
  env(eval->add_option("--parallel", evaluate.parallel, "Concurrent evaluations")->capture_default_str(),
      "PARALLEL");
  env(eval->add_option("--max-failures", evaluate.max_failures, "Tolerated failed evaluations")
          ->capture_default_str(),
      "MAX_FAILURES");
  add_backend_options(eval, evaluate.backend);

  auto* report = app.add_subcommand("report", "Render heatmaps and box plots");
  report->require_subcommand(1);
  HeatmapArgs heatmap;
  auto* hm = report->add_subcommand("heatmap", "HTML attribution heatmap");
  env(hm->add_option("--attributions", heatmap.attributions, "Attribution JSONL files")->required(),
      "ATTRIBUTIONS");
  env(hm->add_option("--mode", heatmap.mode, "shared-max or per-model")->capture_default_str(), "MODE");
  env(hm->add_option("--out", heatmap.out, "HTML output")->required(), "OUT");
  env(hm->add_option("--json-out", heatmap.json_out, "Dump of every rendered number"), "JSON_OUT");
  env(hm->add_option("--title", heatmap.title, "Page title")->capture_default_str(), "TITLE");

  BoxplotArgs boxplot;
  auto* bp = report->add_subcommand("boxplot", "SVG box plots from compare or evaluate output");
  env(bp->add_option("--input", boxplot.input, "analysis.json or evaluation JSON")->required(), "INPUT");
  env(bp->add_option("--out", boxplot.out, "Output directory (one SVG per metric)")->required(), "OUT");
  env(bp->add_option("--json-out", boxplot.json_out, "Dump of every plotted number"), "JSON_OUT");

  MockServerArgs mock;
  auto* ms = app.add_subcommand("mock-server", "Serve the reference scorer and mock embedder over HTTP");
  env(ms->add_option("--host", mock.host, "Bind address")->capture_default_str(), "HOST");
  env(ms->add_option("--port", mock.port, "Port (0 picks a free one)")->capture_default_str(), "PORT");
  env(ms->add_option("--alpha", mock.alpha, "Reference scorer smoothing")->capture_default_str(), "ALPHA");
  env(ms->add_option("--dim", mock.dim, "Embedding dimension")->capture_default_str(), "DIM");
  env(ms->add_option("--model", mock.model, "Model name reported by /v1/health")->capture_default_str(),
      "MODEL_NAME");

  std::vector<const char*> argv;
  argv.reserve(args.size());
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : static_cast<int>(ErrorKind::kUsage);
  }

  try {
    if (attr->parsed()) return cmd_attribute(attribute, args, out, err);
    if (cmp->parsed()) return cmd_compare(compare, args, out);
    if (eval->parsed()) return cmd_evaluate(evaluate, args, out);
    if (hm->parsed()) return cmd_heatmap(heatmap, args, out);
    if (bp->parsed()) return cmd_boxplot(boxplot, args, out);
    if (ms->parsed()) return cmd_mock_server(mock, out, err);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return e.exit_code();
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return static_cast<int>(ErrorKind::kData);
  } catch (const nlohmann::json::exception& e) {
    err << "error: " << e.what() << "\n";
    return static_cast<int>(ErrorKind::kData);
  }
  return static_cast<int>(ErrorKind::kUsage);
}

}  // namespace ablate::cli
