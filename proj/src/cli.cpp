#include "metaqa/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <fmt/ranges.h>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "metaqa/baseline.hpp"
#include "metaqa/dataset.hpp"
#include "metaqa/error.hpp"
#include "metaqa/eval.hpp"
#include "metaqa/labeler.hpp"
#include "metaqa/live_backend.hpp"
#include "metaqa/mock_backend.hpp"
#include "metaqa/parallel.hpp"
#include "metaqa/pipeline.hpp"
#include "metaqa/prompts.hpp"
#include "metaqa/response_cache.hpp"
#include "metaqa/run.hpp"

namespace metaqa {

namespace fs = std::filesystem;
using nlohmann::json;

void RunConfig::validate() const {
  auto fail = [](const std::string& message) { throw Error(ErrorCode::InvalidConfig, message); };
  if (model_id.empty()) fail("model_id must not be empty");
  if (!(temperature >= 0.0 && temperature <= kMaxTemperature)) {
    fail(fmt::format("temperature must be in [0, 2], got {}", temperature));
  }
  if (!(baseline_temperature >= 0.0 && baseline_temperature <= kMaxTemperature)) {
    fail(fmt::format("baseline_temperature must be in [0, 2], got {}", baseline_temperature));
  }
  if (syn_count < 0 || syn_count > 50) fail("syn_count must be in [0, 50]");
  if (ant_count < 0 || ant_count > 50) fail("ant_count must be in [0, 50]");
  if (syn_count + ant_count == 0) fail("syn_count + ant_count must be at least 1");
  if (baseline_k < 1 || baseline_k > 100) fail("baseline_k must be in [1, 100]");
  if (workers < 1 || workers > 64) fail("workers must be in [1, 64]");
  if (max_inflight < 1 || max_inflight > 256) fail("max_inflight must be in [1, 256]");
  if (backend != "live" && backend != "mock") fail("backend must be live or mock");
  if (backend == "mock" && mock_script.empty()) fail("backend=mock needs mock_script");
  if (backend == "live" && endpoint_url.empty()) fail("endpoint_url must not be empty");
}

json RunConfig::echo() const {
  return json{{"model_id", model_id},
              {"endpoint_url", endpoint_url},
              {"temperature", temperature},
              {"threshold", threshold.to_string()},
              {"syn_count", syn_count},
              {"ant_count", ant_count},
              {"baseline_k", baseline_k},
              {"baseline_temperature", baseline_temperature},
              {"seed", seed},
              {"cache_dir", no_cache ? std::string() : cache_dir},
              {"prompt_catalog_path", prompt_catalog_path},
              {"dataset_path", dataset_path},
              {"backend", backend},
              {"mock_script", mock_script},
              {"verifier_model", verifier_model.empty() ? model_id : verifier_model},
              {"labeler_model", labeler_model.empty() ? model_id : labeler_model}};
}

namespace {

// Raised for refusals that are neither config nor runtime failures.
struct Refusal : std::runtime_error {
  int code;
  Refusal(int c, const std::string& message) : std::runtime_error(message), code(c) {}
};

struct Args {
  RunConfig cfg;
  std::string threshold_text = "0.5";
  std::string format = "human";

  std::string question;
  std::string answer;
  bool have_answer = false;
  std::string question_id = "q1";

  std::string method = "metaqa";
  std::int64_t sample_k = -1;
  double sample_fraction = -1.0;
  std::vector<std::string> categories;

  std::string run_path;
  std::string labels_path;
  std::string labels_out;
  std::string queue_path;
  std::string grid = "0.2:0.7:0.05";
  bool exclude_degraded = false;

  std::vector<std::string> heatmap_cells;
  bool categories_report = false;
  std::vector<std::string> stability_runs;
  bool sensitivity = false;
  std::string k_grid = "2,4,6,8,10";
  std::string f1_check;
  std::string usage_file;
  bool triples = false;
};

std::string theta_label(const Threshold& t) {
  auto s = t.to_string();
  while (s.size() > 3 && s.back() == '0') s.pop_back();
  return s;
}

std::string read_file(const std::string& path, std::string_view what) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, fmt::format("cannot open {} {}", what, path));
  std::stringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void write_file(const RunConfig& cfg, const std::string& path, const std::string& text) {
  std::error_code ec;
  if (!cfg.dataset_path.empty() && fs::exists(path) &&
      fs::equivalent(path, cfg.dataset_path, ec)) {
    throw Error(ErrorCode::InvalidConfig, "refusing to overwrite the dataset " + path);
  }
  const auto tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::Io, "cannot write " + path);
    out << text;
    if (!out.flush()) throw Error(ErrorCode::Io, "cannot write " + path);
  }
  fs::rename(tmp, path, ec);
  if (ec) throw Error(ErrorCode::Io, "cannot move " + tmp + " to " + path + ": " + ec.message());
}

std::string csv_with_header(const RunConfig& cfg, const std::string& csv) {
  return "# config: " + cfg.echo().dump() + "\n" + csv;
}

std::unique_ptr<Gateway> make_gateway(const RunConfig& cfg, const CliEnvironment& env) {
  auto backend = env.backend;
  if (!backend) {
    if (cfg.backend == "mock") {
      backend = std::make_shared<MockBackend>(
          MockBackend::parse_script(read_file(cfg.mock_script, "mock script")));
    } else {
      LiveConfig live;
      live.endpoint_url = cfg.endpoint_url;
      live.api_key_env = cfg.api_key_env;
      live.max_inflight = cfg.max_inflight;
      backend = std::make_shared<LiveBackend>(live);
    }
  }
  std::shared_ptr<ResponseCache> cache;
  if (!cfg.no_cache && !cfg.cache_dir.empty()) {
    cache = std::make_shared<ResponseCache>(cfg.cache_dir);
  }
  return std::make_unique<Gateway>(std::move(backend), std::move(cache));
}

PromptCatalog load_catalog(const RunConfig& cfg) {
  if (cfg.prompt_catalog_path.empty()) return PromptCatalog::builtin();
  return PromptCatalog::from_file(cfg.prompt_catalog_path);
}

ModelSettings model_settings(const RunConfig& cfg, const std::string& override_id) {
  ModelSettings s;
  s.model_id = override_id.empty() ? cfg.model_id : override_id;
  s.temperature = cfg.temperature;
  return s;
}

DetectorOptions detector_options(const RunConfig& cfg) {
  DetectorOptions o;
  o.answer_model = model_settings(cfg, "");
  o.verifier_model = model_settings(cfg, cfg.verifier_model);
  o.syn_count = cfg.syn_count;
  o.ant_count = cfg.ant_count;
  o.threshold = cfg.threshold;
  o.workers = cfg.workers;
  return o;
}

Dataset require_dataset(const RunConfig& cfg) {
  if (cfg.dataset_path.empty()) throw Error(ErrorCode::InvalidConfig, "dataset_path is required");
  return load_dataset(cfg.dataset_path);
}

void require(const std::string& value, std::string_view flag) {
  if (value.empty()) throw Error(ErrorCode::InvalidConfig, fmt::format("{} is required", flag));
}

LabelSet gated_labels(const std::string& path) {
  require(path, "--labels");
  auto labels = load_labels(path);
  const auto pending = count_needs_review(labels);
  if (pending > 0) {
    throw Refusal(kExitNeedsReview,
                  fmt::format("{} label(s) in {} still need review; run `metaqa review export` "
                              "and `metaqa review import` before evaluating",
                              pending, path));
  }
  return labels;
}

std::vector<ScoredItem> items_of(const RunFile& run, const std::string& method) {
  std::vector<ScoredItem> items;
  if (method == "metaqa") {
    for (const auto& t : run.detection) items.push_back(scored_item(t));
  } else if (method == "baseline") {
    for (const auto& t : run.baseline) items.push_back(scored_item(t));
  } else {
    throw Error(ErrorCode::InvalidConfig, "method must be metaqa or baseline here");
  }
  if (items.empty()) {
    throw Error(ErrorCode::InvalidConfig, "run has no " + method + " records");
  }
  return items;
}

json metrics_json(const Metrics& m) {
  return json{{"threshold", m.threshold.to_string()},
              {"precision", m.precision},
              {"recall", m.recall},
              {"f1", m.f1},
              {"tp", m.counts.tp},
              {"fp", m.counts.fp},
              {"tn", m.counts.tn},
              {"fn", m.counts.fn},
              {"precision_undefined", m.precision_undefined},
              {"recall_undefined", m.recall_undefined}};
}

std::string metric_cell(double value, bool undefined) {
  return undefined ? std::string("NA") : fmt::format("{:.4f}", value);
}

// ---- commands -------------------------------------------------------------

int cmd_detect(const Args& a, std::ostream& out, const CliEnvironment& env) {
  require(a.question, "--question");
  const auto& cfg = a.cfg;
  auto gateway = make_gateway(cfg, env);
  const auto catalog = load_catalog(cfg);
  const auto trace =
      detect(a.question_id, a.question,
             a.have_answer ? std::optional<std::string>(a.answer) : std::nullopt, *gateway,
             catalog, detector_options(cfg));

  if (!cfg.output_path.empty()) {
    write_file(cfg, cfg.output_path, serialize_run(cfg.echo(), {RunRecord(trace)}));
  }
  if (a.format == "json") {
    out << json(trace).dump() << '\n';
    return kExitOk;
  }
  out << "question: " << trace.question << '\n';
  out << "base response: " << trace.base_response << '\n';
  auto section = [&](Relation relation, std::string_view title) {
    out << title << ":\n";
    for (const auto& v : trace.verified) {
      if (v.mutation.relation != relation) continue;
      out << fmt::format("  {}. [{}] {}", v.mutation.index + 1, to_string(v.verdict.value),
                         v.mutation.text);
      const auto flags = v.mutation.flags.names();
      if (!flags.empty()) out << "  (" << fmt::format("{}", fmt::join(flags, ", ")) << ")";
      if (v.degraded) out << "  (degraded)";
      out << '\n';
    }
  };
  section(Relation::Synonymy, "synonym mutations");
  section(Relation::Antonymy, "antonym mutations");
  if (trace.shortfall) out << "note: fewer mutations than requested\n";
  if (trace.degraded) out << "note: some calls failed; the trace is degraded\n";
  if (!trace.score) {
    out << "S_QB unavailable: no verdicts\n";
    return kExitFailure;
  }
  out << fmt::format("S_QB {} ({}/{}) from {} synonym and {} antonym verdicts\n",
                     trace.score->to_string(), trace.score->numerator(),
                     trace.score->denominator(), trace.syn_count, trace.ant_count);
  out << (trace.classified_hallucination ? "Hallucination" : "No Hallucination") << " at θ="
      << theta_label(trace.threshold) << '\n';
  const auto report = gateway->usage_report();
  out << fmt::format("tokens: {} charged\n", report.total.total_tokens);
  return kExitOk;
}

int cmd_run(const Args& a, std::ostream& out, const CliEnvironment& env) {
  const auto& cfg = a.cfg;
  require(cfg.output_path, "--output_path");
  const auto method = method_from_string(a.method);
  if (!method) throw Error(ErrorCode::InvalidConfig, "method must be metaqa, baseline or both");
  if (a.sample_k >= 0 && a.sample_fraction >= 0.0) {
    throw Error(ErrorCode::InvalidConfig, "use either --sample_k or --sample_fraction");
  }

  const auto dataset = require_dataset(cfg);
  auto records = dataset.records;
  if (!a.categories.empty()) {
    records = filter_by_category(
        records, std::set<std::string, std::less<>>(a.categories.begin(), a.categories.end()));
  }
  if (a.sample_fraction >= 0.0) {
    records = sample(records, sample_size_for_fraction(records.size(), a.sample_fraction), cfg.seed);
  } else if (a.sample_k >= 0) {
    records = sample(records, static_cast<std::size_t>(a.sample_k), cfg.seed);
  }

  auto gateway = make_gateway(cfg, env);
  const auto catalog = load_catalog(cfg);
  RunOptions options;
  options.method = *method;
  options.detector = detector_options(cfg);
  options.baseline.model = model_settings(cfg, "");
  options.baseline.sample_temperature = cfg.baseline_temperature;
  options.baseline.samples = cfg.baseline_k;
  options.baseline.threshold = cfg.threshold;
  options.baseline.workers = cfg.workers;
  options.workers = cfg.workers;

  const auto results = run_dataset(records, *gateway, catalog, options);

  auto header = cfg.echo();
  header["method"] = a.method;
  header["sample_k"] = a.sample_k >= 0 ? json(a.sample_k) : json(nullptr);
  header["sample_fraction"] = a.sample_fraction >= 0.0 ? json(a.sample_fraction) : json(nullptr);
  header["categories"] = a.categories;
  write_file(cfg, cfg.output_path, serialize_run(header, results));

  const auto summary = summarize(results);
  const auto usage = gateway->usage_report();
  json usage_doc{{"summary",
                  {{"questions", summary.questions},
                   {"records", summary.records},
                   {"degraded", summary.degraded},
                   {"unscored", summary.unscored},
                   {"skipped_records", dataset.skipped}}},
                 {"usage", usage.to_json(summary.questions)}};
  if (auto* cache = gateway->cache()) {
    const auto s = cache->stats();
    usage_doc["cache"] = {{"hits", s.hits}, {"misses", s.misses}, {"evictions", s.evictions}};
  }
  write_file(cfg, cfg.output_path + ".usage.json", usage_doc.dump(2) + "\n");

  if (a.format == "json") {
    out << usage_doc.dump() << '\n';
  } else {
    out << fmt::format("{} questions, {} records, {} degraded, {} unscored\n", summary.questions,
                       summary.records, summary.degraded, summary.unscored);
    out << fmt::format("tokens charged this run: {} over {} calls\n", usage.total.total_tokens,
                       [&] {
                         std::int64_t n = 0;
                         for (const auto& [tag, c] : usage.calls) n += c;
                         return n;
                       }());
    out << "traces: " << cfg.output_path << "\nusage: " << cfg.output_path << ".usage.json\n";
  }
  return kExitOk;
}

struct RunContext {
  std::string question;
  std::string answer;
  std::vector<std::string> references;
};

std::map<std::string, RunContext, std::less<>> contexts_of(const RunFile& run,
                                                           const std::vector<QaRecord>& records) {
  std::map<std::string, const QaRecord*, std::less<>> by_id;
  for (const auto& r : records) by_id[r.id] = &r;
  std::map<std::string, RunContext, std::less<>> out;
  auto add = [&](const std::string& id, const std::string& answer) {
    if (out.contains(id)) return;
    const auto it = by_id.find(id);
    if (it == by_id.end()) {
      throw Error(ErrorCode::UnknownId, "run question '" + id + "' is not in the dataset");
    }
    out[id] = {it->second->question, answer, it->second->references()};
  };
  for (const auto& t : run.detection) add(t.question_id, t.base_response);
  for (const auto& t : run.baseline) add(t.question_id, t.base_response);
  return out;
}

int cmd_label(const Args& a, std::ostream& out, const CliEnvironment& env) {
  const auto& cfg = a.cfg;
  require(a.run_path, "--run");
  require(cfg.output_path, "--output_path");
  const auto run = load_run(a.run_path);
  const auto dataset = require_dataset(cfg);
  const auto contexts = contexts_of(run, dataset.records);

  auto gateway = make_gateway(cfg, env);
  const auto catalog = load_catalog(cfg);
  const auto settings = model_settings(cfg, cfg.labeler_model);

  std::vector<std::pair<std::string, RunContext>> work(contexts.begin(), contexts.end());
  std::vector<Label> results(work.size());
  parallel_for(work.size(), cfg.workers, [&](std::size_t i) {
    const auto& [id, c] = work[i];
    if (c.answer.empty()) {
      results[i] = {LabelValue::NeedsReview, LabelMethod::Auto, "no base response"};
      return;
    }
    results[i] = auto_validate(c.question, c.answer, c.references, *gateway, catalog, settings).label;
  });
  LabelSet labels;
  for (std::size_t i = 0; i < work.size(); ++i) labels[work[i].first] = results[i];

  const json header{{"schema", "metaqa-labels/1"}, {"config", cfg.echo()}};
  write_file(cfg, cfg.output_path, header.dump() + "\n" + serialize_labels(labels));

  std::map<LabelValue, int> tally;
  for (const auto& [id, l] : labels) ++tally[l.value];
  if (a.format == "json") {
    out << json{{"factual", tally[LabelValue::Factual]},
                {"hallucination", tally[LabelValue::Hallucination]},
                {"needs_review", tally[LabelValue::NeedsReview]}}
               .dump()
        << '\n';
  } else {
    out << fmt::format("labeled {} questions: {} factual, {} hallucination, {} needs_review\n",
                       labels.size(), tally[LabelValue::Factual],
                       tally[LabelValue::Hallucination], tally[LabelValue::NeedsReview]);
    if (tally[LabelValue::NeedsReview] > 0) {
      out << "resolve pending labels with `metaqa review export` then `metaqa review import`\n";
    }
  }
  return kExitOk;
}

int cmd_review_export(const Args& a, std::ostream& out) {
  const auto& cfg = a.cfg;
  require(a.labels_path, "--labels");
  require(a.run_path, "--run");
  const auto queue_path = a.queue_path.empty() ? cfg.output_path : a.queue_path;
  require(queue_path, "--queue");
  const auto labels = load_labels(a.labels_path);
  const auto run = load_run(a.run_path);
  const auto dataset = require_dataset(cfg);
  std::vector<ReviewContext> contexts;
  for (const auto& [id, c] : contexts_of(run, dataset.records)) {
    contexts.push_back({id, c.question, c.answer, c.references});
  }
  write_file(cfg, queue_path,
             "# config: " + cfg.echo().dump() + "\n" + export_review_queue(labels, contexts));
  out << fmt::format("{} item(s) queued for review in {}\n", count_needs_review(labels), queue_path);
  return kExitOk;
}

int cmd_review_import(const Args& a, std::ostream& out) {
  const auto& cfg = a.cfg;
  require(a.labels_path, "--labels");
  require(a.queue_path, "--queue");
  auto labels = load_labels(a.labels_path);
  std::set<std::string, std::less<>> known;
  for (const auto& [id, l] : labels) known.insert(id);
  const auto resolutions = import_resolutions(read_file(a.queue_path, "review queue"), known);
  apply_resolutions(labels, resolutions);
  const auto target = a.labels_out.empty() ? a.labels_path : a.labels_out;
  const json header{{"schema", "metaqa-labels/1"}, {"config", cfg.echo()}};
  write_file(cfg, target, header.dump() + "\n" + serialize_labels(labels));
  out << fmt::format("applied {} resolution(s); {} still need review; wrote {}\n",
                     resolutions.size(), count_needs_review(labels), target);
  return kExitOk;
}

int cmd_eval(const Args& a, std::ostream& out) {
  const auto& cfg = a.cfg;
  require(a.run_path, "--run");
  const auto labels = gated_labels(a.labels_path);
  const auto run = load_run(a.run_path);
  const auto items = items_of(run, a.method);
  const auto m =
      metrics(confusion(items, labels, cfg.threshold, {a.exclude_degraded}), cfg.threshold);
  const auto degraded = std::count_if(items.begin(), items.end(), [](auto& i) { return i.degraded; });
  const auto unscored = std::count_if(items.begin(), items.end(), [](auto& i) { return !i.score; });
  if (a.format == "json") {
    auto j = metrics_json(m);
    j["method"] = a.method;
    j["items"] = items.size();
    j["degraded"] = degraded;
    j["unscored"] = unscored;
    out << j.dump() << '\n';
  } else {
    out << fmt::format("method {}, θ={}, {} items ({} degraded, {} unscored)\n", a.method,
                       theta_label(m.threshold), items.size(), degraded, unscored);
    out << fmt::format("tp {} fp {} tn {} fn {}\n", m.counts.tp, m.counts.fp, m.counts.tn,
                       m.counts.fn);
    out << fmt::format("precision {} recall {} f1 {}\n",
                       metric_cell(m.precision, m.precision_undefined),
                       metric_cell(m.recall, m.recall_undefined), fmt::format("{:.4f}", m.f1));
  }
  if (!cfg.output_path.empty()) {
    write_file(cfg, cfg.output_path, csv_with_header(cfg, sweep_csv({m})));
  }
  return kExitOk;
}

int cmd_sweep(const Args& a, std::ostream& out) {
  const auto& cfg = a.cfg;
  require(a.run_path, "--run");
  const auto labels = gated_labels(a.labels_path);
  const auto run = load_run(a.run_path);
  const auto grid = parse_grid(a.grid);
  const auto sweep = threshold_sweep(items_of(run, a.method), labels, grid, {a.exclude_degraded});
  if (a.format == "json") {
    json rows = json::array();
    for (const auto& m : sweep) rows.push_back(metrics_json(m));
    out << rows.dump() << '\n';
  } else {
    out << fmt::format("{:>6}  {:>9}  {:>6}  {:>6}  {:>5} {:>5} {:>5} {:>5}\n", "theta",
                       "precision", "recall", "f1", "tp", "fp", "tn", "fn");
    for (const auto& m : sweep) {
      out << fmt::format("{:>6}  {:>9}  {:>6}  {:>6.4f}  {:>5} {:>5} {:>5} {:>5}\n",
                         theta_label(m.threshold), metric_cell(m.precision, m.precision_undefined),
                         metric_cell(m.recall, m.recall_undefined), m.f1, m.counts.tp,
                         m.counts.fp, m.counts.tn, m.counts.fn);
    }
  }
  if (!cfg.output_path.empty()) write_file(cfg, cfg.output_path, csv_with_header(cfg, sweep_csv(sweep)));
  return kExitOk;
}

std::vector<int> parse_k_grid(const std::string& text) {
  std::vector<int> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    try {
      const int k = std::stoi(item);
      if (k < 1) throw std::invalid_argument("k");
      out.push_back(k);
    } catch (const std::exception&) {
      throw Error(ErrorCode::InvalidGrid, "cannot read mutation count '" + item + "'");
    }
  }
  if (out.empty()) throw Error(ErrorCode::InvalidGrid, "empty mutation-count grid");
  return out;
}

void print_csv_section(std::ostream& out, const std::string& title, const std::string& csv,
                       bool as_json, json& doc) {
  if (as_json) {
    doc[title] = csv;
    return;
  }
  out << "== " << title << " ==\n" << csv << '\n';
}

int cmd_report(const Args& a, std::ostream& out) {
  const auto& cfg = a.cfg;
  const bool as_json = a.format == "json";
  json doc = json::object();
  std::string file_text;
  int sections = 0;
  auto emit = [&](const std::string& title, const std::string& csv) {
    ++sections;
    print_csv_section(out, title, csv, as_json, doc);
    file_text += "# " + title + "\n" + csv + "\n";
  };

  if (!a.heatmap_cells.empty()) {
    std::vector<HeatmapInput> cells;
    for (const auto& spec : a.heatmap_cells) {
      const auto first = spec.find(':');
      const auto second = first == std::string::npos ? first : spec.find(':', first + 1);
      if (second == std::string::npos) {
        throw Error(ErrorCode::InvalidConfig, "heatmap cell must be model:dataset:labels_path");
      }
      cells.push_back({spec.substr(0, first), spec.substr(first + 1, second - first - 1),
                       gated_labels(spec.substr(second + 1))});
    }
    emit("heatmap", heatmap_csv(hallucination_rate_heatmap(cells)));
  }

  if (a.categories_report || a.sensitivity || a.triples) {
    require(a.run_path, "--run");
    const auto labels = gated_labels(a.labels_path);
    const auto run = load_run(a.run_path);
    if (a.categories_report) {
      const auto dataset = require_dataset(cfg);
      emit("categories", category_csv(category_breakdown(items_of(run, a.method), labels,
                                                         dataset.records, cfg.threshold,
                                                         {a.exclude_degraded})));
    }
    if (a.sensitivity) {
      emit("sensitivity", sensitivity_csv(mutation_count_sensitivity(
                              run.detection, labels, {cfg.threshold}, parse_k_grid(a.k_grid),
                              {a.exclude_degraded})));
    }
    if (a.triples) {
      const auto dataset = require_dataset(cfg);
      std::map<std::string, std::string, std::less<>> source_of;
      for (const auto& r : dataset.records) source_of[r.id] = std::string(to_string(r.source));
      std::string csv = "method,dataset,precision,recall,f1\n";
      for (const std::string method : {"metaqa", "baseline"}) {
        if ((method == "metaqa" ? run.detection.empty() : run.baseline.empty())) continue;
        std::map<std::string, std::vector<ScoredItem>> by_source;
        for (const auto& item : items_of(run, method)) {
          const auto it = source_of.find(item.question_id);
          by_source[it == source_of.end() ? "Unknown" : it->second].push_back(item);
        }
        for (const auto& [source, items] : by_source) {
          const auto m = metrics(confusion(items, labels, cfg.threshold, {a.exclude_degraded}));
          csv += fmt::format("{},{},{:.4f},{:.4f},{:.4f}\n", method, source, m.precision,
                             m.recall, m.f1);
        }
      }
      emit("triples", csv);
    }
  }

  if (!a.stability_runs.empty()) {
    const auto labels = gated_labels(a.labels_path);
    std::vector<std::vector<ScoredItem>> runs;
    for (const auto& path : a.stability_runs) runs.push_back(items_of(load_run(path), a.method));
    emit("stability", stability_csv(stability_report(runs, labels, parse_grid(a.grid),
                                                     {a.exclude_degraded})));
  }

  if (!a.f1_check.empty()) {
    const auto checks =
        check_f1_consistency(parse_reference_triples(read_file(a.f1_check, "reference triples")));
    std::string csv = "method,dataset,precision,recall,f1,recomputed_f1,difference,consistent\n";
    int ok = 0;
    for (const auto& c : checks) {
      ok += c.consistent ? 1 : 0;
      csv += fmt::format("{},{},{:.3f},{:.3f},{:.3f},{:.4f},{:.4f},{}\n", c.row.method,
                         c.row.dataset, c.row.precision, c.row.recall, c.row.f1, c.recomputed_f1,
                         c.difference, c.consistent ? "yes" : "no");
    }
    emit("f1_check", csv);
    if (!as_json) out << fmt::format("{} of {} rows consistent\n", ok, checks.size());
  }

  if (!a.usage_file.empty()) {
    const auto u = json::parse(read_file(a.usage_file, "usage summary"));
    const auto& usage = u.contains("usage") ? u.at("usage") : u;
    std::string csv = "column,avg_tokens_per_question,growth_rate_percent\n";
    if (usage.contains("avg_per_question")) {
      const auto& avg = usage.at("avg_per_question");
      const auto growth = usage.value("growth_rate_percent", json::object());
      csv += fmt::format("base,{:.2f},NA\n", avg.at("base").get<double>());
      for (const std::string col : {"metaqa", "baseline"}) {
        const auto g = growth.contains(col) && !growth.at(col).is_null()
                           ? fmt::format("{:.2f}", growth.at(col).get<double>())
                           : std::string("NA");
        csv += fmt::format("{},{:.2f},{}\n", col, avg.at(col).get<double>(), g);
      }
    }
    emit("usage", csv);
  }

  if (sections == 0) {
    throw Error(ErrorCode::InvalidConfig,
                "nothing to report; pick --heatmap, --categories, --stability, --sensitivity, "
                "--triples, --f1_check or --usage");
  }
  if (as_json) out << doc.dump() << '\n';
  if (!cfg.output_path.empty()) write_file(cfg, cfg.output_path, csv_with_header(cfg, file_text));
  return kExitOk;
}

int cmd_cache(const Args& a, bool clear, std::ostream& out) {
  const auto& cfg = a.cfg;
  require(cfg.cache_dir, "--cache_dir");
  ResponseCache cache(cfg.cache_dir);
  if (clear) {
    const auto removed = cache.clear();
    out << fmt::format("removed {} cache entr{} from {}\n", removed, removed == 1 ? "y" : "ies",
                       cfg.cache_dir);
    return kExitOk;
  }
  const auto s = cache.stats();
  if (a.format == "json") {
    out << json{{"dir", cfg.cache_dir}, {"entries", s.entries}, {"bytes", s.bytes}}.dump() << '\n';
  } else {
    out << fmt::format("{}: {} entries, {} bytes\n", cfg.cache_dir, s.entries, s.bytes);
  }
  return kExitOk;
}

std::string hint_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::AuthFailure: return "check the API key environment variable (api_key_env)";
    case ErrorCode::BackendUnreachable: return "check endpoint_url and network access";
    case ErrorCode::ScriptExhausted: return "the mock script has no entry for this request";
    case ErrorCode::InvalidThreshold: return "threshold must be a decimal in [0, 1]";
    case ErrorCode::UnresolvedLabel:
    case ErrorCode::UnresolvedEntry: return "fill in every resolution as factual or hallucination";
    case ErrorCode::MissingLabel: return "label the run first with `metaqa label`";
    default: return {};
  }
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err,
            const CliEnvironment& env) {
  Args a;
  auto& cfg = a.cfg;

  CLI::App app{"Metamorphic hallucination detection for LLM answers", "metaqa"};
  app.set_config("--config", "", "Flat key=value file; keys are the long option names");
  app.allow_config_extras(CLI::config_extras_mode::error);
  app.fallthrough();
  app.require_subcommand(1);

  app.add_option("--model_id,--model-id", cfg.model_id, "Answering model");
  app.add_option("--endpoint_url,--endpoint-url", cfg.endpoint_url,
                 "Chat-completions endpoint for the live backend");
  app.add_option("--temperature", cfg.temperature, "Sampling temperature for pipeline calls");
  app.add_option("--threshold,--theta", a.threshold_text, "Decision threshold in [0, 1]");
  app.add_option("--syn_count,--syn-count", cfg.syn_count, "Synonym mutations per question");
  app.add_option("--ant_count,--ant-count", cfg.ant_count, "Antonym mutations per question");
  app.add_option("--baseline_k,--baseline-k", cfg.baseline_k, "Baseline samples per question");
  app.add_option("--baseline_temperature,--baseline-temperature", cfg.baseline_temperature,
                 "Temperature for baseline samples");
  app.add_option("--seed", cfg.seed, "Seed for dataset sampling");
  app.add_option("--cache_dir,--cache-dir", cfg.cache_dir, "Response cache directory");
  app.add_flag("--no_cache,--no-cache", cfg.no_cache, "Bypass the response cache");
  app.add_option("--prompt_catalog_path,--prompt-catalog-path", cfg.prompt_catalog_path,
                 "Prompt catalog file (default: built in)");
  app.add_option("--dataset_path,--dataset-path", cfg.dataset_path, "Dataset JSON Lines file");
  app.add_option("--output_path,--output-path,-o", cfg.output_path, "Output file");
  app.add_option("--backend", cfg.backend, "live or mock")->check(CLI::IsMember({"live", "mock"}));
  app.add_option("--mock_script,--mock-script", cfg.mock_script, "Mock backend script");
  app.add_option("--api_key_env,--api-key-env", cfg.api_key_env,
                 "Environment variable holding the API key");
  app.add_option("--verifier_model,--verifier-model", cfg.verifier_model,
                 "Model for verification calls (default: model_id)");
  app.add_option("--labeler_model,--labeler-model", cfg.labeler_model,
                 "Model for automatic labeling (default: model_id)");
  app.add_option("--workers", cfg.workers, "Concurrent pipeline workers");
  app.add_option("--max_inflight,--max-inflight", cfg.max_inflight,
                 "Live backend in-flight request limit");
  app.add_option("--format", a.format, "human or json")->check(CLI::IsMember({"human", "json"}));

  auto* detect_cmd = app.add_subcommand("detect", "Score one question");
  detect_cmd->add_option("--question,-q", a.question, "Question text")->required();
  detect_cmd->add_option("--answer,-a", a.answer, "Use this base answer and skip answering");
  detect_cmd->add_option("--id", a.question_id, "Question id for the trace");

  auto* run_cmd = app.add_subcommand("run", "Score every question of a dataset");
  run_cmd->add_option("--method", a.method, "metaqa, baseline or both")
      ->check(CLI::IsMember({"metaqa", "baseline", "both"}));
  run_cmd->add_option("--sample_k,--sample-k", a.sample_k, "Score a seeded subset of k records");
  run_cmd->add_option("--sample_fraction,--sample-fraction", a.sample_fraction,
                      "Score a seeded subset of this fraction of records");
  run_cmd->add_option("--category", a.categories, "Keep only these categories");

  auto* label_cmd = app.add_subcommand("label", "Label base answers against references");
  label_cmd->add_option("--run", a.run_path, "Run file")->required();

  auto* review_cmd = app.add_subcommand("review", "Manual review of uncertain labels");
  review_cmd->require_subcommand(1);
  auto* export_cmd = review_cmd->add_subcommand("export", "Write the review queue");
  export_cmd->add_option("--labels", a.labels_path, "Label file")->required();
  export_cmd->add_option("--run", a.run_path, "Run file")->required();
  export_cmd->add_option("--queue", a.queue_path, "Queue file to write");
  auto* import_cmd = review_cmd->add_subcommand("import", "Apply a filled-in review queue");
  import_cmd->add_option("--labels", a.labels_path, "Label file")->required();
  import_cmd->add_option("--queue", a.queue_path, "Filled-in queue")->required();
  import_cmd->add_option("--labels_out,--labels-out", a.labels_out,
                         "Where to write labels (default: --labels)");

  auto add_eval_inputs = [&](CLI::App* cmd) {
    cmd->add_option("--run", a.run_path, "Run file");
    cmd->add_option("--labels", a.labels_path, "Final label file");
    cmd->add_option("--method", a.method, "metaqa or baseline")
        ->check(CLI::IsMember({"metaqa", "baseline"}));
    cmd->add_flag("--exclude_degraded,--exclude-degraded", a.exclude_degraded,
                  "Leave degraded traces out");
  };
  auto* eval_cmd = app.add_subcommand("eval", "Precision, recall and F1 at the threshold");
  add_eval_inputs(eval_cmd);
  auto* sweep_cmd = app.add_subcommand("sweep", "Metrics across a threshold grid");
  add_eval_inputs(sweep_cmd);
  sweep_cmd->add_option("--grid", a.grid, "a:b:step or comma list");

  auto* report_cmd = app.add_subcommand("report", "Tables for plots and cost analysis");
  add_eval_inputs(report_cmd);
  report_cmd->add_option("--grid", a.grid, "Threshold grid for --stability");
  report_cmd->add_option("--heatmap", a.heatmap_cells, "model:dataset:labels_path cell");
  report_cmd->add_flag("--categories", a.categories_report, "Per-category breakdown");
  report_cmd->add_option("--stability", a.stability_runs, "Repeated run files");
  report_cmd->add_flag("--sensitivity", a.sensitivity, "Mutation-count sensitivity");
  report_cmd->add_option("--k_grid,--k-grid", a.k_grid, "Mutation counts for --sensitivity");
  report_cmd->add_flag("--triples", a.triples, "Per-dataset precision/recall/F1 rows");
  report_cmd->add_option("--f1_check,--f1-check", a.f1_check, "Check F1 of reference triples");
  report_cmd->add_option("--usage", a.usage_file, "Token-cost table from a usage summary");

  auto* cache_cmd = app.add_subcommand("cache", "Inspect or clear the response cache");
  cache_cmd->require_subcommand(1);
  auto* stats_cmd = cache_cmd->add_subcommand("stats", "Entry count and size");
  auto* clear_cmd = cache_cmd->add_subcommand("clear", "Remove every entry");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }
  a.have_answer = detect_cmd->count("--answer") > 0;

  try {
    try {
      cfg.threshold = Threshold::parse(a.threshold_text);
    } catch (const Error&) {
      throw Error(ErrorCode::InvalidConfig,
                  "threshold must be a decimal in [0, 1], got '" + a.threshold_text + "'");
    }
    cfg.validate();
  } catch (const Error& e) {
    err << "error: invalid configuration: " << e.what() << '\n';
    return kExitUsage;
  }

  try {
    if (detect_cmd->parsed()) return cmd_detect(a, out, env);
    if (run_cmd->parsed()) return cmd_run(a, out, env);
    if (label_cmd->parsed()) return cmd_label(a, out, env);
    if (export_cmd->parsed()) return cmd_review_export(a, out);
    if (import_cmd->parsed()) return cmd_review_import(a, out);
    if (eval_cmd->parsed()) return cmd_eval(a, out);
    if (sweep_cmd->parsed()) return cmd_sweep(a, out);
    if (report_cmd->parsed()) return cmd_report(a, out);
    if (stats_cmd->parsed()) return cmd_cache(a, false, out);
    if (clear_cmd->parsed()) return cmd_cache(a, true, out);
  } catch (const Refusal& r) {
    err << "error: " << r.what() << '\n';
    return r.code;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    if (const auto hint = hint_for(e.code()); !hint.empty()) err << "hint: " << hint << '\n';
    return e.code() == ErrorCode::InvalidConfig ? kExitUsage : kExitFailure;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitUsage;
}

int run_cli(int argc, char** argv, std::ostream& out, std::ostream& err) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run_cli(args, out, err);
}

}  // namespace metaqa
