#include "metaqa/run.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <spdlog/spdlog.h>

#include "metaqa/error.hpp"
#include "metaqa/parallel.hpp"
#include "metaqa/text.hpp"

namespace metaqa {

using nlohmann::json;

std::string_view to_string(Method method) noexcept {
  switch (method) {
    case Method::MetaQA: return "metaqa";
    case Method::Baseline: return "baseline";
    case Method::Both: return "both";
  }
  return "metaqa";
}

std::optional<Method> method_from_string(std::string_view name) noexcept {
  for (auto m : {Method::MetaQA, Method::Baseline, Method::Both}) {
    if (to_string(m) == name) return m;
  }
  return std::nullopt;
}

namespace {

std::vector<RunRecord> process(const QaRecord& record, Gateway& gateway,
                               const PromptCatalog& catalog, const RunOptions& options) {
  std::vector<RunRecord> out;
  const bool want_metaqa = options.method != Method::Baseline;
  const bool want_baseline = options.method != Method::MetaQA;

  std::string base;
  DetectionTrace detection;
  detection.question_id = record.id;
  detection.question = record.question;
  detection.threshold = options.detector.threshold;
  bool base_failed = false;
  try {
    if (want_metaqa) {
      detection = detect(record.id, record.question, std::nullopt, gateway, catalog,
                         options.detector);
      base = detection.base_response;
    } else {
      base = concise_answer(record.question, gateway, catalog, options.detector.answer_model);
      if (base.empty()) throw Error(ErrorCode::MalformedResponse, "empty base response");
    }
  } catch (const Error& e) {
    spdlog::warn("question {} failed: {}", record.id, e.what());
    base_failed = true;
    detection.degraded = true;
  }
  if (want_metaqa) out.emplace_back(std::move(detection));

  if (want_baseline) {
    ConsistencyTrace trace;
    trace.question_id = record.id;
    trace.threshold = options.baseline.threshold;
    if (base_failed) {
      trace.degraded = true;
    } else {
      try {
        trace = run_baseline(record.id, record.question, base, gateway, catalog,
                             options.baseline);
      } catch (const Error& e) {
        spdlog::warn("baseline for {} failed: {}", record.id, e.what());
        trace.base_response = base;
        trace.degraded = true;
      }
    }
    out.emplace_back(std::move(trace));
  }
  return out;
}

}  // namespace

std::vector<RunRecord> run_dataset(const std::vector<QaRecord>& records, Gateway& gateway,
                                   const PromptCatalog& catalog, const RunOptions& options) {
  std::vector<std::vector<RunRecord>> per_question(records.size());
  parallel_for(records.size(), options.workers, [&](std::size_t i) {
    per_question[i] = process(records[i], gateway, catalog, options);
  });
  std::vector<RunRecord> out;
  for (auto& group : per_question) {
    for (auto& r : group) out.push_back(std::move(r));
  }
  return out;
}

RunSummary summarize(const std::vector<RunRecord>& records) {
  RunSummary s;
  std::set<std::string> ids;
  for (const auto& r : records) {
    std::visit(
        [&](const auto& trace) {
          ids.insert(trace.question_id);
          ++s.records;
          if (trace.degraded) ++s.degraded;
          if (!trace.score) ++s.unscored;
        },
        r);
  }
  s.questions = static_cast<std::int64_t>(ids.size());
  return s;
}

std::string serialize_run(const json& config, const std::vector<RunRecord>& records) {
  std::string out = json{{"schema", kRunSchema}, {"config", config}}.dump();
  out += '\n';
  for (const auto& r : records) {
    std::visit([&](const auto& trace) { out += json(trace).dump(); }, r);
    out += '\n';
  }
  return out;
}

RunFile parse_run(std::string_view text) {
  RunFile file;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw Error(ErrorCode::ParseError, "run line " + std::to_string(line_no) + ": " + e.what());
    }
    if (!have_header) {
      if (j.value("schema", "") != kRunSchema) {
        throw Error(ErrorCode::ParseError, "run file lacks a " + std::string(kRunSchema) +
                                               " header line");
      }
      file.header = std::move(j);
      have_header = true;
      continue;
    }
    try {
      const auto method = j.at("method").get<std::string>();
      if (method == "metaqa") {
        file.detection.push_back(j.get<DetectionTrace>());
      } else if (method == "baseline") {
        file.baseline.push_back(j.get<ConsistencyTrace>());
      } else {
        throw Error(ErrorCode::ParseError, "unknown method '" + method + "'");
      }
    } catch (const Error& e) {
      throw Error(ErrorCode::ParseError, "run line " + std::to_string(line_no) + ": " + e.what());
    } catch (const json::exception& e) {
      throw Error(ErrorCode::ParseError, "run line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (!have_header) throw Error(ErrorCode::ParseError, "empty run file");
  return file;
}

RunFile load_run(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open run file " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_run(buffer.str());
}

}  // namespace metaqa
