#pragma once

#include <filesystem>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "metaqa/baseline.hpp"
#include "metaqa/dataset.hpp"
#include "metaqa/pipeline.hpp"

namespace metaqa {

inline constexpr std::string_view kRunSchema = "metaqa-run/1";

enum class Method { MetaQA, Baseline, Both };

std::string_view to_string(Method method) noexcept;
std::optional<Method> method_from_string(std::string_view name) noexcept;

using RunRecord = std::variant<DetectionTrace, ConsistencyTrace>;

struct RunOptions {
  Method method = Method::MetaQA;
  DetectorOptions detector;
  BaselineOptions baseline;
  int workers = 4;  ///< questions processed concurrently
};

struct RunSummary {
  std::int64_t questions = 0;
  std::int64_t records = 0;
  std::int64_t degraded = 0;
  std::int64_t unscored = 0;
};

/// Processes every record; output order follows input order, MetaQA record
/// before baseline record for each question. Per-question failures produce
/// degraded, unscored records instead of aborting the run.
std::vector<RunRecord> run_dataset(const std::vector<QaRecord>& records, Gateway& gateway,
                                   const PromptCatalog& catalog, const RunOptions& options);

RunSummary summarize(const std::vector<RunRecord>& records);

/// Header line then one JSON object per record.
std::string serialize_run(const nlohmann::json& config, const std::vector<RunRecord>& records);

struct RunFile {
  nlohmann::json header;
  std::vector<DetectionTrace> detection;
  std::vector<ConsistencyTrace> baseline;
};

RunFile parse_run(std::string_view text);
RunFile load_run(const std::filesystem::path& path);

}  // namespace metaqa
