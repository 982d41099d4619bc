#include "metaqa/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>
#include <unordered_set>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "metaqa/error.hpp"
#include "metaqa/text.hpp"

namespace metaqa {

using nlohmann::json;

std::string_view to_string(DatasetSource source) noexcept {
  switch (source) {
    case DatasetSource::TruthfulQAEnhanced: return "TruthfulQAEnhanced";
    case DatasetSource::HotpotQA: return "HotpotQA";
    case DatasetSource::FreshQA: return "FreshQA";
    case DatasetSource::Custom: return "Custom";
  }
  return "Custom";
}

std::optional<DatasetSource> dataset_source_from_string(std::string_view name) noexcept {
  for (auto s : {DatasetSource::TruthfulQAEnhanced, DatasetSource::HotpotQA,
                 DatasetSource::FreshQA, DatasetSource::Custom}) {
    if (to_string(s) == name) return s;
  }
  return std::nullopt;
}

std::vector<std::string> QaRecord::references() const {
  std::vector<std::string> out;
  auto add = [&](const std::string& answer) {
    if (std::find(out.begin(), out.end(), answer) == out.end()) out.push_back(answer);
  };
  for (const auto& a : correct_answers) add(a);
  if (new_answers) {
    for (const auto& a : *new_answers) add(a);
  }
  return out;
}

void to_json(json& j, const QaRecord& r) {
  j = json{{"id", r.id}, {"question", r.question}};
  if (r.best_answer) j["best_answer"] = *r.best_answer;
  j["correct_answers"] = r.correct_answers;
  if (r.new_answers) j["new_answers"] = *r.new_answers;
  if (r.verification_url) j["verification_url"] = *r.verification_url;
  if (r.category) j["category"] = *r.category;
  j["source"] = to_string(r.source);
}

void from_json(const json& j, QaRecord& r) {
  r = {};
  r.id = j.at("id").get<std::string>();
  r.question = j.at("question").get<std::string>();
  if (j.contains("best_answer") && !j["best_answer"].is_null()) {
    r.best_answer = j["best_answer"].get<std::string>();
  }
  r.correct_answers = j.value("correct_answers", std::vector<std::string>{});
  if (j.contains("new_answers") && !j["new_answers"].is_null()) {
    r.new_answers = j["new_answers"].get<std::vector<std::string>>();
  }
  if (j.contains("verification_url") && !j["verification_url"].is_null()) {
    r.verification_url = j["verification_url"].get<std::string>();
  }
  if (j.contains("category") && !j["category"].is_null()) {
    r.category = j["category"].get<std::string>();
  }
  const auto source = j.value("source", std::string("Custom"));
  const auto parsed = dataset_source_from_string(source);
  if (!parsed) throw Error(ErrorCode::ParseError, "unknown source '" + source + "'");
  r.source = *parsed;
}

Dataset parse_dataset(std::string_view text) {
  Dataset dataset;
  std::unordered_set<std::string> ids;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    QaRecord record;
    try {
      record = json::parse(line).get<QaRecord>();
    } catch (const std::exception& e) {
      throw Error(ErrorCode::ParseError, "line " + std::to_string(line_no) + ": " + e.what());
    }
    if (trim(record.id).empty()) {
      throw Error(ErrorCode::ParseError, "line " + std::to_string(line_no) + ": empty id");
    }
    if (trim(record.question).empty()) {
      throw Error(ErrorCode::ParseError, "line " + std::to_string(line_no) + ": empty question");
    }
    if (!ids.insert(record.id).second) {
      throw Error(ErrorCode::DuplicateId,
                  "id '" + record.id + "' repeated at line " + std::to_string(line_no));
    }
    if (record.correct_answers.empty()) {
      spdlog::warn("record {} has no correct answers; skipped", record.id);
      ++dataset.skipped;
      continue;
    }
    dataset.records.push_back(std::move(record));
  }
  return dataset;
}

Dataset load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open dataset " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_dataset(buffer.str());
}

std::string serialize_dataset(const std::vector<QaRecord>& records) {
  std::string out;
  for (const auto& r : records) {
    out += json(r).dump();
    out += '\n';
  }
  return out;
}

std::vector<QaRecord> filter_by_category(const std::vector<QaRecord>& records,
                                         const std::set<std::string, std::less<>>& categories) {
  std::vector<QaRecord> out;
  for (const auto& r : records) {
    if (r.category && categories.contains(*r.category)) out.push_back(r);
  }
  return out;
}

std::vector<QaRecord> sample(const std::vector<QaRecord>& records, std::size_t k,
                             std::uint64_t seed) {
  if (k > records.size()) {
    throw Error(ErrorCode::SampleTooLarge, "cannot sample " + std::to_string(k) + " of " +
                                               std::to_string(records.size()) + " records");
  }
  // Partial Fisher-Yates on indices. Bounded draws use rejection sampling
  // on raw mt19937_64 output so the subset is identical on every platform.
  std::mt19937_64 rng(seed);
  auto bounded = [&rng](std::uint64_t bound) {
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % bound;
    std::uint64_t draw = 0;
    do {
      draw = rng();
    } while (draw >= limit);
    return draw % bound;
  };
  std::vector<std::size_t> index(records.size());
  std::iota(index.begin(), index.end(), std::size_t{0});
  for (std::size_t i = 0; i < k; ++i) {
    const auto j = i + static_cast<std::size_t>(bounded(index.size() - i));
    std::swap(index[i], index[j]);
  }
  index.resize(k);
  std::sort(index.begin(), index.end());
  std::vector<QaRecord> out;
  out.reserve(k);
  for (auto i : index) out.push_back(records[i]);
  return out;
}

std::size_t sample_size_for_fraction(std::size_t n, double fraction) {
  if (!(fraction >= 0.0 && fraction <= 1.0)) {
    throw Error(ErrorCode::InvalidRequest, "sampling fraction outside [0, 1]");
  }
  return static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
}

}  // namespace metaqa
