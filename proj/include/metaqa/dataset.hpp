#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace metaqa {

enum class DatasetSource { TruthfulQAEnhanced, HotpotQA, FreshQA, Custom };

std::string_view to_string(DatasetSource source) noexcept;
std::optional<DatasetSource> dataset_source_from_string(std::string_view name) noexcept;

struct QaRecord {
  std::string id;
  std::string question;
  std::optional<std::string> best_answer;
  std::vector<std::string> correct_answers;
  std::optional<std::vector<std::string>> new_answers;
  std::optional<std::string> verification_url;
  std::optional<std::string> category;
  DatasetSource source = DatasetSource::Custom;

  /// correct_answers followed by new_answers, first occurrence kept.
  [[nodiscard]] std::vector<std::string> references() const;

  friend bool operator==(const QaRecord&, const QaRecord&) = default;
};

void to_json(nlohmann::json& j, const QaRecord& record);
void from_json(const nlohmann::json& j, QaRecord& record);

struct Dataset {
  std::vector<QaRecord> records;
  /// Records dropped because they had no correct answers.
  std::int64_t skipped = 0;
};

/// Parses JSON Lines text. Blank lines are ignored. Throws ParseError with
/// the line number, or DuplicateId naming the repeated id.
Dataset parse_dataset(std::string_view text);
Dataset load_dataset(const std::filesystem::path& path);

/// One record per line, fields as in QaRecord; absent optionals omitted.
std::string serialize_dataset(const std::vector<QaRecord>& records);

/// Order-preserving subset with a category in `categories`.
std::vector<QaRecord> filter_by_category(const std::vector<QaRecord>& records,
                                         const std::set<std::string, std::less<>>& categories);

/// Deterministic k-subset without replacement for a seed, returned in input
/// order. Throws SampleTooLarge when k exceeds the record count.
std::vector<QaRecord> sample(const std::vector<QaRecord>& records, std::size_t k,
                             std::uint64_t seed);

/// k = round(fraction * n).
std::size_t sample_size_for_fraction(std::size_t n, double fraction);

}  // namespace metaqa
