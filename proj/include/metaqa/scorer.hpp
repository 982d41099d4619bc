#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "metaqa/prompts.hpp"
#include "metaqa/usage.hpp"
#include "metaqa/verifier.hpp"

namespace metaqa {

/// Exact non-negative rational score. Every score here is a multiple of one
/// half divided by a count, so integer arithmetic never loses precision.
class Score {
 public:
  constexpr Score() = default;
  Score(std::int64_t numerator, std::int64_t denominator);

  [[nodiscard]] std::int64_t numerator() const noexcept { return num_; }
  [[nodiscard]] std::int64_t denominator() const noexcept { return den_; }
  [[nodiscard]] double value() const noexcept {
    return static_cast<double>(num_) / static_cast<double>(den_);
  }
  /// Four decimal places, rounded half up.
  [[nodiscard]] std::string to_string() const;

  friend bool operator==(const Score& a, const Score& b) noexcept {
    return a.num_ * b.den_ == b.num_ * a.den_;
  }
  friend std::strong_ordering operator<=>(const Score& a, const Score& b) noexcept {
    return a.num_ * b.den_ <=> b.num_ * a.den_;
  }

 private:
  std::int64_t num_ = 0;
  std::int64_t den_ = 1;
};

/// Decision threshold in [0, 1], held exactly in units of 1e-4.
class Threshold {
 public:
  static constexpr std::int64_t kScale = 10000;

  constexpr Threshold() = default;
  /// Rounds to four decimals; throws InvalidThreshold outside [0, 1].
  static Threshold from_double(double value);
  /// Accepts plain decimals such as "0.5" or "0.55"; at most four decimals.
  static Threshold parse(std::string_view text);
  static Threshold from_units(std::int64_t units);

  [[nodiscard]] std::int64_t units() const noexcept { return units_; }
  [[nodiscard]] double value() const noexcept {
    return static_cast<double>(units_) / static_cast<double>(kScale);
  }
  [[nodiscard]] std::string to_string() const;

  friend auto operator<=>(const Threshold&, const Threshold&) = default;

 private:
  std::int64_t units_ = 5000;
};

/// Yes 0, No 1, NotSure 0.5, as halves: 0, 2, 1.
int syn_score_halves(VerdictValue v) noexcept;
/// Yes 1, No 0, NotSure 0.5, as halves: 2, 0, 1.
int ant_score_halves(VerdictValue v) noexcept;
double syn_score(VerdictValue v) noexcept;
double ant_score(VerdictValue v) noexcept;

/// Mean per-mutation score over both lists. Throws EmptyVerdicts when both are empty.
Score hallucination_score(std::span<const VerdictValue> syn, std::span<const VerdictValue> ant);

/// Hallucination when score >= threshold, compared exactly.
bool classify(const Score& score, const Threshold& threshold) noexcept;

/// Per-question record of one detection run.
struct DetectionTrace {
  std::string question_id;
  std::string question;
  std::string base_response;
  std::vector<VerifiedMutation> verified;  ///< synonyms first, then antonyms, generation order
  int syn_count = 0;
  int ant_count = 0;
  std::optional<Score> score;  ///< empty when nothing could be scored
  Threshold threshold;
  bool classified_hallucination = false;
  bool degraded = false;
  bool shortfall = false;
  TokenUsage usage;

  [[nodiscard]] std::vector<VerdictValue> syn_verdicts() const;
  [[nodiscard]] std::vector<VerdictValue> ant_verdicts() const;
};

void to_json(nlohmann::json& j, const DetectionTrace& trace);
void from_json(const nlohmann::json& j, DetectionTrace& trace);
void to_json(nlohmann::json& j, const Score& score);

/// Scores the verified mutations and fills score / classification fields.
void score_trace(DetectionTrace& trace);

}  // namespace metaqa
