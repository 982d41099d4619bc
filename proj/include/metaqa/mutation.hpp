#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "metaqa/usage.hpp"

namespace metaqa {

class Gateway;
class PromptCatalog;

enum class Relation { Synonymy, Antonymy };

std::string_view to_string(Relation relation) noexcept;
std::optional<Relation> relation_from_string(std::string_view name) noexcept;

enum class MutationFlag : std::uint8_t {
  SuspectDoubleNegation = 1U << 0U,
  DuplicateOfBase = 1U << 1U,
  NearDuplicate = 1U << 2U,
};

std::string_view to_string(MutationFlag flag) noexcept;

/// Set of MutationFlag values. Flags can be added but never cleared.
class MutationFlags {
 public:
  void set(MutationFlag flag) noexcept { bits_ |= static_cast<std::uint8_t>(flag); }
  [[nodiscard]] bool has(MutationFlag flag) const noexcept {
    return (bits_ & static_cast<std::uint8_t>(flag)) != 0;
  }
  [[nodiscard]] bool empty() const noexcept { return bits_ == 0; }
  [[nodiscard]] std::vector<std::string> names() const;
  static MutationFlags from_names(const std::vector<std::string>& names);

  friend bool operator==(const MutationFlags&, const MutationFlags&) = default;

 private:
  std::uint8_t bits_ = 0;
};

struct Mutation {
  std::string text;
  Relation relation = Relation::Synonymy;
  int index = 0;  ///< 0-based position within its relation batch
  MutationFlags flags;

  friend bool operator==(const Mutation&, const Mutation&) = default;
};

/// Normalized edit distance below which a mutation counts as a near copy of the base.
inline constexpr double kNearDuplicateDistance = 0.1;

/// Cleans one batch of generated items: trims whitespace and wrapping quotes,
/// drops empties and exact repeats, flags copies of the base (dropping them
/// for Antonymy) and flags near-copies of the base. Indices are reassigned
/// in order.
std::vector<Mutation> sanitize(const std::vector<std::string>& raw_items, std::string_view base,
                               Relation relation);

/// Count of negation markers in `text`, with un-prefixed words counted only
/// when their stem occurs in `base`, and complementary percentages (p vs
/// 100-p) against `base` counted as an implicit negation.
int negation_markers(std::string_view text, std::string_view base);

/// Largest number of negation markers inside a single clause of `text`.
int max_clause_negations(std::string_view text, std::string_view base);

/// Sets SuspectDoubleNegation on an antonym mutation whose extra negations
/// relative to the base are even and at least two, or that packs two or
/// more negations into one clause. Reporting only; scores are unaffected.
Mutation flag_double_negation(Mutation mutation, std::string_view base);

struct ModelSettings {
  std::string model_id = "gpt-3.5-turbo-0125";
  double temperature = 0.1;
  int answer_max_tokens = 512;
  int verdict_max_tokens = 16;
};

struct MutationBatch {
  Relation relation = Relation::Synonymy;
  std::vector<Mutation> mutations;
  bool shortfall = false;  ///< fewer than requested after one regeneration
  TokenUsage usage;
};

/// One generation call for the relation's template (plus at most one
/// regeneration on shortfall). Returns exactly n mutations unless shortfall.
MutationBatch generate_mutations(std::string_view question, std::string_view base,
                                 Relation relation, int n, Gateway& gateway,
                                 const PromptCatalog& catalog, const ModelSettings& settings);

}  // namespace metaqa
