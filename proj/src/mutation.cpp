#include "metaqa/mutation.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <set>

#include "metaqa/error.hpp"
#include "metaqa/gateway.hpp"
#include "metaqa/prompts.hpp"
#include "metaqa/text.hpp"

namespace metaqa {

namespace {

constexpr std::array<std::string_view, 11> kNegationWords{
    "not", "no", "never", "none", "nobody", "nothing", "neither", "nor", "nowhere", "cannot",
    "unused"};

constexpr std::array<std::string_view, 7> kClauseBreakWords{
    "but", "and", "while", "although", "though", "whereas", "because"};

// Crude suffix stripping so that "used"/"use" or "popular"/"popularity" share a stem.
std::string stem(std::string_view word) {
  for (std::string_view suffix : {"ing", "ity", "ed", "es", "s", "e", "d"}) {
    if (word.size() >= suffix.size() + 3 && word.ends_with(suffix)) {
      return std::string(word.substr(0, word.size() - suffix.size()));
    }
  }
  return std::string(word);
}

std::optional<int> percentage(std::string_view word) {
  if (!word.ends_with('%')) return std::nullopt;
  int value = 0;
  const auto digits = word.substr(0, word.size() - 1);
  auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), value);
  if (ec != std::errc{} || ptr != digits.data() + digits.size()) return std::nullopt;
  return value;
}

struct BaseProfile {
  std::set<std::string> stems;
  std::set<int> percentages;
};

BaseProfile profile(std::string_view base) {
  BaseProfile p;
  for (const auto& w : lowercase_words(base)) {
    p.stems.insert(stem(w));
    if (auto pct = percentage(w)) p.percentages.insert(*pct);
  }
  return p;
}

bool is_marker(const std::string& word, const BaseProfile& base) {
  if (std::find(kNegationWords.begin(), kNegationWords.end(), word) != kNegationWords.end()) {
    return true;
  }
  if (word.ends_with("n't")) return true;
  if (word.size() > 4 && word.starts_with("un") && base.stems.contains(stem(word.substr(2)))) {
    return true;
  }
  if (auto pct = percentage(word)) {
    // "90%" against a base stating "10%" restates the complement
    return *pct != 50 && base.percentages.contains(100 - *pct) &&
           !base.percentages.contains(*pct);
  }
  return false;
}

std::vector<std::string> clauses(std::string_view text) {
  std::vector<std::string> out;
  std::string current;
  for (char c : text) {
    if (c == ',' || c == ';' || c == ':' || c == '.' || c == '!' || c == '?') {
      out.push_back(std::move(current));
      current.clear();
    } else {
      current += c;
    }
  }
  out.push_back(std::move(current));
  return out;
}

}  // namespace

std::string_view to_string(Relation relation) noexcept {
  return relation == Relation::Synonymy ? "synonymy" : "antonymy";
}

std::optional<Relation> relation_from_string(std::string_view name) noexcept {
  if (name == "synonymy") return Relation::Synonymy;
  if (name == "antonymy") return Relation::Antonymy;
  return std::nullopt;
}

std::string_view to_string(MutationFlag flag) noexcept {
  switch (flag) {
    case MutationFlag::SuspectDoubleNegation: return "suspect_double_negation";
    case MutationFlag::DuplicateOfBase: return "duplicate_of_base";
    case MutationFlag::NearDuplicate: return "near_duplicate";
  }
  return "unknown";
}

std::vector<std::string> MutationFlags::names() const {
  std::vector<std::string> out;
  for (auto flag : {MutationFlag::SuspectDoubleNegation, MutationFlag::DuplicateOfBase,
                    MutationFlag::NearDuplicate}) {
    if (has(flag)) out.emplace_back(to_string(flag));
  }
  return out;
}

MutationFlags MutationFlags::from_names(const std::vector<std::string>& names) {
  MutationFlags flags;
  for (const auto& name : names) {
    for (auto flag : {MutationFlag::SuspectDoubleNegation, MutationFlag::DuplicateOfBase,
                      MutationFlag::NearDuplicate}) {
      if (name == to_string(flag)) flags.set(flag);
    }
  }
  return flags;
}

std::vector<Mutation> sanitize(const std::vector<std::string>& raw_items, std::string_view base,
                               Relation relation) {
  const auto clean_base = trim(base);
  std::vector<Mutation> out;
  std::set<std::string> seen;
  for (const auto& raw : raw_items) {
    auto text = strip_quotes(raw);
    if (text.empty() || !seen.insert(text).second) continue;

    Mutation m{text, relation, 0, {}};
    if (text == clean_base) {
      // an antonym cannot restate its source
      if (relation == Relation::Antonymy) continue;
      m.flags.set(MutationFlag::DuplicateOfBase);
    } else if (normalized_edit_distance(text, clean_base) < kNearDuplicateDistance) {
      m.flags.set(MutationFlag::NearDuplicate);
    }
    m.index = static_cast<int>(out.size());
    out.push_back(std::move(m));
  }
  return out;
}

int negation_markers(std::string_view text, std::string_view base) {
  const auto p = profile(base);
  int count = 0;
  for (const auto& w : lowercase_words(text)) {
    if (is_marker(w, p)) ++count;
  }
  return count;
}

int max_clause_negations(std::string_view text, std::string_view base) {
  const auto p = profile(base);
  int best = 0;
  for (const auto& clause : clauses(text)) {
    int count = 0;
    bool any_words = false;
    for (const auto& w : lowercase_words(clause)) {
      any_words = true;
      if (std::find(kClauseBreakWords.begin(), kClauseBreakWords.end(), w) !=
          kClauseBreakWords.end()) {
        best = std::max(best, count);
        count = 0;
        continue;
      }
      if (is_marker(w, p)) ++count;
    }
    if (any_words) best = std::max(best, count);
  }
  return best;
}

Mutation flag_double_negation(Mutation mutation, std::string_view base) {
  if (mutation.relation != Relation::Antonymy) return mutation;
  const int extra = negation_markers(mutation.text, base) - negation_markers(base, base);
  if ((extra >= 2 && extra % 2 == 0) || max_clause_negations(mutation.text, base) >= 2) {
    mutation.flags.set(MutationFlag::SuspectDoubleNegation);
  }
  return mutation;
}

MutationBatch generate_mutations(std::string_view question, std::string_view base,
                                 Relation relation, int n, Gateway& gateway,
                                 const PromptCatalog& catalog, const ModelSettings& settings) {
  if (n < 1) throw Error(ErrorCode::InvalidRequest, "mutation count must be at least 1");
  if (trim(base).empty()) throw Error(ErrorCode::InvalidRequest, "base response is empty");

  const bool synonym = relation == Relation::Synonymy;
  const auto prompt = catalog.render(synonym ? PromptStep::SynonymGen : PromptStep::AntonymGen,
                                     {{"question", std::string(question)},
                                      {"answer", std::string(base)},
                                      {"n", std::to_string(n)}});
  ChatRequest request{settings.model_id,
                      prompt.system,
                      prompt.user,
                      settings.temperature,
                      settings.answer_max_tokens,
                      synonym ? RequestTag::MutationSynonym : RequestTag::MutationAntonym,
                      0};

  MutationBatch batch;
  batch.relation = relation;
  std::vector<std::string> raw;
  auto ask = [&](std::uint32_t nonce) {
    request.nonce = nonce;
    const auto response = gateway.cached_complete(request);
    batch.usage += response.usage;
    try {
      auto items = parse_numbered_list(response.text);
      raw.insert(raw.end(), items.begin(), items.end());
    } catch (const Error& e) {
      if (e.code() != ErrorCode::NoItemsFound) throw;
    }
  };

  ask(0);
  auto mutations = sanitize(raw, base, relation);
  if (static_cast<int>(mutations.size()) < n) {
    ask(1);
    mutations = sanitize(raw, base, relation);
  }
  if (static_cast<int>(mutations.size()) > n) mutations.resize(static_cast<std::size_t>(n));
  batch.shortfall = static_cast<int>(mutations.size()) < n;
  if (!synonym) {
    for (auto& m : mutations) m = flag_double_negation(std::move(m), base);
  }
  batch.mutations = std::move(mutations);
  return batch;
}

}  // namespace metaqa
