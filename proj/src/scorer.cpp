#include "metaqa/scorer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "metaqa/error.hpp"

namespace metaqa {

using nlohmann::json;

Score::Score(std::int64_t numerator, std::int64_t denominator) {
  if (denominator <= 0 || numerator < 0) {
    throw Error(ErrorCode::InvalidRequest, "score must be a non-negative fraction");
  }
  const auto g = std::gcd(numerator, denominator);
  num_ = numerator / g;
  den_ = denominator / g;
}

std::string Score::to_string() const {
  const std::int64_t scaled = (num_ * 20000 + den_) / (2 * den_);
  return fmt::format("{}.{:04d}", scaled / 10000, scaled % 10000);
}

Threshold Threshold::from_double(double value) {
  if (!std::isfinite(value) || value < 0.0 || value > 1.0) {
    throw Error(ErrorCode::InvalidThreshold, fmt::format("threshold {} outside [0, 1]", value));
  }
  return from_units(std::llround(value * static_cast<double>(kScale)));
}

Threshold Threshold::from_units(std::int64_t units) {
  if (units < 0 || units > kScale) {
    throw Error(ErrorCode::InvalidThreshold, fmt::format("threshold units {} outside [0, {}]",
                                                         units, kScale));
  }
  Threshold t;
  t.units_ = units;
  return t;
}

Threshold Threshold::parse(std::string_view text) {
  auto fail = [&] {
    return Error(ErrorCode::InvalidThreshold, "cannot read threshold '" + std::string(text) + "'");
  };
  if (text.empty()) throw fail();
  std::int64_t whole = 0;
  std::size_t i = 0;
  for (; i < text.size() && text[i] != '.'; ++i) {
    if (text[i] < '0' || text[i] > '9' || i > 3) throw fail();
    whole = whole * 10 + (text[i] - '0');
  }
  std::int64_t fraction = 0;
  int digits = 0;
  if (i < text.size()) {
    for (++i; i < text.size(); ++i, ++digits) {
      if (text[i] < '0' || text[i] > '9' || digits >= 4) throw fail();
      fraction = fraction * 10 + (text[i] - '0');
    }
  }
  for (; digits < 4; ++digits) fraction *= 10;
  return from_units(whole * kScale + fraction);
}

std::string Threshold::to_string() const {
  return fmt::format("{}.{:04d}", units_ / kScale, units_ % kScale);
}

int syn_score_halves(VerdictValue v) noexcept {
  switch (v) {
    case VerdictValue::Yes: return 0;
    case VerdictValue::No: return 2;
    case VerdictValue::NotSure: return 1;
  }
  return 1;
}

int ant_score_halves(VerdictValue v) noexcept {
  switch (v) {
    case VerdictValue::Yes: return 2;
    case VerdictValue::No: return 0;
    case VerdictValue::NotSure: return 1;
  }
  return 1;
}

double syn_score(VerdictValue v) noexcept { return syn_score_halves(v) / 2.0; }
double ant_score(VerdictValue v) noexcept { return ant_score_halves(v) / 2.0; }

Score hallucination_score(std::span<const VerdictValue> syn, std::span<const VerdictValue> ant) {
  const auto count = static_cast<std::int64_t>(syn.size() + ant.size());
  if (count == 0) throw Error(ErrorCode::EmptyVerdicts, "no verdicts to score");
  std::int64_t halves = 0;
  for (auto v : syn) halves += syn_score_halves(v);
  for (auto v : ant) halves += ant_score_halves(v);
  return {halves, 2 * count};
}

bool classify(const Score& score, const Threshold& threshold) noexcept {
  return score.numerator() * Threshold::kScale >= threshold.units() * score.denominator();
}

std::vector<VerdictValue> DetectionTrace::syn_verdicts() const {
  std::vector<VerdictValue> out;
  for (const auto& v : verified) {
    if (v.mutation.relation == Relation::Synonymy) out.push_back(v.verdict.value);
  }
  return out;
}

std::vector<VerdictValue> DetectionTrace::ant_verdicts() const {
  std::vector<VerdictValue> out;
  for (const auto& v : verified) {
    if (v.mutation.relation == Relation::Antonymy) out.push_back(v.verdict.value);
  }
  return out;
}

void score_trace(DetectionTrace& trace) {
  const auto syn = trace.syn_verdicts();
  const auto ant = trace.ant_verdicts();
  trace.syn_count = static_cast<int>(syn.size());
  trace.ant_count = static_cast<int>(ant.size());
  trace.degraded = trace.degraded || std::any_of(trace.verified.begin(), trace.verified.end(),
                                                 [](const auto& v) { return v.degraded; });
  if (syn.empty() && ant.empty()) {
    trace.score.reset();
    trace.classified_hallucination = false;
    return;
  }
  trace.score = hallucination_score(syn, ant);
  trace.classified_hallucination = classify(*trace.score, trace.threshold);
}

void to_json(json& j, const Score& score) {
  j = json::array({score.numerator(), score.denominator()});
}

void to_json(json& j, const DetectionTrace& trace) {
  json mutations = json::array();
  for (const auto& v : trace.verified) {
    mutations.push_back({{"relation", to_string(v.mutation.relation)},
                         {"index", v.mutation.index},
                         {"text", v.mutation.text},
                         {"flags", v.mutation.flags.names()},
                         {"verdict", to_string(v.verdict.value)},
                         {"verdict_raw", v.verdict.raw_text},
                         {"verdict_parsed", v.verdict.parsed},
                         {"degraded", v.degraded},
                         {"usage", v.usage}});
  }
  j = json{{"method", "metaqa"},
           {"question_id", trace.question_id},
           {"question", trace.question},
           {"base_response", trace.base_response},
           {"mutations", mutations},
           {"syn_count", trace.syn_count},
           {"ant_count", trace.ant_count},
           {"score", trace.score ? json(trace.score->to_string()) : json(nullptr)},
           {"score_exact", trace.score ? json(*trace.score) : json(nullptr)},
           {"threshold", trace.threshold.to_string()},
           {"classified_hallucination", trace.classified_hallucination},
           {"degraded", trace.degraded},
           {"shortfall", trace.shortfall},
           {"usage", trace.usage}};
}

void from_json(const json& j, DetectionTrace& trace) {
  trace = {};
  trace.question_id = j.at("question_id").get<std::string>();
  trace.question = j.value("question", "");
  trace.base_response = j.value("base_response", "");
  for (const auto& m : j.at("mutations")) {
    VerifiedMutation v;
    const auto relation = relation_from_string(m.at("relation").get<std::string>());
    if (!relation) throw Error(ErrorCode::ParseError, "unknown relation in trace");
    v.mutation.relation = *relation;
    v.mutation.index = m.value("index", 0);
    v.mutation.text = m.at("text").get<std::string>();
    v.mutation.flags =
        MutationFlags::from_names(m.value("flags", std::vector<std::string>{}));
    const auto verdict = verdict_from_string(m.at("verdict").get<std::string>());
    if (!verdict) throw Error(ErrorCode::ParseError, "unknown verdict in trace");
    v.verdict = {*verdict, m.value("verdict_raw", ""), m.value("verdict_parsed", true)};
    v.degraded = m.value("degraded", false);
    if (m.contains("usage")) v.usage = m.at("usage").get<TokenUsage>();
    trace.verified.push_back(std::move(v));
  }
  trace.threshold = Threshold::parse(j.at("threshold").get<std::string>());
  trace.degraded = j.value("degraded", false);
  trace.shortfall = j.value("shortfall", false);
  if (j.contains("usage")) trace.usage = j.at("usage").get<TokenUsage>();
  score_trace(trace);
  const auto& exact = j.at("score_exact");
  if (!exact.is_null() &&
      (!trace.score || Score(exact.at(0).get<std::int64_t>(), exact.at(1).get<std::int64_t>()) !=
                           *trace.score)) {
    throw Error(ErrorCode::ParseError,
                "trace " + trace.question_id + " score disagrees with its verdicts");
  }
}

}  // namespace metaqa
