#pragma once

#include <atomic>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>
#include <nlohmann/json.hpp>
#include <unistd.h>

#include "metaqa/dataset.hpp"
#include "metaqa/mock_backend.hpp"

namespace metaqa::testing {

struct TempDir {
  std::filesystem::path path;
  TempDir() {
    static std::atomic<int> counter{0};
    path = std::filesystem::temp_directory_path() /
           fmt::format("metaqa-{}-{}", ::getpid(), counter++);
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  [[nodiscard]] std::string file(const std::string& name) const { return (path / name).string(); }
};

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
}

inline std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

/// A seeded synthetic benchmark: records plus a mock script that answers
/// every call the pipeline, the baseline and the labeler make for them.
struct Synthetic {
  std::vector<QaRecord> records;
  std::vector<MockEntry> script;

  [[nodiscard]] std::string script_jsonl() const {
    std::string out;
    for (const auto& e : script) out += nlohmann::json(e).dump() + "\n";
    return out;
  }
};

inline Synthetic make_synthetic(int questions, std::uint64_t seed, int mutations = 5,
                                int samples = 10) {
  static const char* kVerdicts[] = {"Yes", "No", "Not Sure"};
  static const char* kCategories[] = {"Law", "Health", "Misconceptions"};
  static const char* kSources[] = {"TruthfulQAEnhanced", "HotpotQA", "FreshQA"};
  std::mt19937_64 rng(seed);
  Synthetic s;
  auto entry = [](RequestTag tag, std::string contains, std::string response) {
    MockEntry e;
    e.tag = tag;
    e.contains = std::move(contains);
    e.response = std::move(response);
    return e;
  };
  for (int i = 0; i < questions; ++i) {
    const auto id = fmt::format("s{:03d}", i);
    const auto marker = "[" + id + "]";
    QaRecord r;
    r.id = id;
    r.question = fmt::format("Which value does item {} hold? {}", i, marker);
    r.correct_answers = {fmt::format("Item {} holds value {}.", i, i * 7 % 13)};
    r.category = kCategories[i % 3];
    r.source = *dataset_source_from_string(kSources[(i / 3) % 3]);
    s.records.push_back(r);

    // a hallucination-prone item leans towards contradicting verdicts
    const bool prone = rng() % 3 == 0;
    const auto base = fmt::format("Item {} holds value {}.", i, prone ? 99 : i * 7 % 13);
    s.script.push_back(entry(RequestTag::ConciseQa, marker, base));

    std::string syn_list, ant_list;
    for (int j = 1; j <= mutations; ++j) {
      const auto syn = fmt::format("The value held by item {} is {} (variant {}).", i,
                                   prone ? 99 : i * 7 % 13, j);
      const auto ant = fmt::format("Item {} does not hold that value (variant {}).", i, j);
      syn_list += fmt::format("{}. {}\n", j, syn);
      ant_list += fmt::format("{}. {}\n", j, ant);
      const auto pick = [&](bool lean_yes) {
        const auto roll = rng() % 10;
        if (roll < 2) return kVerdicts[2];
        return (roll < 7) == lean_yes ? kVerdicts[0] : kVerdicts[1];
      };
      s.script.push_back(entry(RequestTag::VerifySynonym, syn, pick(!prone)));
      s.script.push_back(entry(RequestTag::VerifyAntonym, ant, pick(prone)));
    }
    s.script.push_back(entry(RequestTag::MutationSynonym, marker, syn_list));
    s.script.push_back(entry(RequestTag::MutationAntonym, marker, ant_list));

    for (int k = 1; k <= samples; ++k) {
      auto e = entry(RequestTag::BaselineSample, marker,
                     fmt::format("Item {} holds value {} (sample {}).", i,
                                 rng() % 4 == 0 ? 99 : i * 7 % 13, k));
      e.nonce = static_cast<std::uint32_t>(k);
      s.script.push_back(e);
      s.script.push_back(entry(RequestTag::BaselineCheck,
                               fmt::format("(sample {}).\nSentence: {}", k, base),
                               kVerdicts[rng() % 3]));
    }
    s.script.push_back(entry(RequestTag::LabelValidate, marker, prone ? "No" : "Yes"));
  }
  return s;
}

}  // namespace metaqa::testing
