#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "metaqa/gateway.hpp"
#include "metaqa/scorer.hpp"

namespace metaqa {

/// Effective settings for one command. Field names double as the keys of
/// the flat key=value config file and as the long flag names.
struct RunConfig {
  std::string model_id = "gpt-3.5-turbo-0125";
  std::string endpoint_url = "https://api.openai.com/v1/chat/completions";
  double temperature = 0.1;
  Threshold threshold;  // 0.5
  int syn_count = 5;
  int ant_count = 5;
  int baseline_k = 10;
  double baseline_temperature = 0.5;
  std::uint64_t seed = 42;
  std::string cache_dir = ".metaqa-cache";
  std::string prompt_catalog_path;  ///< empty: built-in catalog
  std::string dataset_path;
  std::string output_path;

  std::string backend = "live";  ///< live | mock
  std::string mock_script;
  std::string api_key_env = "METAQA_API_KEY";
  std::string verifier_model;  ///< empty: model_id
  std::string labeler_model;   ///< empty: model_id
  int workers = 4;
  int max_inflight = 4;
  bool no_cache = false;

  /// Throws Error{InvalidConfig} naming the first offending field.
  void validate() const;
  /// Everything except output_path, for output headers.
  [[nodiscard]] nlohmann::json echo() const;
};

/// Exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitNeedsReview = 3;

struct CliEnvironment {
  /// Replaces the backend the config would build (tests inject a mock here).
  std::shared_ptr<ChatBackend> backend;
};

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err,
            const CliEnvironment& env = {});
int run_cli(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace metaqa
