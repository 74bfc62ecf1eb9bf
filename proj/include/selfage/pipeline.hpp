#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "selfage/classify.hpp"
#include "selfage/corpus.hpp"
#include "selfage/error.hpp"

namespace selfage {

// Failure inside run_pipeline; stage is one of ingest, retrieve, classify,
// extract, write.
class PipelineError : public Error {
 public:
  PipelineError(std::string stage, const std::string& what)
      : Error("[" + stage + "] " + what), stage_(std::move(stage)) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

struct PipelineConfig {
  std::vector<std::filesystem::path> inputs;
  // Guessed from each file's extension when unset.
  std::optional<PostFormat> format;
  // Shipped defaults when unset.
  std::optional<std::filesystem::path> patterns_path;
  std::optional<std::filesystem::path> rules_path;
  // Exactly one of these, unless a classifier factory is passed to run_pipeline.
  std::optional<std::filesystem::path> model_path;
  std::optional<std::string> plugin_command;
  std::chrono::milliseconds plugin_timeout{30000};
  int plugin_retries = 2;
  std::filesystem::path output_dir;
  int parallelism = 1;
  std::size_t batch_size = 4096;
  std::uint64_t seed = 0;
};

// Counts for one run. to_json also reports each count as a fraction of the
// stage before it; user counts are taken against users_scanned.
struct PipelineReport {
  std::size_t posts_scanned = 0;
  std::size_t users_scanned = 0;
  std::size_t retweets_dropped = 0;
  std::size_t reported_speech_dropped = 0;
  std::size_t candidates_matched = 0;
  std::size_t users_matched = 0;
  std::size_t age_classified = 0;
  std::size_t ages_extracted = 0;
  std::size_t users_with_age = 0;
  std::string classifier;

  friend bool operator==(const PipelineReport&, const PipelineReport&) = default;
};

nlohmann::json to_json(const PipelineReport& report);

struct DatedExtraction {
  std::string user_id;
  std::string post_id;
  Timestamp created_at{};
  int age = 0;
  std::string rule_id;
};

// Non-normative recency policy: latest_age comes from the newest post, ties
// going to the larger age.
struct UserAgeRecord {
  std::string user_id;
  std::vector<DatedExtraction> extractions;
  int latest_age = 0;
};

// Throws ValidationError when empty or when user ids differ.
UserAgeRecord rollup_user(std::span<const DatedExtraction> extractions);
nlohmann::ordered_json to_json(const UserAgeRecord& record);

// Called once per worker; each worker owns its classifier.
using ClassifierFactory = std::function<std::unique_ptr<Classifier>()>;

ClassifierFactory make_classifier_factory(const PipelineConfig& config);

// Writes posts.jsonl (one record per retrieved candidate), users.jsonl and
// report.json into output_dir. Files are written with a .partial suffix and
// renamed only after the whole run succeeds. Throws PipelineError.
PipelineReport run_pipeline(const PipelineConfig& config);
PipelineReport run_pipeline(const PipelineConfig& config, const ClassifierFactory& factory);

}  // namespace selfage
