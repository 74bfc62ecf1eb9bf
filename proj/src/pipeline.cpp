#include "selfage/pipeline.hpp"

#include <algorithm>
#include <exception>
#include <fstream>
#include <map>
#include <thread>
#include <unordered_set>

#include "selfage/extract.hpp"
#include "selfage/plugin_client.hpp"
#include "selfage/retrieval.hpp"

namespace selfage {

namespace {

using json = nlohmann::json;
namespace fs = std::filesystem;

double fraction_of(std::size_t part, std::size_t whole) {
  return whole == 0 ? 0.0 : static_cast<double>(part) / static_cast<double>(whole);
}

// Per-post outcome of one batch, filled by workers and merged in input order.
struct Slot {
  DropDecision drop = DropDecision::Keep;
  bool candidate = false;
  std::string pattern_id;
  Prediction prediction;
  std::optional<Extraction> extraction;
};

struct StageFailure {
  std::string stage;
  std::string what;
};

class OutputFile {
 public:
  OutputFile(const fs::path& dir, const std::string& name)
      : final_(dir / name), partial_(dir / (name + ".partial")), out_(partial_, std::ios::binary) {
    if (!out_) throw PipelineError("write", "cannot open " + partial_.string());
  }
  std::ofstream& stream() { return out_; }
  void commit() {
    out_.close();
    if (!out_) throw PipelineError("write", "failed writing " + partial_.string());
    std::error_code ec;
    fs::rename(partial_, final_, ec);
    if (ec) throw PipelineError("write", "cannot rename " + partial_.string() + ": " + ec.message());
  }

 private:
  fs::path final_;
  fs::path partial_;
  std::ofstream out_;
};

void process_range(std::span<const Post> posts, std::span<Slot> slots,
                   const CompiledPatternSet& matcher, const RuleCascade& cascade,
                   Classifier& classifier) {
  std::vector<Post> candidates;
  std::vector<std::size_t> where;
  for (std::size_t i = 0; i < posts.size(); ++i) {
    Slot& slot = slots[i];
    slot.drop = should_drop(posts[i]);
    if (slot.drop == DropDecision::Retweet) continue;
    const auto hits = match_candidates(posts[i], matcher);
    if (hits.empty()) {
      // Only posts that would have been retrieved count as reported-speech drops.
      slot.drop = DropDecision::Keep;
      continue;
    }
    if (slot.drop == DropDecision::ReportedSpeech) continue;
    slot.candidate = true;
    slot.pattern_id = hits.front().pattern_id;
    candidates.push_back(posts[i]);
    where.push_back(i);
  }
  if (candidates.empty()) return;

  std::vector<Prediction> predictions;
  try {
    predictions = classifier.classify(candidates);
  } catch (const std::exception& e) {
    throw StageFailure{"classify", e.what()};
  }
  if (predictions.size() != candidates.size()) {
    throw StageFailure{"classify", classifier.name() + " returned " +
                                       std::to_string(predictions.size()) + " predictions for " +
                                       std::to_string(candidates.size()) + " posts"};
  }
  for (std::size_t k = 0; k < candidates.size(); ++k) {
    Slot& slot = slots[where[k]];
    slot.prediction = std::move(predictions[k]);
    if (slot.prediction.label != Label::Age) continue;
    try {
      slot.extraction = extract_age(candidates[k].id, candidates[k].text, cascade);
    } catch (const std::exception& e) {
      throw StageFailure{"extract", "post " + candidates[k].id + ": " + e.what()};
    }
  }
}

}  // namespace

json to_json(const PipelineReport& r) {
  return json{
      {"classifier", r.classifier},
      {"counts",
       {{"posts_scanned", r.posts_scanned},
        {"users_scanned", r.users_scanned},
        {"retweets_dropped", r.retweets_dropped},
        {"reported_speech_dropped", r.reported_speech_dropped},
        {"candidates_matched", r.candidates_matched},
        {"users_matched", r.users_matched},
        {"age_classified", r.age_classified},
        {"ages_extracted", r.ages_extracted},
        {"users_with_age", r.users_with_age}}},
      {"fractions",
       {{"retweets_dropped_of_posts_scanned", fraction_of(r.retweets_dropped, r.posts_scanned)},
        {"reported_speech_dropped_of_posts_scanned",
         fraction_of(r.reported_speech_dropped, r.posts_scanned)},
        {"candidates_matched_of_posts_scanned",
         fraction_of(r.candidates_matched, r.posts_scanned)},
        {"users_matched_of_users_scanned", fraction_of(r.users_matched, r.users_scanned)},
        {"age_classified_of_candidates_matched",
         fraction_of(r.age_classified, r.candidates_matched)},
        {"ages_extracted_of_age_classified", fraction_of(r.ages_extracted, r.age_classified)},
        {"users_with_age_of_users_scanned", fraction_of(r.users_with_age, r.users_scanned)}}},
  };
}

UserAgeRecord rollup_user(std::span<const DatedExtraction> extractions) {
  if (extractions.empty()) throw ValidationError("rollup_user: no extractions");
  UserAgeRecord record;
  record.user_id = extractions.front().user_id;
  const DatedExtraction* latest = &extractions.front();
  for (const auto& e : extractions) {
    if (e.user_id != record.user_id) {
      throw ValidationError("rollup_user: mixed users '" + record.user_id + "' and '" +
                            e.user_id + "'");
    }
    if (e.created_at > latest->created_at ||
        (e.created_at == latest->created_at && e.age > latest->age)) {
      latest = &e;
    }
  }
  record.extractions.assign(extractions.begin(), extractions.end());
  record.latest_age = latest->age;
  return record;
}

nlohmann::ordered_json to_json(const UserAgeRecord& record) {
  using ojson = nlohmann::ordered_json;
  ojson items = ojson::array();
  for (const auto& e : record.extractions) {
    items.push_back({{"post_id", e.post_id},
                     {"created_at", format_timestamp(e.created_at)},
                     {"age", e.age},
                     {"rule_id", e.rule_id}});
  }
  return ojson{{"user_id", record.user_id},
              {"latest_age", record.latest_age},
              {"policy", "latest_post"},
              {"extractions", std::move(items)}};
}

ClassifierFactory make_classifier_factory(const PipelineConfig& config) {
  if (config.model_path.has_value() == config.plugin_command.has_value()) {
    throw PipelineError("classify", "give exactly one of a model path or a plug-in command");
  }
  if (config.model_path) {
    std::shared_ptr<const BaselineModel> model;
    try {
      model = std::make_shared<const BaselineModel>(load_model(*config.model_path));
    } catch (const std::exception& e) {
      throw PipelineError("classify", e.what());
    }
    return [model] { return std::make_unique<BaselineClassifier>(*model); };
  }
  PluginOptions options{*config.plugin_command, config.plugin_timeout, config.plugin_retries};
  return [options] { return std::make_unique<ExternalClassifierClient>(options); };
}

PipelineReport run_pipeline(const PipelineConfig& config) {
  return run_pipeline(config, make_classifier_factory(config));
}

PipelineReport run_pipeline(const PipelineConfig& config, const ClassifierFactory& factory) {
  if (config.parallelism < 1) throw PipelineError("ingest", "parallelism must be at least 1");
  if (config.batch_size == 0) throw PipelineError("ingest", "batch size must be positive");
  for (const auto& path : config.inputs) {
    if (!fs::exists(path)) throw PipelineError("ingest", "no such input: " + path.string());
  }

  CompiledPatternSet matcher;
  try {
    matcher = compile_pattern_set(config.patterns_path ? load_query_patterns(*config.patterns_path)
                                                       : default_query_patterns());
  } catch (const std::exception& e) {
    throw PipelineError("retrieve", e.what());
  }
  RuleCascade cascade;
  try {
    cascade = config.rules_path ? load_rules(*config.rules_path) : default_rules();
  } catch (const std::exception& e) {
    throw PipelineError("extract", e.what());
  }

  const auto workers = static_cast<std::size_t>(config.parallelism);
  std::vector<std::unique_ptr<Classifier>> classifiers;
  try {
    for (std::size_t w = 0; w < workers; ++w) classifiers.push_back(factory());
  } catch (const std::exception& e) {
    throw PipelineError("classify", e.what());
  }

  std::error_code ec;
  fs::create_directories(config.output_dir, ec);
  if (ec) throw PipelineError("write", "cannot create " + config.output_dir.string());
  OutputFile posts_out(config.output_dir, "posts.jsonl");

  PipelineReport report;
  report.classifier = classifiers.front()->name();
  std::unordered_set<std::string> users_scanned;
  std::unordered_set<std::string> users_matched;
  std::map<std::string, std::vector<DatedExtraction>> by_user;

  std::vector<Post> batch;
  std::vector<Slot> slots;
  batch.reserve(config.batch_size);

  const auto flush = [&] {
    slots.assign(batch.size(), Slot{});
    const std::size_t chunk = (batch.size() + workers - 1) / workers;
    std::vector<std::exception_ptr> errors(workers);
    const auto run = [&](std::size_t w) {
      const std::size_t lo = std::min(batch.size(), w * chunk);
      const std::size_t hi = std::min(batch.size(), lo + chunk);
      try {
        process_range(std::span<const Post>(batch).subspan(lo, hi - lo),
                      std::span<Slot>(slots).subspan(lo, hi - lo), matcher, cascade,
                      *classifiers[w]);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    };
    if (workers == 1 || batch.size() < 2 * workers) {
      for (std::size_t w = 0; w < workers; ++w) run(w);
    } else {
      std::vector<std::thread> threads;
      for (std::size_t w = 1; w < workers; ++w) threads.emplace_back(run, w);
      run(0);
      for (auto& t : threads) t.join();
    }
    for (const auto& error : errors) {
      if (!error) continue;
      try {
        std::rethrow_exception(error);
      } catch (const StageFailure& f) {
        throw PipelineError(f.stage, f.what);
      } catch (const std::exception& e) {
        throw PipelineError("retrieve", e.what());
      }
    }

    auto& out = posts_out.stream();
    for (std::size_t i = 0; i < batch.size(); ++i) {
      const Post& post = batch[i];
      const Slot& slot = slots[i];
      ++report.posts_scanned;
      users_scanned.insert(post.user_id);
      if (slot.drop == DropDecision::Retweet) {
        ++report.retweets_dropped;
        continue;
      }
      if (slot.drop == DropDecision::ReportedSpeech) {
        ++report.reported_speech_dropped;
        continue;
      }
      if (!slot.candidate) continue;
      ++report.candidates_matched;
      users_matched.insert(post.user_id);
      nlohmann::ordered_json record{{"post_id", post.id},
                  {"user_id", post.user_id},
                  {"created_at", format_timestamp(post.created_at)},
                  {"label", to_string(slot.prediction.label)},
                  {"score", slot.prediction.score}};
      if (slot.prediction.label == Label::Age) ++report.age_classified;
      if (slot.extraction) {
        ++report.ages_extracted;
        record["age"] = slot.extraction->age;
        record["rule_id"] = slot.extraction->rule_id;
        by_user[post.user_id].push_back(
            {post.user_id, post.id, post.created_at, slot.extraction->age, slot.extraction->rule_id});
      }
      record["pattern_id"] = slot.pattern_id;
      out << record.dump(-1, ' ', false, nlohmann::ordered_json::error_handler_t::replace) << '\n';
    }
    batch.clear();
  };

  for (const auto& path : config.inputs) {
    try {
      PostReader reader(path, config.format ? *config.format : guess_post_format(path));
      Post post;
      while (true) {
        bool more = false;
        try {
          more = reader.next(post);
        } catch (const std::exception& e) {
          throw PipelineError("ingest", path.string() + ": " + e.what());
        }
        if (!more) break;
        batch.push_back(std::move(post));
        if (batch.size() == config.batch_size) flush();
      }
    } catch (const PipelineError&) {
      throw;
    } catch (const std::exception& e) {
      throw PipelineError("ingest", path.string() + ": " + e.what());
    }
  }
  if (!batch.empty()) flush();

  report.users_scanned = users_scanned.size();
  report.users_matched = users_matched.size();
  report.users_with_age = by_user.size();

  OutputFile users_out(config.output_dir, "users.jsonl");
  for (const auto& [user, items] : by_user) {
    users_out.stream() << to_json(rollup_user(items)).dump(-1, ' ', false,
                                                           nlohmann::ordered_json::error_handler_t::replace)
                       << '\n';
  }
  json report_doc = to_json(report);
  report_doc["seed"] = config.seed;
  OutputFile report_out(config.output_dir, "report.json");
  report_out.stream() << report_doc.dump(2) << '\n';

  posts_out.commit();
  users_out.commit();
  report_out.commit();
  return report;
}

}  // namespace selfage
