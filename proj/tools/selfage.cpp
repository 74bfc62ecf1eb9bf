// selfage command line: retrieval, training, classification, extraction,
// evaluation and end-to-end runs over JSONL/TSV post files.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "selfage/classify.hpp"
#include "selfage/corpus.hpp"
#include "selfage/error.hpp"
#include "selfage/eval.hpp"
#include "selfage/extract.hpp"
#include "selfage/pipeline.hpp"
#include "selfage/plugin_client.hpp"
#include "selfage/retrieval.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using ojson = nlohmann::ordered_json;
using namespace selfage;

namespace {

PostFormat format_for(const fs::path& path, const std::string& format) {
  return format.empty() ? guess_post_format(path) : parse_post_format(format);
}

// Writes to a .partial file and renames on commit; "-" means stdout.
class Output {
 public:
  explicit Output(const std::string& path) : path_(path) {
    if (path_ == "-" || path_.empty()) return;
    file_.open(path_ + ".partial", std::ios::binary);
    if (!file_) throw IoError("cannot open " + path_ + ".partial");
  }
  std::ostream& stream() { return file_.is_open() ? file_ : std::cout; }
  void commit() {
    if (!file_.is_open()) return;
    file_.close();
    if (!file_) throw IoError("failed writing " + path_);
    fs::rename(path_ + ".partial", path_);
  }

 private:
  std::string path_;
  std::ofstream file_;
};

std::string dump_line(const ojson& j) {
  return j.dump(-1, ' ', false, ojson::error_handler_t::replace);
}

std::vector<Prediction> load_predictions(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<Prediction> out;
  std::string raw;
  std::size_t line = 0;
  while (std::getline(in, raw)) {
    ++line;
    if (raw.empty()) continue;
    try {
      const auto j = json::parse(raw);
      out.push_back({j.at("post_id").get<std::string>(), parse_label(j.at("label").get<std::string>()),
                     j.value("score", 0.0)});
    } catch (const std::exception& e) {
      throw ParseError(e.what(), line);
    }
  }
  return out;
}

std::unique_ptr<Classifier> make_classifier(const std::string& model, const std::string& plugin,
                                            int timeout_ms, int retries) {
  if (model.empty() == plugin.empty()) {
    throw ValidationError("give exactly one of --model or --plugin");
  }
  if (!model.empty()) return std::make_unique<BaselineClassifier>(load_model(model));
  return std::make_unique<ExternalClassifierClient>(
      PluginOptions{plugin, std::chrono::milliseconds(timeout_ms), retries});
}

RuleCascade rules_from(const std::string& path) {
  return path.empty() ? default_rules() : load_rules(path);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Extract self-reported ages from social media posts."};
  app.require_subcommand(1);
  std::string stage;

  // retrieve
  auto* retrieve = app.add_subcommand("retrieve", "Match posts against the query patterns");
  std::string r_input, r_format, r_patterns, r_output = "-";
  retrieve->add_option("--input,-i", r_input, "Post file (.jsonl or .tsv)")->required();
  retrieve->add_option("--format", r_format, "jsonl or tsv (default: by extension)");
  retrieve->add_option("--patterns", r_patterns, "Pattern file (default: shipped set)");
  retrieve->add_option("--output,-o", r_output, "Hit records, JSONL ('-' for stdout)");

  // train
  auto* train = app.add_subcommand("train", "Train the n-gram baseline classifier");
  std::string t_posts, t_labels, t_format, t_model;
  std::uint64_t t_seed = 0;
  std::size_t t_cv = 0;
  BaselineConfig t_config;
  train->add_option("--posts", t_posts, "Post file")->required();
  train->add_option("--labels", t_labels, "Label TSV (post_id, label, age)")->required();
  train->add_option("--format", t_format, "jsonl or tsv");
  train->add_option("--model,-o", t_model, "Output model file")->required();
  train->add_option("--seed", t_seed, "Random seed")->required();
  train->add_option("--cost", t_config.cost, "Cost C")->capture_default_str();
  train->add_option("--weight-age", t_config.weight_age, "Loss weight for age")->capture_default_str();
  train->add_option("--weight-no-age", t_config.weight_no_age, "Loss weight for no_age")->capture_default_str();
  train->add_option("--cv", t_cv, "Also report k-fold cross-validation (e.g. 10)");

  // classify
  auto* classify = app.add_subcommand("classify", "Label posts age/no_age");
  std::string c_input, c_format, c_model, c_plugin, c_output = "-";
  int c_timeout = 30000, c_retries = 2;
  classify->add_option("--input,-i", c_input, "Post file")->required();
  classify->add_option("--format", c_format, "jsonl or tsv");
  classify->add_option("--model", c_model, "Baseline model file");
  classify->add_option("--plugin", c_plugin, "Plug-in command line (age-clf/1)");
  classify->add_option("--plugin-timeout-ms", c_timeout)->capture_default_str();
  classify->add_option("--plugin-retries", c_retries)->capture_default_str();
  classify->add_option("--output,-o", c_output, "Predictions, JSONL");

  // extract
  auto* extract = app.add_subcommand("extract", "Apply the rule cascade to every post");
  std::string e_input, e_format, e_rules, e_output = "-";
  extract->add_option("--input,-i", e_input, "Post file")->required();
  extract->add_option("--format", e_format, "jsonl or tsv");
  extract->add_option("--rules", e_rules, "Rule file (default: shipped rules)");
  extract->add_option("--output,-o", e_output, "Extractions, JSONL");

  // evaluate
  auto* evaluate = app.add_subcommand("evaluate", "Score predictions and extraction against labels");
  std::string v_posts, v_labels, v_format, v_predictions, v_rules, v_report;
  bool v_oracle = false;
  evaluate->add_option("--posts", v_posts, "Post file")->required();
  evaluate->add_option("--labels", v_labels, "Gold label TSV")->required();
  evaluate->add_option("--format", v_format, "jsonl or tsv");
  auto* v_pred_opt = evaluate->add_option("--predictions", v_predictions, "Predictions JSONL");
  evaluate->add_flag("--oracle-labels", v_oracle, "Use gold labels as the classifier")->excludes(v_pred_opt);
  evaluate->add_option("--rules", v_rules, "Rule file");
  evaluate->add_option("--report", v_report, "Write the JSON report here");

  // kappa
  auto* kappa = app.add_subcommand("kappa", "Fleiss' kappa for annotation agreement");
  std::string k_ratings, k_counts;
  auto* k_r = kappa->add_option("--ratings", k_ratings, "TSV, one item per row, one rater label per column");
  auto* k_c = kappa->add_option("--counts", k_counts, "TSV, one item per row, one count per category");
  k_r->excludes(k_c);
  kappa->require_option(1);

  // run
  auto* run = app.add_subcommand("run", "End-to-end pipeline");
  PipelineConfig p_config;
  std::vector<std::string> p_inputs;
  std::string p_format, p_patterns, p_rules, p_model, p_plugin, p_out;
  int p_timeout = 30000;
  run->add_option("--input,-i", p_inputs, "Post files")->required();
  run->add_option("--format", p_format, "jsonl or tsv");
  run->add_option("--patterns", p_patterns, "Pattern file");
  run->add_option("--rules", p_rules, "Rule file");
  run->add_option("--model", p_model, "Baseline model file");
  run->add_option("--plugin", p_plugin, "Plug-in command line");
  run->add_option("--plugin-timeout-ms", p_timeout)->capture_default_str();
  run->add_option("--plugin-retries", p_config.plugin_retries)->capture_default_str();
  run->add_option("--output-dir,-o", p_out, "Output directory")->required();
  run->add_option("--jobs,-j", p_config.parallelism, "Worker threads")->capture_default_str();
  run->add_option("--batch-size", p_config.batch_size)->capture_default_str();
  run->add_option("--seed", p_config.seed, "Recorded in the report")->capture_default_str();

  // split
  auto* split = app.add_subcommand("split", "Stratified train/test split of a label file");
  std::string s_posts, s_labels, s_format, s_train, s_test;
  double s_fraction = 0.8;
  std::uint64_t s_seed = 0;
  split->add_option("--posts", s_posts, "Post file")->required();
  split->add_option("--labels", s_labels, "Label TSV")->required();
  split->add_option("--format", s_format, "jsonl or tsv");
  split->add_option("--fraction", s_fraction, "Train fraction")->capture_default_str();
  split->add_option("--seed", s_seed, "Random seed")->required();
  split->add_option("--train-out", s_train, "Train label TSV")->required();
  split->add_option("--test-out", s_test, "Test label TSV")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*retrieve) {
      stage = "retrieve";
      const auto matcher = compile_pattern_set(r_patterns.empty() ? default_query_patterns()
                                                                  : load_query_patterns(r_patterns));
      PostReader reader(r_input, format_for(r_input, r_format));
      Output out(r_output);
      Post post;
      std::size_t scanned = 0, dropped = 0, matched = 0;
      while (reader.next(post)) {
        ++scanned;
        const auto hits = match_candidates(post, matcher);
        if (hits.empty()) continue;
        const auto drop = should_drop(post);
        if (drop != DropDecision::Keep) {
          ++dropped;
          continue;
        }
        ++matched;
        ojson spans = ojson::array();
        for (const auto& h : hits) spans.push_back({{"pattern_id", h.pattern_id}, {"begin", h.begin}, {"end", h.end}});
        out.stream() << dump_line({{"post_id", post.id}, {"hits", spans}}) << '\n';
      }
      out.commit();
      std::cerr << "scanned " << scanned << ", matched " << matched << ", dropped " << dropped << '\n';
    } else if (*train) {
      stage = "train";
      const auto posts = load_posts(t_posts, format_for(t_posts, t_format));
      const auto labels = load_labels(t_labels, posts);
      t_config.seed = t_seed;
      if (t_cv > 0) {
        const auto m = prf(cross_validate(labels, t_config, t_cv));
        std::cerr << t_cv << "-fold cv: precision " << round_half_even(m.precision, 3) << " recall "
                  << round_half_even(m.recall, 3) << " f1 " << round_half_even(m.f1, 3) << '\n';
      }
      const auto model = train_baseline(labels, t_config);
      save_model(model, t_model);
      std::cerr << "trained on " << labels.size() << " posts, " << model.vocabulary.size()
                << " n-grams, seed " << t_seed << '\n';
    } else if (*classify) {
      stage = "classify";
      auto clf = make_classifier(c_model, c_plugin, c_timeout, c_retries);
      PostReader reader(c_input, format_for(c_input, c_format));
      Output out(c_output);
      std::vector<Post> batch;
      const auto flush = [&] {
        for (const auto& p : clf->classify(batch)) {
          out.stream() << dump_line({{"post_id", p.post_id}, {"label", to_string(p.label)}, {"score", p.score}})
                       << '\n';
        }
        batch.clear();
      };
      Post post;
      while (reader.next(post)) {
        batch.push_back(post);
        if (batch.size() == 4096) flush();
      }
      if (!batch.empty()) flush();
      out.commit();
    } else if (*extract) {
      stage = "extract";
      const auto cascade = rules_from(e_rules);
      PostReader reader(e_input, format_for(e_input, e_format));
      Output out(e_output);
      Post post;
      while (reader.next(post)) {
        const auto e = extract_age(post.id, post.text, cascade);
        ojson record{{"post_id", post.id}};
        if (e) {
          record["age"] = e->age;
          record["rule_id"] = e->rule_id;
          record["begin"] = e->begin;
          record["end"] = e->end;
        }
        out.stream() << dump_line(record) << '\n';
      }
      out.commit();
    } else if (*evaluate) {
      stage = "evaluate";
      if (v_predictions.empty() && !v_oracle) {
        throw ValidationError("give --predictions or --oracle-labels");
      }
      const auto posts = load_posts(v_posts, format_for(v_posts, v_format));
      const auto gold = load_labels(v_labels, posts);
      std::vector<Prediction> preds;
      if (v_oracle) {
        for (const auto& g : gold) preds.push_back({g.post.id, g.label, g.label == Label::Age ? 1.0 : -1.0});
      } else {
        preds = load_predictions(v_predictions);
      }
      const auto cascade = rules_from(v_rules);
      std::unordered_map<std::string, const Post*> by_id;
      for (const auto& p : posts) by_id.emplace(p.id, &p);
      std::vector<ExtractionResult> results;
      for (const auto& p : preds) {
        ExtractionResult r{p, std::nullopt};
        const auto it = by_id.find(p.post_id);
        if (it == by_id.end()) throw ValidationError("prediction for unknown post '" + p.post_id + "'");
        if (p.label == Label::Age) r.extraction = extract_age(p.post_id, it->second->text, cascade);
        results.push_back(std::move(r));
      }
      const auto cls = classification_breakdown(preds, gold);
      const auto joint = joint_breakdown(results, gold);
      std::cout << format_table(cls, &joint);
      if (!v_report.empty()) {
        Output out(v_report);
        out.stream() << json{{"classification", to_json(cls)}, {"joint_extraction", to_json(joint)},
                             {"oracle_labels", v_oracle}}.dump(2)
                     << '\n';
        out.commit();
      }
    } else if (*kappa) {
      stage = "kappa";
      const std::string path = k_ratings.empty() ? k_counts : k_ratings;
      std::ifstream in(path, std::ios::binary);
      if (!in) throw IoError("cannot open " + path);
      std::string raw;
      std::vector<std::vector<std::string>> rows;
      while (std::getline(in, raw)) {
        if (!raw.empty() && raw.back() == '\r') raw.pop_back();
        if (raw.empty() || raw.front() == '#') continue;
        std::vector<std::string> fields;
        std::stringstream ss(raw);
        std::string field;
        while (std::getline(ss, field, '\t')) fields.push_back(field);
        rows.push_back(std::move(fields));
      }
      double k = 0.0;
      if (!k_ratings.empty()) {
        k = fleiss_kappa(RatingMatrix::from_ratings(rows));
      } else {
        std::vector<std::vector<std::size_t>> counts;
        for (std::size_t i = 0; i < rows.size(); ++i) {
          std::vector<std::size_t> row;
          for (const auto& f : rows[i]) {
            try {
              row.push_back(std::stoul(f));
            } catch (const std::exception&) {
              throw ParseError("count '" + f + "' is not a non-negative integer", i + 1);
            }
          }
          counts.push_back(std::move(row));
        }
        k = fleiss_kappa(RatingMatrix(std::move(counts)));
      }
      std::cout << json{{"items", rows.size()}, {"fleiss_kappa", k}, {"display", round_half_even(k, 3)}}.dump()
                << '\n';
    } else if (*run) {
      stage = "run";
      for (const auto& i : p_inputs) p_config.inputs.emplace_back(i);
      if (!p_format.empty()) p_config.format = parse_post_format(p_format);
      if (!p_patterns.empty()) p_config.patterns_path = p_patterns;
      if (!p_rules.empty()) p_config.rules_path = p_rules;
      if (!p_model.empty()) p_config.model_path = p_model;
      if (!p_plugin.empty()) p_config.plugin_command = p_plugin;
      p_config.plugin_timeout = std::chrono::milliseconds(p_timeout);
      p_config.output_dir = p_out;
      const auto report = run_pipeline(p_config);
      std::cout << to_json(report).dump(2) << '\n';
    } else if (*split) {
      stage = "split";
      const auto posts = load_posts(s_posts, format_for(s_posts, s_format));
      const auto labels = load_labels(s_labels, posts);
      const auto result = stratified_split(labels, s_fraction, s_seed);
      Output train_out(s_train);
      write_labels(train_out.stream(), result.train);
      train_out.commit();
      Output test_out(s_test);
      write_labels(test_out.stream(), result.test);
      test_out.commit();
      std::cerr << "train " << result.train.size() << ", test " << result.test.size() << ", seed "
                << result.seed << '\n';
    }
  } catch (const PipelineError& e) {
    std::cerr << "selfage: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "selfage: [" << stage << "] " << e.what() << '\n';
    return 1;
  }
  return 0;
}
