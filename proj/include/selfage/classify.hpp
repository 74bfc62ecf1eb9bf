#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "selfage/corpus.hpp"
#include "selfage/eval.hpp"
#include "selfage/prediction.hpp"

namespace selfage {

// (feature index, value) pairs sorted by index.
using SparseVector = std::vector<std::pair<std::uint32_t, double>>;

// Word n-grams (n = 1..3) seen in training, with per-feature min/max counts
// over the training documents for scaling.
class NgramVocabulary {
 public:
  static constexpr int kMaxOrder = 3;

  NgramVocabulary() = default;
  // Indices follow lexicographic n-gram order.
  static NgramVocabulary build(std::span<const std::vector<std::string>> documents);
  // Restores a stored vocabulary; `ngrams` gives the index order.
  static NgramVocabulary from_parts(std::vector<std::string> ngrams, std::vector<double> min,
                                    std::vector<double> max);

  std::size_t size() const { return ngrams_.size(); }
  const std::vector<std::string>& ngrams() const { return ngrams_; }
  // -1 when absent.
  std::int64_t index_of(const std::string& ngram) const;

  const std::vector<double>& feature_min() const { return min_; }
  const std::vector<double>& feature_max() const { return max_; }
  void set_range(std::vector<double> min, std::vector<double> max);

 private:
  std::vector<std::string> ngrams_;
  std::unordered_map<std::string, std::uint32_t> index_;
  std::vector<double> min_;
  std::vector<double> max_;
};

// Space-joined n-grams of orders 1..3, in token order.
std::vector<std::string> word_ngrams(std::span<const std::string> tokens);

SparseVector featurize(std::span<const std::string> tokens, const NgramVocabulary& vocab);

// (x - min) / (max - min) clamped to [0, 1]; constant features map to 0.
SparseVector scale(const SparseVector& counts, const NgramVocabulary& vocab);

struct BaselineConfig {
  double cost = 32.0;
  double weight_no_age = 1.0;
  double weight_age = 2.0;
  std::uint64_t seed = 0;
  int max_iterations = 1000;
  double tolerance = 0.01;
};

// Class-weighted L2-regularized hinge-loss linear model over scaled n-gram
// counts. score = weights . x + bias; Age iff score > 0.
struct BaselineModel {
  NgramVocabulary vocabulary;
  std::vector<double> weights;
  double bias = 0.0;
  BaselineConfig config;
};

// Dual coordinate descent; deterministic for a fixed seed. Throws
// ValidationError unless both classes are present.
BaselineModel train_baseline(std::span<const LabeledPost> train, const BaselineConfig& config);

double score(const BaselineModel& model, std::string_view text);
Prediction predict(const BaselineModel& model, const Post& post);

// JSON container with magic "selfage-baseline-model" and schema_version 1.
void save_model(const BaselineModel& model, const std::filesystem::path& path);
BaselineModel load_model(const std::filesystem::path& path);
nlohmann::json model_to_json(const BaselineModel& model);
BaselineModel model_from_json(const nlohmann::json& doc);

// k-fold cross-validation over `train` (folds from kfold_indices); returns the
// Age-class counts summed over folds.
EvalCounts cross_validate(std::span<const LabeledPost> train, const BaselineConfig& config,
                          std::size_t folds);

// Uniform batch interface over the built-in model and external plug-ins.
class Classifier {
 public:
  virtual ~Classifier() = default;
  // One prediction per post, in input order.
  virtual std::vector<Prediction> classify(std::span<const Post> posts) = 0;
  virtual std::string name() const = 0;
};

class BaselineClassifier final : public Classifier {
 public:
  explicit BaselineClassifier(BaselineModel model) : model_(std::move(model)) {}
  std::vector<Prediction> classify(std::span<const Post> posts) override;
  std::string name() const override { return "baseline"; }
  const BaselineModel& model() const { return model_; }

 private:
  BaselineModel model_;
};

}  // namespace selfage
