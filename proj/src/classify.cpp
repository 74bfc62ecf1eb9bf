#include "selfage/classify.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <random>
#include <set>

#include "selfage/error.hpp"
#include "selfage/normalize.hpp"
#include "selfage/shuffle.hpp"

namespace selfage {

namespace {

constexpr std::string_view kModelMagic = "selfage-baseline-model";
constexpr int kModelSchema = 1;

double dot(const std::vector<double>& w, const SparseVector& x) {
  double sum = 0.0;
  for (const auto& [i, v] : x) sum += w[i] * v;
  return sum;
}

}  // namespace

std::vector<std::string> word_ngrams(std::span<const std::string> tokens) {
  std::vector<std::string> out;
  out.reserve(tokens.size() * NgramVocabulary::kMaxOrder);
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    std::string gram = tokens[i];
    out.push_back(gram);
    for (int n = 2; n <= NgramVocabulary::kMaxOrder && i + n <= tokens.size(); ++n) {
      gram += ' ';
      gram += tokens[i + n - 1];
      out.push_back(gram);
    }
  }
  return out;
}

NgramVocabulary NgramVocabulary::build(std::span<const std::vector<std::string>> documents) {
  std::set<std::string> all;
  for (const auto& doc : documents) {
    for (auto& gram : word_ngrams(doc)) all.insert(std::move(gram));
  }
  NgramVocabulary vocab;
  vocab.ngrams_.assign(all.begin(), all.end());
  vocab.index_.reserve(vocab.ngrams_.size());
  for (std::uint32_t i = 0; i < vocab.ngrams_.size(); ++i) vocab.index_.emplace(vocab.ngrams_[i], i);

  // A feature absent from some document has minimum 0.
  const std::size_t d = vocab.size();
  std::vector<std::size_t> doc_freq(d, 0);
  std::vector<double> min_present(d, 0.0), max(d, 0.0);
  for (const auto& doc : documents) {
    for (const auto& [i, count] : featurize(doc, vocab)) {
      min_present[i] = doc_freq[i] == 0 ? count : std::min(min_present[i], count);
      max[i] = std::max(max[i], count);
      ++doc_freq[i];
    }
  }
  std::vector<double> min(d, 0.0);
  for (std::size_t i = 0; i < d; ++i) {
    if (doc_freq[i] == documents.size()) min[i] = min_present[i];
  }
  vocab.set_range(std::move(min), std::move(max));
  return vocab;
}

NgramVocabulary NgramVocabulary::from_parts(std::vector<std::string> ngrams,
                                            std::vector<double> min, std::vector<double> max) {
  NgramVocabulary vocab;
  vocab.ngrams_ = std::move(ngrams);
  vocab.index_.reserve(vocab.ngrams_.size());
  for (std::uint32_t i = 0; i < vocab.ngrams_.size(); ++i) {
    if (!vocab.index_.emplace(vocab.ngrams_[i], i).second) {
      throw ValidationError("duplicate n-gram '" + vocab.ngrams_[i] + "' in vocabulary");
    }
  }
  vocab.set_range(std::move(min), std::move(max));
  return vocab;
}

std::int64_t NgramVocabulary::index_of(const std::string& ngram) const {
  const auto it = index_.find(ngram);
  return it == index_.end() ? -1 : static_cast<std::int64_t>(it->second);
}

void NgramVocabulary::set_range(std::vector<double> min, std::vector<double> max) {
  if (min.size() != ngrams_.size() || max.size() != ngrams_.size()) {
    throw ValidationError("feature range size does not match vocabulary size");
  }
  min_ = std::move(min);
  max_ = std::move(max);
}

SparseVector featurize(std::span<const std::string> tokens, const NgramVocabulary& vocab) {
  std::map<std::uint32_t, double> counts;
  for (const auto& gram : word_ngrams(tokens)) {
    const auto index = vocab.index_of(gram);
    if (index >= 0) counts[static_cast<std::uint32_t>(index)] += 1.0;
  }
  return SparseVector(counts.begin(), counts.end());
}

SparseVector scale(const SparseVector& counts, const NgramVocabulary& vocab) {
  SparseVector out;
  out.reserve(counts.size());
  const auto& lo = vocab.feature_min();
  const auto& hi = vocab.feature_max();
  for (const auto& [i, x] : counts) {
    const double range = hi[i] - lo[i];
    if (range <= 0.0) continue;
    const double v = std::clamp((x - lo[i]) / range, 0.0, 1.0);
    if (v != 0.0) out.emplace_back(i, v);
  }
  return out;
}

BaselineModel train_baseline(std::span<const LabeledPost> train, const BaselineConfig& config) {
  bool has_age = false;
  bool has_no_age = false;
  for (const auto& item : train) (item.label == Label::Age ? has_age : has_no_age) = true;
  if (!has_age || !has_no_age) {
    throw ValidationError("training data must contain both age and no_age posts");
  }

  std::vector<std::vector<std::string>> docs;
  docs.reserve(train.size());
  for (const auto& item : train) docs.push_back(normalize_for_ngram_classifier(item.post.text));

  BaselineModel model;
  model.config = config;
  model.vocabulary = NgramVocabulary::build(docs);

  const std::size_t n = train.size();
  std::vector<SparseVector> x(n);
  std::vector<double> y(n), upper(n), q(n);
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = scale(featurize(docs[i], model.vocabulary), model.vocabulary);
    const bool age = train[i].label == Label::Age;
    y[i] = age ? 1.0 : -1.0;
    upper[i] = config.cost * (age ? config.weight_age : config.weight_no_age);
    q[i] = 1.0;  // bias feature
    for (const auto& [j, v] : x[i]) q[i] += v * v;
  }

  // Dual coordinate descent for the hinge loss; the bias is an extra feature
  // fixed at 1.
  std::vector<double>& w = model.weights;
  w.assign(model.vocabulary.size(), 0.0);
  double& b = model.bias;
  std::vector<double> alpha(n, 0.0);
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::mt19937_64 rng(config.seed);

  for (int iter = 0; iter < config.max_iterations; ++iter) {
    deterministic_shuffle(std::span<std::size_t>(order), rng);
    double max_pg = -std::numeric_limits<double>::infinity();
    double min_pg = std::numeric_limits<double>::infinity();
    for (const std::size_t i : order) {
      const double g = y[i] * (dot(w, x[i]) + b) - 1.0;
      double pg = g;
      if (alpha[i] == 0.0) pg = std::min(g, 0.0);
      else if (alpha[i] == upper[i]) pg = std::max(g, 0.0);
      max_pg = std::max(max_pg, pg);
      min_pg = std::min(min_pg, pg);
      if (std::abs(pg) <= 1e-12) continue;
      const double old = alpha[i];
      alpha[i] = std::clamp(old - g / q[i], 0.0, upper[i]);
      const double delta = (alpha[i] - old) * y[i];
      for (const auto& [j, v] : x[i]) w[j] += delta * v;
      b += delta;
    }
    if (max_pg - min_pg <= config.tolerance) break;
  }
  return model;
}

double score(const BaselineModel& model, std::string_view text) {
  const auto tokens = normalize_for_ngram_classifier(text);
  return dot(model.weights, scale(featurize(tokens, model.vocabulary), model.vocabulary)) +
         model.bias;
}

Prediction predict(const BaselineModel& model, const Post& post) {
  const double s = score(model, post.text);
  return {post.id, s > 0.0 ? Label::Age : Label::NoAge, s};
}

nlohmann::json model_to_json(const BaselineModel& model) {
  const auto& c = model.config;
  return {{"magic", kModelMagic},
          {"schema_version", kModelSchema},
          {"config",
           {{"cost", c.cost},
            {"weight_no_age", c.weight_no_age},
            {"weight_age", c.weight_age},
            {"seed", c.seed},
            {"max_iterations", c.max_iterations},
            {"tolerance", c.tolerance}}},
          {"vocabulary", model.vocabulary.ngrams()},
          {"feature_min", model.vocabulary.feature_min()},
          {"feature_max", model.vocabulary.feature_max()},
          {"weights", model.weights},
          {"bias", model.bias}};
}

BaselineModel model_from_json(const nlohmann::json& doc) {
  try {
    if (doc.at("magic").get<std::string>() != kModelMagic) {
      throw ValidationError("not a selfage baseline model");
    }
    if (doc.at("schema_version").get<int>() != kModelSchema) {
      throw ValidationError("unsupported model schema version " +
                            doc.at("schema_version").dump());
    }
    BaselineModel model;
    const auto& c = doc.at("config");
    model.config.cost = c.at("cost").get<double>();
    model.config.weight_no_age = c.at("weight_no_age").get<double>();
    model.config.weight_age = c.at("weight_age").get<double>();
    model.config.seed = c.at("seed").get<std::uint64_t>();
    model.config.max_iterations = c.at("max_iterations").get<int>();
    model.config.tolerance = c.at("tolerance").get<double>();

    model.vocabulary = NgramVocabulary::from_parts(
        doc.at("vocabulary").get<std::vector<std::string>>(),
        doc.at("feature_min").get<std::vector<double>>(),
        doc.at("feature_max").get<std::vector<double>>());
    model.weights = doc.at("weights").get<std::vector<double>>();
    model.bias = doc.at("bias").get<double>();
    if (model.weights.size() != model.vocabulary.size()) {
      throw ValidationError("weight dimension does not match vocabulary size");
    }
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed model file: ") + e.what());
  }
}

void save_model(const BaselineModel& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << model_to_json(model).dump() << '\n';
  if (!out) throw IoError("write failure on '" + path.string() + "'");
}

BaselineModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("model file '" + path.string() + "' is not valid JSON: " + e.what());
  }
  return model_from_json(doc);
}

EvalCounts cross_validate(std::span<const LabeledPost> train, const BaselineConfig& config,
                          std::size_t folds) {
  EvalCounts total;
  for (const auto& fold : kfold_indices(train.size(), folds, config.seed)) {
    std::vector<bool> held_out(train.size(), false);
    for (const std::size_t i : fold) held_out[i] = true;
    std::vector<LabeledPost> fit, check;
    for (std::size_t i = 0; i < train.size(); ++i) (held_out[i] ? check : fit).push_back(train[i]);
    const BaselineModel model = train_baseline(fit, config);
    std::vector<Prediction> predictions;
    predictions.reserve(check.size());
    for (const auto& item : check) predictions.push_back(predict(model, item.post));
    total += classification_eval(predictions, check);
  }
  return total;
}

std::vector<Prediction> BaselineClassifier::classify(std::span<const Post> posts) {
  std::vector<Prediction> out;
  out.reserve(posts.size());
  for (const Post& post : posts) out.push_back(predict(model_, post));
  return out;
}

}  // namespace selfage
