#include "selfage/eval.hpp"

#include <cfenv>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <unordered_map>

#include "selfage/error.hpp"

namespace selfage {

namespace {

double ratio(std::size_t num, std::size_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

// Gold item index for every prediction id; throws unless ids are bijective.
template <typename IdOf, typename Item>
std::vector<std::size_t> align(std::span<const Item> items, std::span<const LabeledPost> gold,
                               IdOf id_of) {
  if (items.size() != gold.size()) {
    throw ValidationError("prediction count " + std::to_string(items.size()) +
                          " differs from gold count " + std::to_string(gold.size()));
  }
  std::unordered_map<std::string_view, std::size_t> index;
  index.reserve(gold.size());
  for (std::size_t i = 0; i < gold.size(); ++i) {
    if (!index.emplace(gold[i].post.id, i).second) {
      throw ValidationError("duplicate gold id '" + gold[i].post.id + "'");
    }
  }
  std::vector<std::size_t> out(items.size());
  std::vector<bool> used(gold.size(), false);
  for (std::size_t k = 0; k < items.size(); ++k) {
    const std::string& id = id_of(items[k]);
    const auto it = index.find(id);
    if (it == index.end()) throw ValidationError("prediction for unknown id '" + id + "'");
    if (used[it->second]) throw ValidationError("duplicate prediction for id '" + id + "'");
    used[it->second] = true;
    out[k] = it->second;
  }
  return out;
}

nlohmann::json metrics_json(const EvalCounts& counts, bool rounded) {
  const Metrics m = prf(counts);
  const auto v = [&](double x) { return rounded ? round_half_even(x, 3) : x; };
  return {{"precision", v(m.precision)}, {"recall", v(m.recall)}, {"f1", v(m.f1)}};
}

}  // namespace

Metrics prf(const EvalCounts& counts) {
  Metrics m;
  m.precision = ratio(counts.tp, counts.tp + counts.fp);
  m.recall = ratio(counts.tp, counts.tp + counts.fn);
  const double sum = m.precision + m.recall;
  m.f1 = sum == 0.0 ? 0.0 : 2.0 * m.recall * m.precision / sum;
  return m;
}

double round_half_even(double value, int decimals) {
  const double scale = std::pow(10.0, decimals);
  const int saved = std::fegetround();
  std::fesetround(FE_TONEAREST);
  const double rounded = std::nearbyint(value * scale) / scale;
  std::fesetround(saved);
  return rounded;
}

ClassificationBreakdown classification_breakdown(std::span<const Prediction> predictions,
                                                 std::span<const LabeledPost> gold) {
  const auto order =
      align(predictions, gold, [](const Prediction& p) -> const std::string& { return p.post_id; });
  ClassificationBreakdown b;
  for (std::size_t k = 0; k < predictions.size(); ++k) {
    const bool gold_age = gold[order[k]].label == Label::Age;
    const bool pred_age = predictions[k].label == Label::Age;
    if (gold_age && pred_age) ++b.tp;
    else if (!gold_age && pred_age) ++b.fp;
    else if (gold_age) ++b.fn;
    else ++b.tn;
  }
  return b;
}

EvalCounts classification_eval(std::span<const Prediction> predictions,
                               std::span<const LabeledPost> gold) {
  return classification_breakdown(predictions, gold).counts();
}

JointBreakdown joint_breakdown(std::span<const ExtractionResult> results,
                               std::span<const LabeledPost> gold) {
  const auto order = align(results, gold, [](const ExtractionResult& r) -> const std::string& {
    return r.prediction.post_id;
  });
  JointBreakdown b;
  for (std::size_t k = 0; k < results.size(); ++k) {
    const LabeledPost& truth = gold[order[k]];
    const ExtractionResult& r = results[k];
    const bool gold_age = truth.label == Label::Age;
    const bool pred_age = r.prediction.label == Label::Age;
    const bool extracted = r.extraction.has_value();
    if (gold_age && !pred_age) {
      ++b.fn_misclassified;
    } else if (gold_age && !extracted) {
      ++b.fn_not_extracted;
    } else if (gold_age) {
      (r.extraction->age == truth.age ? b.tp : b.fp_wrong_age)++;
    } else if (pred_age && extracted) {
      ++b.fp_no_age_extracted;
    } else {
      ++b.tn;
    }
  }
  return b;
}

EvalCounts joint_extraction_eval(std::span<const ExtractionResult> results,
                                 std::span<const LabeledPost> gold) {
  return joint_breakdown(results, gold).counts();
}

RatingMatrix::RatingMatrix(std::vector<std::vector<std::size_t>> counts)
    : counts_(std::move(counts)) {
  if (counts_.empty()) throw ValidationError("rating matrix has no items");
  const std::size_t categories = counts_.front().size();
  if (categories == 0) throw ValidationError("rating matrix has no categories");
  for (std::size_t i = 0; i < counts_.size(); ++i) {
    if (counts_[i].size() != categories) {
      throw ValidationError("rating matrix row " + std::to_string(i) + " has " +
                            std::to_string(counts_[i].size()) + " categories, expected " +
                            std::to_string(categories));
    }
    std::size_t sum = 0;
    for (const std::size_t c : counts_[i]) sum += c;
    if (i == 0) raters_ = sum;
    if (sum != raters_) {
      throw ValidationError("rating matrix row " + std::to_string(i) + " sums to " +
                            std::to_string(sum) + ", expected " + std::to_string(raters_));
    }
  }
  if (raters_ < 2) throw ValidationError("Fleiss' kappa needs at least two raters per item");
}

RatingMatrix RatingMatrix::from_ratings(const std::vector<std::vector<std::string>>& ratings) {
  std::unordered_map<std::string, std::size_t> category;
  for (const auto& row : ratings) {
    for (const auto& label : row) category.emplace(label, category.size());
  }
  std::vector<std::vector<std::size_t>> counts;
  counts.reserve(ratings.size());
  for (const auto& row : ratings) {
    std::vector<std::size_t> line(category.size(), 0);
    for (const auto& label : row) ++line[category.at(label)];
    counts.push_back(std::move(line));
  }
  return RatingMatrix(std::move(counts));
}

double fleiss_kappa(const RatingMatrix& matrix) {
  const auto n = static_cast<double>(matrix.raters_per_item());
  const auto items = static_cast<double>(matrix.items());
  std::vector<double> column_totals(matrix.categories(), 0.0);
  double agreement_sum = 0.0;
  for (const auto& row : matrix.counts()) {
    double squares = 0.0;
    for (std::size_t j = 0; j < row.size(); ++j) {
      const auto c = static_cast<double>(row[j]);
      squares += c * c;
      column_totals[j] += c;
    }
    agreement_sum += (squares - n) / (n * (n - 1.0));
  }
  const double observed = agreement_sum / items;
  double expected = 0.0;
  for (const double total : column_totals) {
    const double p = total / (items * n);
    expected += p * p;
  }
  if (std::abs(1.0 - expected) < 1e-15) return 1.0;
  return (observed - expected) / (1.0 - expected);
}

nlohmann::json to_json(const ClassificationBreakdown& b) {
  return {{"counts", {{"tp", b.tp}, {"fp", b.fp}, {"fn", b.fn}, {"tn", b.tn}}},
          {"metrics", metrics_json(b.counts(), false)},
          {"display", metrics_json(b.counts(), true)}};
}

nlohmann::json to_json(const JointBreakdown& b) {
  const EvalCounts c = b.counts();
  return {{"counts", {{"tp", c.tp}, {"fp", c.fp}, {"fn", c.fn}, {"tn", b.tn}}},
          {"cells",
           {{"tp_correct_age", b.tp},
            {"fp_wrong_age", b.fp_wrong_age},
            {"fp_no_age_extracted", b.fp_no_age_extracted},
            {"fn_not_extracted", b.fn_not_extracted},
            {"fn_misclassified", b.fn_misclassified},
            {"tn", b.tn}}},
          {"metrics", metrics_json(c, false)},
          {"display", metrics_json(c, true)}};
}

std::string format_table(const ClassificationBreakdown& classification,
                         const JointBreakdown* joint) {
  std::ostringstream out;
  char line[160];
  const auto row = [&](const char* name, const EvalCounts& c) {
    const Metrics m = prf(c);
    std::snprintf(line, sizeof line, "%-16s %7zu %7zu %7zu %9.3f %7.3f %7.3f\n", name, c.tp,
                  c.fp, c.fn, round_half_even(m.precision, 3), round_half_even(m.recall, 3),
                  round_half_even(m.f1, 3));
    out << line;
  };
  std::snprintf(line, sizeof line, "%-16s %7s %7s %7s %9s %7s %7s\n", "task", "tp", "fp", "fn",
                "precision", "recall", "f1");
  out << line;
  row("classification", classification.counts());
  if (joint != nullptr) {
    row("extraction", joint->counts());
    out << "  fp = " << joint->fp_wrong_age << " wrong age + " << joint->fp_no_age_extracted
        << " no-age posts with an extracted age\n";
    out << "  fn = " << joint->fn_not_extracted << " nothing extracted + "
        << joint->fn_misclassified << " misclassified as no-age\n";
  }
  return out.str();
}

}  // namespace selfage
