#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "selfage/corpus.hpp"
#include "selfage/prediction.hpp"

namespace selfage {

struct EvalCounts {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;

  EvalCounts& operator+=(const EvalCounts& other) {
    tp += other.tp;
    fp += other.fp;
    fn += other.fn;
    return *this;
  }
  friend bool operator==(const EvalCounts&, const EvalCounts&) = default;
};

struct Metrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

// 0/0 ratios are reported as 0.
Metrics prf(const EvalCounts& counts);

// Round half to even at `decimals` places, for display.
double round_half_even(double value, int decimals);

struct ClassificationBreakdown {
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
  EvalCounts counts() const { return {tp, fp, fn}; }
  std::size_t total() const { return tp + fp + fn + tn; }
};

// Joint classification + extraction cells. A true positive needs both the
// right class and the right age.
struct JointBreakdown {
  std::size_t tp = 0;
  std::size_t fp_wrong_age = 0;         // gold Age, predicted Age, wrong age
  std::size_t fp_no_age_extracted = 0;  // gold NoAge, predicted Age, some age extracted
  std::size_t fn_not_extracted = 0;     // gold Age, predicted Age, nothing extracted
  std::size_t fn_misclassified = 0;     // gold Age, predicted NoAge
  std::size_t tn = 0;                   // everything else
  EvalCounts counts() const {
    return {tp, fp_wrong_age + fp_no_age_extracted, fn_not_extracted + fn_misclassified};
  }
  std::size_t total() const {
    return tp + fp_wrong_age + fp_no_age_extracted + fn_not_extracted + fn_misclassified + tn;
  }
};

// Prediction ids must be in bijection with gold ids (ValidationError otherwise).
ClassificationBreakdown classification_breakdown(std::span<const Prediction> predictions,
                                                 std::span<const LabeledPost> gold);
EvalCounts classification_eval(std::span<const Prediction> predictions,
                               std::span<const LabeledPost> gold);

JointBreakdown joint_breakdown(std::span<const ExtractionResult> results,
                               std::span<const LabeledPost> gold);
EvalCounts joint_extraction_eval(std::span<const ExtractionResult> results,
                                 std::span<const LabeledPost> gold);

// items x categories table of rater counts; every row sums to raters_per_item.
class RatingMatrix {
 public:
  // Throws ValidationError on ragged rows, fewer than two raters, no items or
  // rows summing to a different rater count.
  explicit RatingMatrix(std::vector<std::vector<std::size_t>> counts);

  // One row per item, one label per rater; categories are the distinct labels
  // in order of first appearance.
  static RatingMatrix from_ratings(const std::vector<std::vector<std::string>>& ratings);

  std::size_t items() const { return counts_.size(); }
  std::size_t categories() const { return counts_.front().size(); }
  std::size_t raters_per_item() const { return raters_; }
  const std::vector<std::vector<std::size_t>>& counts() const { return counts_; }

 private:
  std::vector<std::vector<std::size_t>> counts_;
  std::size_t raters_ = 0;
};

// (P - Pe) / (1 - Pe). When Pe == 1 every rating falls in one category, so
// agreement is perfect and the result is 1.
double fleiss_kappa(const RatingMatrix& matrix);

// Machine-readable report: raw counts, raw metrics and 3-decimal display values.
nlohmann::json to_json(const ClassificationBreakdown& breakdown);
nlohmann::json to_json(const JointBreakdown& breakdown);
std::string format_table(const ClassificationBreakdown& classification,
                         const JointBreakdown* joint);

}  // namespace selfage
