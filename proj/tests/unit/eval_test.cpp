#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <random>

#include "fixtures.hpp"
#include "selfage/error.hpp"
#include "selfage/eval.hpp"

using namespace selfage;
using fixtures::make_post;

namespace {

LabeledPost gold(const std::string& id, std::optional<int> age) {
  return {make_post(id, ""), age ? Label::Age : Label::NoAge, age};
}

ExtractionResult result(const std::string& id, Label label, std::optional<int> age) {
  ExtractionResult r{{id, label, label == Label::Age ? 1.0 : -1.0}, std::nullopt};
  if (age) r.extraction = Extraction{id, *age, "rule", 0, 0};
  return r;
}

// Fleiss' kappa straight from raw per-item ratings.
double kappa_oracle(const std::vector<std::vector<std::string>>& ratings) {
  std::map<std::string, double> totals;
  double p_bar = 0.0;
  const double n = static_cast<double>(ratings.front().size());
  for (const auto& item : ratings) {
    std::map<std::string, double> counts;
    for (const auto& r : item) counts[r] += 1.0;
    double agree = 0.0;
    for (const auto& [c, k] : counts) {
      agree += k * (k - 1.0);
      totals[c] += k;
    }
    p_bar += agree / (n * (n - 1.0));
  }
  p_bar /= static_cast<double>(ratings.size());
  double pe = 0.0;
  for (const auto& [c, k] : totals) {
    const double p = k / (n * static_cast<double>(ratings.size()));
    pe += p * p;
  }
  return (p_bar - pe) / (1.0 - pe);
}

}  // namespace

TEST_CASE("prf") {
  const auto m = prf({581, 141, 55});
  CHECK(m.precision == doctest::Approx(581.0 / 722.0).epsilon(1e-15));
  CHECK(m.recall == doctest::Approx(581.0 / 636.0).epsilon(1e-15));
  CHECK(m.f1 == doctest::Approx(1162.0 / 1358.0).epsilon(1e-15));
  CHECK(round_half_even(m.precision, 3) == doctest::Approx(0.805));
  CHECK(round_half_even(m.recall, 3) == doctest::Approx(0.914));
  CHECK(std::fabs(m.f1 - 2 * m.precision * m.recall / (m.precision + m.recall)) <= 1e-12);

  const auto perfect = prf({10, 0, 0});
  CHECK(perfect.precision == 1.0);
  CHECK(perfect.recall == 1.0);
  CHECK(perfect.f1 == 1.0);
  const auto empty = prf({0, 0, 0});
  CHECK(empty.precision == 0.0);
  CHECK(empty.recall == 0.0);
  CHECK(empty.f1 == 0.0);

  CHECK(round_half_even(0.0625, 3) == doctest::Approx(0.062));
  CHECK(round_half_even(0.0635, 3) == doctest::Approx(0.064));
}

TEST_CASE("harmonic-mean identity on random counts") {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 1000; ++i) {
    const EvalCounts c{rng() % 1000 + 1, rng() % 1000, rng() % 1000};
    const auto m = prf(c);
    CHECK(std::fabs(m.f1 - 2 * m.precision * m.recall / (m.precision + m.recall)) <= 1e-12);
    CHECK(m.precision <= 1.0);
    CHECK(m.recall <= 1.0);
  }
}

TEST_CASE("classification eval") {
  std::vector<LabeledPost> g;
  std::vector<Prediction> all_age;
  for (int i = 0; i < 10; ++i) {
    g.push_back(gold("p" + std::to_string(i), i < 3 ? std::optional<int>(20) : std::nullopt));
    all_age.push_back({"p" + std::to_string(i), Label::Age, 1.0});
  }
  CHECK(classification_eval(all_age, g) == EvalCounts{3, 7, 0});

  std::vector<Prediction> exact;
  for (const auto& x : g) exact.push_back({x.post.id, x.label, 0.0});
  const auto c = classification_eval(exact, g);
  CHECK(c.fp == 0);
  CHECK(c.fn == 0);

  // One item per cell of the 2x2 table, predictions in a different order.
  const std::vector<LabeledPost> four = {gold("tp", 20), gold("fp", std::nullopt), gold("fn", 30),
                                         gold("tn", std::nullopt)};
  const std::vector<Prediction> preds = {{"tn", Label::NoAge, -1},
                                         {"fn", Label::NoAge, -1},
                                         {"tp", Label::Age, 1},
                                         {"fp", Label::Age, 1}};
  EvalCounts oracle;
  for (const auto& item : four) {
    const auto p = std::find_if(preds.begin(), preds.end(),
                                [&](const Prediction& x) { return x.post_id == item.post.id; });
    if (item.label == Label::Age && p->label == Label::Age) ++oracle.tp;
    if (item.label == Label::NoAge && p->label == Label::Age) ++oracle.fp;
    if (item.label == Label::Age && p->label == Label::NoAge) ++oracle.fn;
  }
  CHECK(oracle == EvalCounts{1, 1, 1});
  CHECK(classification_eval(preds, four) == oracle);
  const auto b = classification_breakdown(preds, four);
  CHECK(b.tn == 1);
  CHECK(b.total() == four.size());

  const std::vector<Prediction> short_preds(preds.begin(), preds.begin() + 3);
  CHECK_THROWS_AS(classification_eval(short_preds, four), ValidationError);
  std::vector<Prediction> renamed = preds;
  renamed[0].post_id = "other";
  CHECK_THROWS_AS(classification_eval(renamed, four), ValidationError);
}

TEST_CASE("joint taxonomy") {
  const std::vector<LabeledPost> g = {gold("tp", 21),           gold("wrong_age", 22),
                                      gold("noage_extracted", std::nullopt),
                                      gold("not_extracted", 23), gold("misclassified", 24),
                                      gold("tn", std::nullopt)};
  const std::vector<ExtractionResult> r = {
      result("tp", Label::Age, 21),
      result("wrong_age", Label::Age, 21),
      result("noage_extracted", Label::Age, 30),
      result("not_extracted", Label::Age, std::nullopt),
      result("misclassified", Label::NoAge, std::nullopt),
      result("tn", Label::NoAge, std::nullopt),
  };
  // Direct reading of the definitions, item by item.
  EvalCounts oracle;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const bool gold_age = g[i].label == Label::Age;
    const bool pred_age = r[i].prediction.label == Label::Age;
    const bool extracted = r[i].extraction.has_value();
    if (gold_age && pred_age && extracted && r[i].extraction->age == *g[i].age) ++oracle.tp;
    if (gold_age && pred_age && extracted && r[i].extraction->age != *g[i].age) ++oracle.fp;
    if (!gold_age && pred_age && extracted) ++oracle.fp;
    if (gold_age && pred_age && !extracted) ++oracle.fn;
    if (gold_age && !pred_age) ++oracle.fn;
  }
  CHECK(oracle == EvalCounts{1, 2, 2});
  CHECK(joint_extraction_eval(r, g) == oracle);

  const auto b = joint_breakdown(r, g);
  CHECK(b.fp_wrong_age == 1);
  CHECK(b.fp_no_age_extracted == 1);
  CHECK(b.fn_not_extracted == 1);
  CHECK(b.fn_misclassified == 1);
  CHECK(b.tn == 1);
  CHECK(b.total() == g.size());

  std::vector<Prediction> preds;
  for (const auto& x : r) preds.push_back(x.prediction);
  CHECK(joint_extraction_eval(r, g).tp <= classification_eval(preds, g).tp);
  CHECK(classification_breakdown(preds, g).total() == g.size());

  const auto j = to_json(b);
  CHECK(j["counts"]["tp"] == 1);
  CHECK(j["counts"]["fp"] == 2);
  CHECK(j["counts"]["fn"] == 2);
  CHECK(!format_table(classification_breakdown(preds, g), &b).empty());

  std::vector<LabeledPost> correct_gold;
  std::vector<ExtractionResult> correct;
  for (int i = 0; i < 5; ++i) {
    const std::string id = "a" + std::to_string(i);
    correct_gold.push_back(gold(id, 20 + i));
    correct.push_back(result(id, Label::Age, 20 + i));
  }
  CHECK(joint_extraction_eval(correct, correct_gold) == EvalCounts{5, 0, 0});
}

TEST_CASE("fleiss kappa") {
  const RatingMatrix perfect({{3, 0}, {0, 3}, {3, 0}});
  CHECK(fleiss_kappa(perfect) == doctest::Approx(1.0).epsilon(1e-12));
  const RatingMatrix single({{2, 0}, {2, 0}});
  CHECK(fleiss_kappa(single) == 1.0);

  const std::vector<std::vector<std::string>> disagree = {{"A", "B"}, {"B", "A"}};
  const double expected = kappa_oracle(disagree);
  CHECK(expected == doctest::Approx(-1.0));
  CHECK(std::fabs(fleiss_kappa(RatingMatrix::from_ratings(disagree)) - expected) <= 1e-9);

  CHECK_THROWS_AS(RatingMatrix({{2, 0}, {1, 0}}), ValidationError);
  CHECK_THROWS_AS(RatingMatrix({{1, 0}, {0, 1}}), ValidationError);
  CHECK_THROWS_AS(RatingMatrix({}), ValidationError);

  // Random matrices: oracle agreement, item and category permutation invariance.
  std::mt19937_64 rng(11);
  const std::vector<std::string> cats = {"a", "b", "c", "d"};
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t items = 2 + rng() % 20;
    const std::size_t raters = 2 + rng() % 5;
    std::vector<std::vector<std::string>> ratings(items);
    for (auto& row : ratings) {
      for (std::size_t r = 0; r < raters; ++r) row.push_back(cats[rng() % cats.size()]);
    }
    const auto m = RatingMatrix::from_ratings(ratings);
    const double k = fleiss_kappa(m);
    const double o = kappa_oracle(ratings);
    if (std::isfinite(o)) CHECK(std::fabs(k - o) <= 1e-9);

    auto counts = m.counts();
    std::shuffle(counts.begin(), counts.end(), rng);
    for (auto& row : counts) std::reverse(row.begin(), row.end());
    CHECK(std::fabs(fleiss_kappa(RatingMatrix(counts)) - k) <= 1e-12);
  }
}
