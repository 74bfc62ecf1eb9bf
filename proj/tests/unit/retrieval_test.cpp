#include <doctest.h>

#include <cctype>
#include <random>
#include <sstream>

#include "fixtures.hpp"
#include "selfage/error.hpp"
#include "selfage/retrieval.hpp"

using namespace selfage;
using fixtures::make_post;

namespace {

// Independent scan for a maximal digit run of length two whose value is 10-99.
bool has_bounded_two_digit_group(const std::string& text) {
  std::size_t i = 0;
  while (i < text.size()) {
    if (!std::isdigit(static_cast<unsigned char>(text[i]))) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < text.size() && std::isdigit(static_cast<unsigned char>(text[j]))) ++j;
    if (j - i == 2 && text[i] != '0') return true;
    i = j;
  }
  return false;
}

const CompiledPatternSet& shipped() {
  static const CompiledPatternSet set = compile_pattern_set(default_query_patterns());
  return set;
}

}  // namespace

TEST_CASE("shipped patterns retrieve every reference example") {
  std::vector<fixtures::AgeExample> all = fixtures::kAnnotated;
  all.insert(all.end(), fixtures::kRuleExamples.begin(), fixtures::kRuleExamples.end());
  all.insert(all.end(), fixtures::kErrorExamples.begin(), fixtures::kErrorExamples.end());
  int n = 0;
  for (const auto& ex : all) {
    const auto hits = match_candidates(make_post("p" + std::to_string(n++), ex.text), shipped());
    CHECK_MESSAGE(!hits.empty(), ex.text);
  }
}

TEST_CASE("non-age text is not retrieved") {
  CHECK(match_candidates(make_post("a", "hello world"), shipped()).empty());
  const std::string big = "I am 150 years old";
  CHECK_FALSE(has_bounded_two_digit_group(big));
  CHECK(match_candidates(make_post("b", big), shipped()).empty());
  CHECK(match_candidates(make_post("c", "I am 5 years old"), shipped()).empty());
  CHECK(match_candidates(make_post("d", "I am 2021 years old"), shipped()).empty());
}

TEST_CASE("hits carry pattern ids and code point spans") {
  const std::string text = "caf\xc3\xa9! It's my 21st birthday";
  const auto hits = match_candidates(make_post("x", text), shipped());
  REQUIRE(!hits.empty());
  CHECK(hits.front().post_id == "x");
  CHECK(hits.front().pattern_id == "my_ordinal");
  CHECK(hits.front().begin == 11);  // "café" is 4 code points, 5 bytes
  for (std::size_t i = 1; i < hits.size(); ++i) CHECK(hits[i - 1].end <= hits[i].begin);
}

TEST_CASE("digit-bearing hits only carry bounded groups") {
  std::mt19937_64 rng(7);
  const std::vector<std::string> words = {"i'm", "i am", "turned", "my", "at", "years old",
                                          "birthday", "the big", " ", "th", "st", "yrs"};
  for (int trial = 0; trial < 3000; ++trial) {
    std::string text;
    for (int k = 0; k < 6; ++k) {
      if (rng() % 2) {
        text += std::to_string(rng() % 1200);
      } else {
        text += words[rng() % words.size()];
      }
      text += ' ';
    }
    const auto post = make_post("f", text);
    const auto hits = match_candidates(post, shipped());
    if (!hits.empty()) {
      // Any retrieved text must contain a bounded group or a spelled-out number.
      CHECK_MESSAGE(has_bounded_two_digit_group(text), text);
    }
    CHECK(match_candidates(post, shipped()) == hits);
  }
}

TEST_CASE("compile errors name the pattern") {
  const std::vector<QueryPattern> bad = {{"ok", "\\bfine\\b", ""}, {"broken", "(unclosed", ""}};
  try {
    compile_pattern_set(bad);
    FAIL("expected a pattern error");
  } catch (const PatternError& e) {
    CHECK(e.id() == "broken");
  }
  const auto none = compile_pattern_set({});
  CHECK(none.match("x", "I am 21").empty());
  CHECK_FALSE(none.matches_any("I am 21"));
}

TEST_CASE("pattern files") {
  std::istringstream good("#selfage-patterns\t1\n# comment\n\nmine\tI am {AGE}\tdesc\n");
  const auto patterns = parse_query_patterns(good);
  REQUIRE(patterns.size() == 1);
  CHECK(patterns[0].id == "mine");
  CHECK(patterns[0].description == "desc");
  const auto set = compile_pattern_set(patterns);
  CHECK(set.matches_any("i am TWENTY-one"));
  CHECK_FALSE(set.matches_any("I am 100"));

  std::istringstream no_header("mine\tI am {AGE}\tdesc\n");
  CHECK_THROWS_AS(parse_query_patterns(no_header), ParseError);
  std::istringstream dup("#selfage-patterns\t1\na\tx\t\na\ty\t\n");
  CHECK_THROWS_AS(compile_pattern_set(parse_query_patterns(dup)), PatternError);
}

TEST_CASE("drop decisions") {
  auto rt = make_post("1", "I'm 21 today");
  rt.is_retweet = true;
  CHECK(should_drop(rt) == DropDecision::Retweet);
  CHECK(should_drop(make_post("2", "RT @someone: I'm turning 21")) == DropDecision::Retweet);
  CHECK(should_drop(make_post("3", "\"I just turned 30\" \xe2\x80\x94 celebrity magazine https://t.co/x")) ==
        DropDecision::ReportedSpeech);
  CHECK(should_drop(make_post("4", "\"I just turned 30\" says the singer")) ==
        DropDecision::ReportedSpeech);
  CHECK(should_drop(make_post("5", "Local man turns 99 https://t.co/abc")) ==
        DropDecision::ReportedSpeech);
  CHECK(should_drop(make_post("6", "I just turned 30 and feel great")) == DropDecision::Keep);
  CHECK(should_drop(make_post("7", "my \"big\" 30th is coming")) == DropDecision::Keep);
  CHECK(should_drop(make_post("8", "I turned 30 https://t.co/pic")) == DropDecision::Keep);
  for (const auto& ex : fixtures::kRuleExamples) {
    CHECK_MESSAGE(should_drop(make_post("t", ex.text)) == DropDecision::Keep, ex.text);
  }
}
