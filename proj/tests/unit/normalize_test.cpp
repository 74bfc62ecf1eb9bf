#include <doctest.h>

#include <random>
#include <string>
#include <vector>

#include "fixtures.hpp"
#include "selfage/normalize.hpp"

using namespace selfage;

namespace {

std::string join(const std::vector<std::string>& tokens) {
  std::string out;
  for (const auto& t : tokens) {
    if (!out.empty()) out += ' ';
    out += t;
  }
  return out;
}

}  // namespace

TEST_CASE("extraction normalization examples") {
  CHECK(normalize_for_extraction("the big 3-0") == "the big 30");
  CHECK(normalize_for_extraction("Two more years until my 21st birthday! Can't wait! #surprise") ==
        "2 more years until my 21st birthday! Can't wait! #surprise");
  CHECK(normalize_for_extraction("") == "");
  CHECK(normalize_for_extraction("I've turned 21 three times now.") == "I've turned 21 3 times now.");
  CHECK(normalize_for_extraction("my twenty-first birthday") == "my 21st birthday");
  CHECK(normalize_for_extraction("twenty one today") == "21 today");
  CHECK(normalize_for_extraction("Thirty-Five") == "35");
  CHECK(normalize_for_extraction("the big 3 0") == "the big 30");
  CHECK(normalize_for_extraction("21, 30") == "21, 30");
  CHECK(normalize_for_extraction("one hundred") == "1 hundred");
  CHECK(normalize_for_extraction("someone") == "someone");
  CHECK(normalize_for_extraction("@user21 I am 21 http://t.co/x99") == " I am 21 ");
  CHECK(normalize_for_extraction("mail me www.age30.com") == "mail me ");
}

TEST_CASE("extraction normalization keeps bare digit groups and maps them back") {
  const std::string source = "@bob2 I am 21 see https://t.co/77 and 35 or 3-0";
  const auto mapped = normalize_for_extraction_mapped(source);
  REQUIRE(mapped.source_offsets.size() == mapped.text.size() + 1);
  CHECK(mapped.source_offsets.back() == source.size());
  for (const std::string group : {"21", "35"}) {
    const auto at = mapped.text.find(group);
    REQUIRE(at != std::string::npos);
    CHECK(source.substr(mapped.source_offsets[at], 2) == group);
  }
  const auto joined = mapped.text.find("30");
  REQUIRE(joined != std::string::npos);
  CHECK(source.substr(mapped.source_offsets[joined], 3) == "3-0");
}

TEST_CASE("ngram normalization") {
  CHECK(normalize_for_ngram_classifier("Turning 21 TOMORROW!!! http://x.co @bff") ==
        std::vector<std::string>{"turn", "<num>", "tomorrow", "<url>", "<user>"});
  CHECK(normalize_for_ngram_classifier("birthday birthdays") ==
        std::vector<std::string>{"birthdai", "birthdai"});
  CHECK(normalize_for_ngram_classifier("").empty());
  CHECK(normalize_for_ngram_classifier("!!! ...").empty());
}

TEST_CASE("contextual normalization") {
  CHECK(normalize_for_contextual_classifier("I'm 21 TODAY @mom") == "i'm 21 today <user>");
  CHECK(normalize_for_contextual_classifier("no entities here") == "no entities here");
  CHECK(normalize_for_contextual_classifier("see https://a.b/c") == "see <url>");
}

TEST_CASE("number words") {
  CHECK(number_word_value("seven") == 7);
  CHECK(number_word_value("twenty") == 20);
  CHECK(number_word_value("nineteen") == 19);
  CHECK(number_word_value("hundred") == 0);
  CHECK(char_offset("caf\xc3\xa9 21", 6) == 5);
}

TEST_CASE("all three normalizations are idempotent on fuzzed text") {
  std::mt19937_64 rng(20190901);
  for (int i = 0; i < 10000; ++i) {
    const std::string text = fixtures::fuzz_text(rng);
    const auto once = normalize_for_extraction(text);
    REQUIRE_MESSAGE(normalize_for_extraction(once) == once, "input: [" << text << "]");
    const auto tokens = normalize_for_ngram_classifier(text);
    REQUIRE_MESSAGE(normalize_for_ngram_classifier(join(tokens)) == tokens, "input: [" << text << "]");
    const auto ctx = normalize_for_contextual_classifier(text);
    REQUIRE_MESSAGE(normalize_for_contextual_classifier(ctx) == ctx, "input: [" << text << "]");
  }
}
