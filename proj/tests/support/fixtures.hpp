#pragma once

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "selfage/corpus.hpp"

namespace fixtures {

struct AgeExample {
  const char* text;
  int age;  // 0 when the example carries no age
};

// Annotated reference examples, verbatim.
inline const std::vector<AgeExample> kAnnotated = {
    {"It's my 21st birthday today. But who cares..... ITS FINALLY AUGUST!!!!", 21},
    {"It's crazy, tomorrow I'll be 20. I'm getting so OLD.", 19},
    {"can't believe im going to be 21 i want to be a teenager again", 20},
    {"I graduate in May only focusing on me and my child.. watch me at 21", 0},
    {"Had just turned 18 then found out I was pregnant 2 weeks later", 0},
};

inline const std::vector<AgeExample> kRuleExamples = {
    {"Two more years until my 21st birthday! Can't wait! #surprise", 19},
    {"It's my 18th birthday! And we have to go to school", 18},
    {"excited for my 18th but also don't want to grow up", 17},
    {"I started having #depression 20 yrs ago at the age of 19.", 39},
    {"I started at 28 and I'm currently doing a PhD at 35.", 35},
    {"i feel like i'm going through a midlife crisis at the age of 21", 21},
    {"I've turned 21 three times now. I don't think I can turn it a 4th.", 23},
    {"I'm right there with you. Recently turned 47.", 47},
    {"I was just reminded that I'm turning 18 in 3 weeks I feel old", 17},
    {"I'm going out for the first time tonight since turning 21", 21},
};

// Error analysis examples; age is what the shipped cascade predicts.
inline const std::vector<AgeExample> kErrorExamples = {
    {"Blessed to see my 22nd birthday! I feel good to be alive.", 21},
    {"The most exciting part of turning 25 is that my insurance is dropping 20 bucks per month.",
     24},
    {"Got to love Facebook for reminding me of my 21st bday cruise", 20},
    {"Who will be going to two 21st birthdays next week and doesn't have anything nothing to "
     "wear?! ME",
     20},
    {"Big 30 coming up on the 31st", 29},
};

inline selfage::Post make_post(std::string id, std::string text, std::string user = "u1",
                               std::int64_t epoch_seconds = 1567339200, bool retweet = false) {
  return {std::move(id), std::move(user),
          selfage::Timestamp{std::chrono::seconds{epoch_seconds}}, std::move(text), retweet};
}

// Two classes drawn from disjoint vocabularies; half Age, half NoAge.
inline std::vector<selfage::LabeledPost> separable_corpus(std::size_t n, std::uint64_t seed) {
  static const std::vector<std::string> age_words = {
      "turned", "birthday", "old", "years", "bday", "celebrate", "cake", "candles"};
  static const std::vector<std::string> other_words = {
      "traffic", "weather", "coffee", "meeting", "train", "rain", "office", "lunch"};
  std::mt19937_64 rng(seed);
  std::vector<selfage::LabeledPost> out;
  for (std::size_t i = 0; i < n; ++i) {
    const bool age = i % 2 == 0;
    const auto& words = age ? age_words : other_words;
    std::string text;
    const std::size_t len = 4 + rng() % 5;
    for (std::size_t k = 0; k < len; ++k) {
      if (k) text += ' ';
      text += words[rng() % words.size()];
    }
    if (age) text += " " + std::to_string(10 + rng() % 90);
    const int years = 10 + static_cast<int>(rng() % 90);
    out.push_back({make_post("s" + std::to_string(i), text, "u" + std::to_string(i % 17)),
                   age ? selfage::Label::Age : selfage::Label::NoAge,
                   age ? std::optional<int>(years) : std::nullopt});
  }
  return out;
}

// Random text built from fragments that exercise every normalization step.
inline std::string fuzz_text(std::mt19937_64& rng) {
  static const std::vector<std::string> pieces = {
      "twenty", "-", " ", "one", "first", "Ninety", "nine", "ninth", "3", "0", "21", "150",
      "@", "@bob", "http://x.co/a", "https://t.co/Zz9", "www.site.org", "site.com", ".com",
      "a", "Z", "caf\xc3\xa9", "\xe2\x80\x94", "21st", "  ", "RT", "\"", "'", "!!", ".", "  -  ",
      "birthdays", "turning", "years", "<url>", "<num>", "<user>", "\t", "\n", "_", "x1", "1x",
      "twenty-first", "thirty one", "Eleven", "seventy", "-seven", "hundred", "0-", "-0"};
  std::string out;
  const int n = static_cast<int>(rng() % 12);
  for (int i = 0; i < n; ++i) {
    if (rng() % 5 == 0) {
      out += static_cast<char>(32 + rng() % 95);
    } else {
      out += pieces[rng() % pieces.size()];
    }
  }
  return out;
}

// Unique scratch directory removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::mt19937_64 rng{std::random_device{}()};
    path_ = std::filesystem::temp_directory_path() /
            ("selfage-test-" + std::to_string(rng()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  out << content;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace fixtures
