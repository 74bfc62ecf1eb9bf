#include "selfage/normalize.hpp"

#include <array>
#include <utility>

#include <boost/regex.hpp>

#include "selfage/porter.hpp"

namespace selfage {

namespace {

constexpr const char* kUrlPattern =
    R"((?:https?|ftp)://\S+|\bwww\.\S+|)"
    R"((?<![\w@.\-/])[a-z0-9][a-z0-9\-]*(?:\.[a-z0-9\-]+)*)"
    R"(\.(?:com|net|org|edu|gov|io|co|ly|me|gl|be|tv|us|uk|ca|info|biz)(?![\w\-])(?:/\S*)?)";
constexpr const char* kMentionPattern = R"((?<!\w)@\w+)";

const boost::regex& entity_regex() {
  static const boost::regex re(std::string("(") + kUrlPattern + ")|(" + kMentionPattern + ")",
                               boost::regex::perl | boost::regex::icase);
  return re;
}

bool is_ascii_alpha(char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z'); }
bool is_ascii_digit(char c) { return c >= '0' && c <= '9'; }
bool is_ascii_alnum(char c) { return is_ascii_alpha(c) || is_ascii_digit(c); }
bool is_high(char c) { return static_cast<unsigned char>(c) >= 0x80; }
// Bytes that may be part of a word: ASCII alphanumerics, '_' and any non-ASCII byte.
bool is_word_byte(char c) { return is_ascii_alnum(c) || c == '_' || is_high(c); }
char ascii_lower(char c) { return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c; }

std::string lowercase(std::string_view text) {
  std::string out(text);
  for (char& c : out) c = ascii_lower(c);
  return out;
}

struct NumberWord {
  std::string_view word;
  int value;
  bool ordinal;
};

constexpr std::array<NumberWord, 54> kNumberWords{{
    {"one", 1, false},        {"two", 2, false},          {"three", 3, false},
    {"four", 4, false},       {"five", 5, false},         {"six", 6, false},
    {"seven", 7, false},      {"eight", 8, false},        {"nine", 9, false},
    {"ten", 10, false},       {"eleven", 11, false},      {"twelve", 12, false},
    {"thirteen", 13, false},  {"fourteen", 14, false},    {"fifteen", 15, false},
    {"sixteen", 16, false},   {"seventeen", 17, false},   {"eighteen", 18, false},
    {"nineteen", 19, false},  {"twenty", 20, false},      {"thirty", 30, false},
    {"forty", 40, false},     {"fifty", 50, false},       {"sixty", 60, false},
    {"seventy", 70, false},   {"eighty", 80, false},      {"ninety", 90, false},
    {"first", 1, true},       {"second", 2, true},        {"third", 3, true},
    {"fourth", 4, true},      {"fifth", 5, true},         {"sixth", 6, true},
    {"seventh", 7, true},     {"eighth", 8, true},        {"ninth", 9, true},
    {"tenth", 10, true},      {"eleventh", 11, true},     {"twelfth", 12, true},
    {"thirteenth", 13, true}, {"fourteenth", 14, true},   {"fifteenth", 15, true},
    {"sixteenth", 16, true},  {"seventeenth", 17, true},  {"eighteenth", 18, true},
    {"nineteenth", 19, true}, {"twentieth", 20, true},    {"thirtieth", 30, true},
    {"fortieth", 40, true},   {"fiftieth", 50, true},     {"sixtieth", 60, true},
    {"seventieth", 70, true}, {"eightieth", 80, true},    {"ninetieth", 90, true},
}};

const NumberWord* lookup_number_word(std::string_view lower) {
  for (const NumberWord& w : kNumberWords) {
    if (w.word == lower) return &w;
  }
  return nullptr;
}

std::string ordinal_suffix(int n) {
  const int tail = n % 100;
  if (tail >= 11 && tail <= 13) return "th";
  switch (n % 10) {
    case 1: return "st";
    case 2: return "nd";
    case 3: return "rd";
    default: return "th";
  }
}

// Accumulates output bytes together with the offset each came from.
class MappedBuilder {
 public:
  explicit MappedBuilder(std::size_t reserve) {
    text_.reserve(reserve);
    offsets_.reserve(reserve + 1);
  }
  void put(char c, std::size_t origin) {
    text_ += c;
    offsets_.push_back(origin);
  }
  void put(std::string_view s, std::size_t origin) {
    for (const char c : s) put(c, origin);
  }
  MappedText finish(std::size_t source_length) {
    offsets_.push_back(source_length);
    return {std::move(text_), std::move(offsets_)};
  }

 private:
  std::string text_;
  std::vector<std::size_t> offsets_;
};

MappedText remove_entities(std::string_view text) {
  MappedBuilder out(text.size());
  std::size_t pos = 0;
  boost::cregex_iterator it(text.data(), text.data() + text.size(), entity_regex());
  for (const boost::cregex_iterator end; it != end; ++it) {
    const auto start = static_cast<std::size_t>((*it)[0].first - text.data());
    for (; pos < start; ++pos) out.put(text[pos], pos);
    pos = static_cast<std::size_t>((*it)[0].second - text.data());
  }
  for (; pos < text.size(); ++pos) out.put(text[pos], pos);
  return out.finish(text.size());
}

// Standalone ASCII letter run starting at `pos`: returns its end, or npos when
// the run touches other word bytes ("one1", "twentyé").
std::size_t standalone_word_end(std::string_view text, std::size_t pos) {
  if (pos >= text.size() || !is_ascii_alpha(text[pos])) return std::string_view::npos;
  if (pos > 0 && is_word_byte(text[pos - 1])) return std::string_view::npos;
  std::size_t end = pos;
  while (end < text.size() && is_ascii_alpha(text[end])) ++end;
  if (end < text.size() && is_word_byte(text[end])) return std::string_view::npos;
  return end;
}

MappedText convert_number_words(std::string_view text) {
  MappedBuilder out(text.size());
  std::size_t pos = 0;
  while (pos < text.size()) {
    const std::size_t end = standalone_word_end(text, pos);
    if (end == std::string_view::npos) {
      // Copy the whole word-byte run (or the single separator byte).
      if (is_word_byte(text[pos])) {
        while (pos < text.size() && is_word_byte(text[pos])) {
          out.put(text[pos], pos);
          ++pos;
        }
      } else {
        out.put(text[pos], pos);
        ++pos;
      }
      continue;
    }
    const NumberWord* word = lookup_number_word(lowercase(text.substr(pos, end - pos)));
    if (word == nullptr) {
      for (; pos < end; ++pos) out.put(text[pos], pos);
      continue;
    }
    int value = word->value;
    bool ordinal = word->ordinal;
    std::size_t consumed = end;
    // Compound tens: "twenty-one", "twenty one", "twenty-first".
    if (!ordinal && value >= 20 && value % 10 == 0 && end + 1 < text.size() &&
        (text[end] == '-' || text[end] == ' ')) {
      const std::size_t unit_end = standalone_word_end(text, end + 1);
      if (unit_end != std::string_view::npos) {
        const NumberWord* unit =
            lookup_number_word(lowercase(text.substr(end + 1, unit_end - end - 1)));
        if (unit != nullptr && unit->value >= 1 && unit->value <= 9) {
          value += unit->value;
          ordinal = unit->ordinal;
          consumed = unit_end;
        }
      }
    }
    std::string digits = std::to_string(value);
    if (ordinal) digits += ordinal_suffix(value);
    out.put(digits, pos);
    pos = consumed;
  }
  return out.finish(text.size());
}

MappedText join_split_digits(std::string_view text) {
  struct Run {
    std::size_t begin, end;
  };
  std::vector<Run> runs;
  for (std::size_t i = 0; i < text.size();) {
    if (!is_ascii_digit(text[i])) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < text.size() && is_ascii_digit(text[j])) ++j;
    runs.push_back({i, j});
    i = j;
  }
  std::vector<bool> drop(text.size(), false);
  for (std::size_t r = 0; r + 1 < runs.size(); ++r) {
    const Run& a = runs[r];
    const Run& b = runs[r + 1];
    if (a.end - a.begin != 1 || b.end - b.begin != 1) continue;
    const std::size_t gap = b.begin - a.end;
    if (gap < 1 || gap > 2) continue;
    bool joinable = true;
    for (std::size_t k = a.end; k < b.begin; ++k) {
      if (is_word_byte(text[k])) joinable = false;
    }
    if (!joinable) continue;
    for (std::size_t k = a.end; k < b.begin; ++k) drop[k] = true;
  }
  MappedBuilder out(text.size());
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (!drop[i]) out.put(text[i], i);
  }
  return out.finish(text.size());
}

// Re-expresses `step` offsets (relative to `base.text`) against base's source.
MappedText compose(const MappedText& base, MappedText step) {
  for (std::size_t& offset : step.source_offsets) offset = base.source_offsets[offset];
  return step;
}

MappedText extraction_pass(const MappedText& input) {
  MappedText current = compose(input, remove_entities(input.text));
  current = compose(current, convert_number_words(current.text));
  return compose(current, join_split_digits(current.text));
}

MappedText identity_map(std::string_view text) {
  MappedText mapped{std::string(text), std::vector<std::size_t>(text.size() + 1)};
  for (std::size_t i = 0; i <= text.size(); ++i) mapped.source_offsets[i] = i;
  return mapped;
}

std::string stem_to_fixpoint(std::string word) {
  while (true) {
    std::string next = porter_stem(word);
    if (next == word) return word;
    word = std::move(next);
  }
}

void tokenize_plain(std::string_view lower, std::vector<std::string>& tokens) {
  std::size_t i = 0;
  while (i < lower.size()) {
    const char c = lower[i];
    if (c == '<') {
      bool matched = false;
      for (const std::string_view sentinel : {kUrlToken, kUserToken, kNumToken}) {
        if (lower.substr(i, sentinel.size()) == sentinel) {
          tokens.emplace_back(sentinel);
          i += sentinel.size();
          matched = true;
          break;
        }
      }
      if (matched) continue;
      ++i;
    } else if (is_ascii_digit(c)) {
      while (i < lower.size() && is_ascii_digit(lower[i])) ++i;
      tokens.emplace_back(kNumToken);
    } else if (is_ascii_alpha(c) || is_high(c)) {
      const std::size_t start = i;
      while (i < lower.size() && (is_ascii_alpha(lower[i]) || is_high(lower[i]))) ++i;
      tokens.push_back(stem_to_fixpoint(std::string(lower.substr(start, i - start))));
    } else {
      ++i;
    }
  }
}

std::string replace_entities(std::string_view lower) {
  std::string out;
  out.reserve(lower.size());
  std::size_t pos = 0;
  boost::cregex_iterator it(lower.data(), lower.data() + lower.size(), entity_regex());
  for (const boost::cregex_iterator end; it != end; ++it) {
    const auto start = static_cast<std::size_t>((*it)[0].first - lower.data());
    out.append(lower.substr(pos, start - pos));
    out.append((*it)[1].matched ? kUrlToken : kUserToken);
    pos = static_cast<std::size_t>((*it)[0].second - lower.data());
  }
  out.append(lower.substr(pos));
  return out;
}

}  // namespace

int number_word_value(std::string_view lowercase_word) {
  const NumberWord* w = lookup_number_word(lowercase_word);
  return w ? w->value : 0;
}

MappedText normalize_for_extraction_mapped(std::string_view text) {
  MappedText current = identity_map(text);
  // Every pass that changes the text also shortens it, so this terminates.
  while (true) {
    MappedText next = extraction_pass(current);
    if (next.text == current.text) return current;
    current = std::move(next);
  }
}

std::string normalize_for_extraction(std::string_view text) {
  return normalize_for_extraction_mapped(text).text;
}

std::vector<std::string> normalize_for_ngram_classifier(std::string_view text) {
  const std::string lower = lowercase(text);
  std::vector<std::string> tokens;
  std::size_t pos = 0;
  boost::cregex_iterator it(lower.data(), lower.data() + lower.size(), entity_regex());
  for (const boost::cregex_iterator end; it != end; ++it) {
    const auto start = static_cast<std::size_t>((*it)[0].first - lower.data());
    tokenize_plain(std::string_view(lower).substr(pos, start - pos), tokens);
    tokens.emplace_back((*it)[1].matched ? kUrlToken : kUserToken);
    pos = static_cast<std::size_t>((*it)[0].second - lower.data());
  }
  tokenize_plain(std::string_view(lower).substr(pos), tokens);
  return tokens;
}

std::string normalize_for_contextual_classifier(std::string_view text) {
  std::string current = lowercase(text);
  // Replacement can expose a new mention ("@@a@b"), so iterate to a fixpoint.
  for (int pass = 0; pass < 16; ++pass) {
    std::string next = replace_entities(current);
    if (next == current) break;
    current = std::move(next);
  }
  return current;
}

std::size_t char_offset(std::string_view utf8, std::size_t byte_offset) {
  std::size_t count = 0;
  for (std::size_t i = 0; i < byte_offset && i < utf8.size(); ++i) {
    if ((static_cast<unsigned char>(utf8[i]) & 0xC0) != 0x80) ++count;
  }
  return count;
}

}  // namespace selfage
