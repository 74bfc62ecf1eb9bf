#include "selfage/retrieval.hpp"

#include <fstream>
#include <sstream>
#include <unordered_set>

#include <boost/regex.hpp>

#include "selfage/default_data.hpp"
#include "selfage/error.hpp"
#include "selfage/normalize.hpp"

namespace selfage {

namespace {

constexpr std::string_view kPatternHeader = "#selfage-patterns\t1";

constexpr const char* kTens = "twenty|thirty|forty|fifty|sixty|seventy|eighty|ninety";
constexpr const char* kUnits = "one|two|three|four|five|six|seven|eight|nine";
constexpr const char* kTeens =
    "ten|eleven|twelve|thirteen|fourteen|fifteen|sixteen|seventeen|eighteen|nineteen";
constexpr const char* kUnitOrdinals = "first|second|third|fourth|fifth|sixth|seventh|eighth|ninth";
constexpr const char* kTeenOrdinals =
    "tenth|eleventh|twelfth|thirteenth|fourteenth|fifteenth|sixteenth|seventeenth|"
    "eighteenth|nineteenth";
constexpr const char* kTensOrdinals =
    "twentieth|thirtieth|fortieth|fiftieth|sixtieth|seventieth|eightieth|ninetieth";

const std::string& age_words() {
  static const std::string s = std::string("(?:") + kTeens + "|(?:" + kTens + ")(?:[- ](?:" +
                               kUnits + "))?)";
  return s;
}

const std::string& age_macro() {
  static const std::string s =
      "(?:(?<![0-9])[1-9][0-9](?![0-9])|\\b" + age_words() + "\\b)";
  return s;
}

const std::string& ordinal_macro() {
  static const std::string s = std::string("(?:(?<![0-9])[1-9][0-9](?:st|nd|rd|th)\\b|\\b(?:") +
                               kTeenOrdinals + "|" + kTensOrdinals + "|(?:" + kTens + ")[- ](?:" +
                               kUnitOrdinals + "))\\b)";
  return s;
}

constexpr auto kFlags = boost::regex::perl | boost::regex::icase;

const boost::regex& retweet_regex() {
  static const boost::regex re(R"(^\s*RT\s*@)", boost::regex::perl);
  return re;
}

const boost::regex& age_mention_regex() {
  static const boost::regex re(age_macro(), kFlags);
  return re;
}

const boost::regex& attribution_regex() {
  static const boost::regex re(
      "–|—|(?:^|\\s)-+(?=\\s|$)|\\bvia\\b|\\bsays\\b|\\bsaid\\b|\\baccording\\s+to\\b|"
      "https?://|\\bwww\\.",
      kFlags);
  return re;
}

const boost::regex& first_person_regex() {
  static const boost::regex re(
      R"(\b(?:i|im|ive|me|my|mine|myself|we|us|our|ours|ourselves)\b)", kFlags);
  return re;
}

const boost::regex& trailing_url_regex() {
  static const boost::regex re(R"((?:https?://|\bwww\.)\S+\s*$)", kFlags);
  return re;
}

struct Span {
  std::size_t begin, end;  // contents between the quotes
};

std::vector<Span> quoted_spans(std::string_view text) {
  static constexpr std::string_view kOpenCurly = "\xE2\x80\x9C";
  static constexpr std::string_view kCloseCurly = "\xE2\x80\x9D";
  std::vector<Span> spans;
  std::size_t straight_open = std::string_view::npos;
  std::size_t curly_open = std::string_view::npos;
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (text[i] == '"') {
      if (straight_open == std::string_view::npos) {
        straight_open = i + 1;
      } else {
        spans.push_back({straight_open, i});
        straight_open = std::string_view::npos;
      }
    } else if (text.substr(i, 3) == kOpenCurly) {
      curly_open = i + 3;
      i += 2;
    } else if (text.substr(i, 3) == kCloseCurly) {
      if (curly_open != std::string_view::npos) spans.push_back({curly_open, i});
      curly_open = std::string_view::npos;
      i += 2;
    }
  }
  return spans;
}

bool is_quoted_report(std::string_view text) {
  for (const Span& span : quoted_spans(text)) {
    const std::string_view inside = text.substr(span.begin, span.end - span.begin);
    if (!boost::regex_search(inside.begin(), inside.end(), age_mention_regex())) continue;
    // Text outside this span, with the span blanked out.
    std::string outside(text);
    const std::size_t quote_begin = span.begin == 0 ? 0 : span.begin - 1;
    const std::size_t quote_end = std::min(text.size(), span.end + 1);
    for (std::size_t k = quote_begin; k < quote_end; ++k) outside[k] = ' ';
    if (boost::regex_search(outside, attribution_regex())) return true;
  }
  return false;
}

bool is_headline(std::string_view text) {
  return boost::regex_search(text.begin(), text.end(), trailing_url_regex()) &&
         !boost::regex_search(text.begin(), text.end(), first_person_regex());
}

std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t tab = line.find('\t', start);
    if (tab == std::string_view::npos) {
      fields.push_back(line.substr(start));
      return fields;
    }
    fields.push_back(line.substr(start, tab - start));
    start = tab + 1;
  }
}

boost::regex compile_one(const QueryPattern& pattern) {
  try {
    return boost::regex(expand_pattern_macros(pattern.source), kFlags);
  } catch (const boost::regex_error& e) {
    throw PatternError(pattern.id, e.what());
  }
}

}  // namespace

std::string_view to_string(DropDecision decision) {
  switch (decision) {
    case DropDecision::Keep: return "keep";
    case DropDecision::Retweet: return "retweet";
    case DropDecision::ReportedSpeech: return "reported_speech";
  }
  return "keep";
}

std::string expand_pattern_macros(std::string_view source) {
  std::string out;
  out.reserve(source.size() * 2);
  for (std::size_t i = 0; i < source.size();) {
    if (source.substr(i, 5) == "{AGE}") {
      out += age_macro();
      i += 5;
    } else if (source.substr(i, 5) == "{ORD}") {
      out += ordinal_macro();
      i += 5;
    } else {
      out += source[i++];
    }
  }
  return out;
}

struct CompiledPatternSet::Impl {
  std::vector<QueryPattern> patterns;
  boost::regex combined;
  // Capture group of each pattern's wrapper inside `combined`.
  std::vector<std::size_t> groups;
};

CompiledPatternSet::CompiledPatternSet() : impl_(std::make_unique<Impl>()) {}
CompiledPatternSet::~CompiledPatternSet() = default;
CompiledPatternSet::CompiledPatternSet(CompiledPatternSet&&) noexcept = default;
CompiledPatternSet& CompiledPatternSet::operator=(CompiledPatternSet&&) noexcept = default;

const std::vector<QueryPattern>& CompiledPatternSet::patterns() const { return impl_->patterns; }

CompiledPatternSet compile_pattern_set(std::span<const QueryPattern> patterns) {
  CompiledPatternSet set;
  auto& impl = *set.impl_;
  impl.patterns.assign(patterns.begin(), patterns.end());
  if (patterns.empty()) return set;

  std::string combined;
  std::size_t group = 1;
  std::unordered_set<std::string_view> ids;
  for (const QueryPattern& pattern : patterns) {
    if (pattern.id.empty()) throw PatternError("<unnamed>", "empty pattern id");
    if (!ids.insert(pattern.id).second) throw PatternError(pattern.id, "duplicate pattern id");
    const boost::regex single = compile_one(pattern);
    if (!combined.empty()) combined += '|';
    combined += '(';
    combined += expand_pattern_macros(pattern.source);
    combined += ')';
    impl.groups.push_back(group);
    group += 1 + single.mark_count();
  }
  try {
    impl.combined = boost::regex(combined, kFlags);
  } catch (const boost::regex_error& e) {
    // Individually valid patterns can still clash once combined (numbered backreferences).
    throw PatternError(patterns.front().id, std::string("combined pattern set: ") + e.what());
  }
  return set;
}

std::vector<RetrievalHit> CompiledPatternSet::match(std::string_view post_id,
                                                    std::string_view text) const {
  std::vector<RetrievalHit> hits;
  if (impl_->patterns.empty()) return hits;
  boost::cregex_iterator it(text.data(), text.data() + text.size(), impl_->combined);
  for (const boost::cregex_iterator end; it != end; ++it) {
    const auto& m = *it;
    if (m.length(0) == 0) continue;
    std::size_t which = 0;
    while (which + 1 < impl_->groups.size() && !m[static_cast<int>(impl_->groups[which])].matched) {
      ++which;
    }
    const auto begin = static_cast<std::size_t>(m[0].first - text.data());
    const auto end_byte = static_cast<std::size_t>(m[0].second - text.data());
    hits.push_back({std::string(post_id), impl_->patterns[which].id, char_offset(text, begin),
                    char_offset(text, end_byte)});
  }
  return hits;
}

bool CompiledPatternSet::matches_any(std::string_view text) const {
  if (impl_->patterns.empty()) return false;
  return boost::regex_search(text.begin(), text.end(), impl_->combined);
}

std::vector<RetrievalHit> match_candidates(const Post& post, const CompiledPatternSet& matcher) {
  return matcher.match(post.id, post.text);
}

DropDecision should_drop(const Post& post) {
  if (post.is_retweet ||
      boost::regex_search(post.text.begin(), post.text.end(), retweet_regex())) {
    return DropDecision::Retweet;
  }
  if (is_quoted_report(post.text) || is_headline(post.text)) return DropDecision::ReportedSpeech;
  return DropDecision::Keep;
}

std::vector<QueryPattern> parse_query_patterns(std::istream& in) {
  std::vector<QueryPattern> patterns;
  std::string raw;
  std::size_t line = 0;
  bool saw_header = false;
  while (std::getline(in, raw)) {
    ++line;
    std::string_view view = raw;
    if (!view.empty() && view.back() == '\r') view.remove_suffix(1);
    if (!saw_header) {
      if (view != kPatternHeader) {
        throw ParseError("pattern file must start with '#selfage-patterns<TAB>1'", line);
      }
      saw_header = true;
      continue;
    }
    if (view.empty() || view.front() == '#') continue;
    const auto fields = split_tabs(view);
    if (fields.size() < 2 || fields.size() > 3 || fields[0].empty() || fields[1].empty()) {
      throw ParseError("expected id<TAB>source<TAB>description", line);
    }
    patterns.push_back({std::string(fields[0]), std::string(fields[1]),
                        fields.size() == 3 ? std::string(fields[2]) : std::string()});
  }
  if (!saw_header) throw ParseError("empty pattern file", 0);
  return patterns;
}

std::vector<QueryPattern> load_query_patterns(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  return parse_query_patterns(in);
}

std::vector<QueryPattern> default_query_patterns() {
  std::istringstream in{std::string(default_query_patterns_text())};
  return parse_query_patterns(in);
}

}  // namespace selfage
