#include "selfage/extract.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_set>

#include <boost/regex.hpp>

#include "selfage/corpus.hpp"
#include "selfage/default_data.hpp"
#include "selfage/error.hpp"
#include "selfage/normalize.hpp"

namespace selfage {

namespace {

constexpr std::string_view kRulesHeader = "#selfage-rules\t1";

struct KindInfo {
  RuleKind kind;
  std::string_view name;
  std::vector<std::string_view> groups;
};

const std::vector<KindInfo>& kind_table() {
  static const std::vector<KindInfo> table{
      {RuleKind::Direct, "direct", {"age"}},
      {RuleKind::FutureCountdown, "future_countdown", {"qty", "unit", "age"}},
      {RuleKind::PastElapsed, "past_elapsed", {"qty", "age"}},
      {RuleKind::MaxOfAges, "max_of_ages", {"age", "age2"}},
      {RuleKind::AnticipatoryBirthday, "anticipatory_birthday", {"age"}},
      {RuleKind::TurnedRepeat, "turned_repeat", {"age", "times"}},
      {RuleKind::Fallback, "fallback", {}},
  };
  return table;
}

const KindInfo& info(RuleKind kind) {
  for (const KindInfo& k : kind_table()) {
    if (k.kind == kind) return k;
  }
  return kind_table().front();
}

// Names declared with (?<name>...) in a pattern source.
std::set<std::string> named_groups(std::string_view source) {
  std::set<std::string> names;
  for (std::size_t i = 0; i + 3 < source.size(); ++i) {
    if (source[i] == '\\') {
      ++i;
      continue;
    }
    if (source.compare(i, 3, "(?<") != 0) continue;
    std::size_t j = i + 3;
    if (j < source.size() && (source[j] == '=' || source[j] == '!')) continue;  // lookbehind
    const std::size_t close = source.find('>', j);
    if (close == std::string_view::npos) continue;
    names.emplace(source.substr(j, close - j));
  }
  return names;
}

bool parse_int(std::string_view text, std::int64_t& out) {
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
  return ec == std::errc{} && ptr == text.data() + text.size();
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

struct Fallback {
  int value;
  std::size_t begin, end;  // bytes
};

std::optional<Fallback> find_first_two_digit(std::string_view text) {
  for (std::size_t i = 0; i < text.size();) {
    if (text[i] < '0' || text[i] > '9') {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < text.size() && text[j] >= '0' && text[j] <= '9') ++j;
    if (j - i == 2) return Fallback{(text[i] - '0') * 10 + (text[i + 1] - '0'), i, j};
    i = j;
  }
  return std::nullopt;
}

bool in_age_range(std::int64_t age) { return age >= kMinAge && age <= kMaxAge; }

}  // namespace

std::string_view to_string(RuleKind kind) { return info(kind).name; }

RuleKind parse_rule_kind(std::string_view text) {
  for (const KindInfo& k : kind_table()) {
    if (k.name == text) return k.kind;
  }
  throw ValidationError("unknown rule kind '" + std::string(text) + "'");
}

int units_in_year(TimeUnit unit) {
  switch (unit) {
    case TimeUnit::Day: return 365;
    case TimeUnit::Week: return 52;
    case TimeUnit::Month: return 12;
    case TimeUnit::Year: return 1;
  }
  return 1;
}

std::optional<TimeUnit> parse_time_unit(std::string_view text) {
  std::string lower(text);
  for (char& c : lower) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  while (!lower.empty() && lower.back() == 's') lower.pop_back();
  if (lower == "day") return TimeUnit::Day;
  if (lower == "week") return TimeUnit::Week;
  if (lower == "month") return TimeUnit::Month;
  if (lower == "year" || lower == "yr") return TimeUnit::Year;
  return std::nullopt;
}

int countdown_age(std::int64_t quantity, TimeUnit unit, int future_age) {
  const std::int64_t per_year = units_in_year(unit);
  const std::int64_t years = (quantity + per_year - 1) / per_year;
  return static_cast<int>(future_age - years);
}

struct RuleCascade::Impl {
  std::vector<ExtractionRule> rules;
  std::vector<boost::regex> compiled;  // parallel to rules; empty for Fallback
};

RuleCascade::RuleCascade() : impl_(std::make_unique<Impl>()) {}
RuleCascade::~RuleCascade() = default;
RuleCascade::RuleCascade(RuleCascade&&) noexcept = default;
RuleCascade& RuleCascade::operator=(RuleCascade&&) noexcept = default;

const std::vector<ExtractionRule>& RuleCascade::rules() const { return impl_->rules; }

RuleCascade compile_rules(std::vector<ExtractionRule> rules) {
  std::unordered_set<std::string> ids;
  std::set<int> priorities;
  std::optional<ExtractionRule> fallback;
  std::vector<ExtractionRule> ordered;
  for (ExtractionRule& rule : rules) {
    if (rule.id.empty()) throw PatternError("<unnamed>", "empty rule id");
    if (!ids.insert(rule.id).second) throw PatternError(rule.id, "duplicate rule id");
    if (!priorities.insert(rule.priority).second) {
      throw PatternError(rule.id, "duplicate priority " + std::to_string(rule.priority));
    }
    if (rule.kind == RuleKind::Fallback) {
      if (fallback) throw PatternError(rule.id, "more than one fallback rule");
      fallback = std::move(rule);
      continue;
    }
    ordered.push_back(std::move(rule));
  }
  std::stable_sort(ordered.begin(), ordered.end(),
                   [](const ExtractionRule& a, const ExtractionRule& b) {
                     return a.priority < b.priority;
                   });
  if (!fallback) {
    const int last = ordered.empty() ? 0 : ordered.back().priority;
    fallback = ExtractionRule{"fallback_first_two_digit", last + 1, RuleKind::Fallback, "",
                              "first two-digit group"};
  }

  RuleCascade cascade;
  auto& impl = *cascade.impl_;
  for (ExtractionRule& rule : ordered) {
    const auto declared = named_groups(rule.source);
    std::string missing;
    for (const std::string_view group : info(rule.kind).groups) {
      if (!declared.contains(std::string(group))) {
        missing += missing.empty() ? "" : ", ";
        missing += group;
      }
    }
    if (!missing.empty()) {
      throw PatternError(rule.id, "kind " + std::string(to_string(rule.kind)) +
                                      " requires named groups missing from the pattern: " +
                                      missing);
    }
    try {
      impl.compiled.emplace_back(rule.source, boost::regex::perl | boost::regex::icase);
    } catch (const boost::regex_error& e) {
      throw PatternError(rule.id, e.what());
    }
    impl.rules.push_back(std::move(rule));
  }
  impl.rules.push_back(std::move(*fallback));
  impl.compiled.emplace_back();
  return cascade;
}

std::optional<Extraction> apply_cascade(std::string_view text, const RuleCascade& cascade) {
  const auto& impl = *cascade.impl_;
  boost::cmatch m;
  for (std::size_t r = 0; r < impl.rules.size(); ++r) {
    const ExtractionRule& rule = impl.rules[r];
    std::int64_t age = 0;
    std::size_t begin = 0;
    std::size_t end = 0;
    if (rule.kind == RuleKind::Fallback) {
      const auto found = find_first_two_digit(text);
      if (!found) return std::nullopt;
      age = found->value;
      begin = found->begin;
      end = found->end;
    } else {
      if (!boost::regex_search(text.data(), text.data() + text.size(), m, impl.compiled[r])) {
        continue;
      }
      begin = static_cast<std::size_t>(m[0].first - text.data());
      end = static_cast<std::size_t>(m[0].second - text.data());
      const auto group_int = [&](const char* name, std::int64_t& out) {
        const auto& sub = m[name];
        return sub.matched && parse_int(std::string_view(sub.first, sub.length()), out);
      };
      std::int64_t base = 0;
      if (!group_int("age", base)) return std::nullopt;
      switch (rule.kind) {
        case RuleKind::Direct:
          age = base;
          break;
        case RuleKind::AnticipatoryBirthday:
          age = base - 1;
          break;
        case RuleKind::FutureCountdown: {
          std::int64_t qty = 0;
          const auto& unit_text = m["unit"];
          const auto unit = parse_time_unit(std::string_view(unit_text.first, unit_text.length()));
          if (!group_int("qty", qty) || !unit || qty < 0 || qty > 1'000'000) return std::nullopt;
          if (base > 1'000) return std::nullopt;
          age = countdown_age(qty, *unit, static_cast<int>(base));
          break;
        }
        case RuleKind::PastElapsed: {
          std::int64_t qty = 0;
          if (!group_int("qty", qty) || qty > 1'000) return std::nullopt;
          age = qty + base;
          break;
        }
        case RuleKind::MaxOfAges: {
          age = base;
          for (int k = 2;; ++k) {
            const std::string name = "age" + std::to_string(k);
            if (m.named_subexpression_index(name.c_str(), name.c_str() + name.size()) < 0) break;
            std::int64_t other = 0;
            if (group_int(name.c_str(), other)) age = std::max(age, other);
          }
          break;
        }
        case RuleKind::TurnedRepeat: {
          std::int64_t times = 0;
          if (!group_int("times", times) || times > 1'000) return std::nullopt;
          age = base + (times - 1);
          break;
        }
        case RuleKind::Fallback:
          break;
      }
    }
    if (!in_age_range(age)) return std::nullopt;
    return Extraction{"", static_cast<int>(age), rule.id, char_offset(text, begin),
                      char_offset(text, end)};
  }
  return std::nullopt;
}

std::optional<int> fallback_first_two_digit(std::string_view normalized_text) {
  const auto found = find_first_two_digit(normalized_text);
  if (!found) return std::nullopt;
  return found->value;
}

std::optional<Extraction> extract_age(std::string_view post_id, std::string_view raw_text,
                                      const RuleCascade& cascade) {
  auto result = apply_cascade(normalize_for_extraction(raw_text), cascade);
  if (result) result->post_id = std::string(post_id);
  return result;
}

std::vector<ExtractionRule> parse_rules(std::istream& in) {
  std::vector<ExtractionRule> rules;
  std::string raw;
  std::size_t line = 0;
  bool saw_header = false;
  while (std::getline(in, raw)) {
    ++line;
    std::string_view view = raw;
    if (!view.empty() && view.back() == '\r') view.remove_suffix(1);
    if (!saw_header) {
      if (view != kRulesHeader) {
        throw ParseError("rule file must start with '#selfage-rules<TAB>1'", line);
      }
      saw_header = true;
      continue;
    }
    if (view.empty() || view.front() == '#') continue;
    const auto fields = split_tabs(view);
    if (fields.size() < 4 || fields.size() > 5) {
      throw ParseError("expected id<TAB>priority<TAB>kind<TAB>source<TAB>notes", line);
    }
    ExtractionRule rule;
    rule.id = std::string(fields[0]);
    std::int64_t priority = 0;
    if (!parse_int(fields[1], priority)) {
      throw ParseError("rule '" + rule.id + "': priority must be an integer", line);
    }
    rule.priority = static_cast<int>(priority);
    try {
      rule.kind = parse_rule_kind(fields[2]);
    } catch (const ValidationError& e) {
      throw ParseError("rule '" + rule.id + "': " + e.what(), line);
    }
    rule.source = std::string(fields[3]);
    if (rule.kind != RuleKind::Fallback && rule.source.empty()) {
      throw ParseError("rule '" + rule.id + "': empty pattern", line);
    }
    if (fields.size() == 5) rule.notes = std::string(fields[4]);
    rules.push_back(std::move(rule));
  }
  if (!saw_header) throw ParseError("empty rule file", 0);
  return rules;
}

RuleCascade load_rules(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  return compile_rules(parse_rules(in));
}

RuleCascade default_rules() {
  std::istringstream in{std::string(default_extraction_rules_text())};
  return compile_rules(parse_rules(in));
}

}  // namespace selfage
