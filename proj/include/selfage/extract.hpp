#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <istream>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace selfage {

// How a rule turns its named capture groups into an age.
//   Direct               age
//   FutureCountdown      age - ceil(qty / units_in_year(unit))
//   PastElapsed          qty + age
//   MaxOfAges            max(age, age2, ...)
//   AnticipatoryBirthday age - 1
//   TurnedRepeat         age + (times - 1)
//   Fallback             first two-digit group (no pattern)
enum class RuleKind {
  Direct,
  FutureCountdown,
  PastElapsed,
  MaxOfAges,
  AnticipatoryBirthday,
  TurnedRepeat,
  Fallback,
};

std::string_view to_string(RuleKind kind);
RuleKind parse_rule_kind(std::string_view text);

enum class TimeUnit { Day, Week, Month, Year };

// 365, 52, 12, 1.
int units_in_year(TimeUnit unit);
// Accepts day/week/month/year/yr with an optional plural 's', any case.
std::optional<TimeUnit> parse_time_unit(std::string_view text);

int countdown_age(std::int64_t quantity, TimeUnit unit, int future_age);

struct ExtractionRule {
  std::string id;
  int priority = 0;  // lower fires first
  RuleKind kind = RuleKind::Direct;
  std::string source;
  std::string notes;
};

struct Extraction {
  std::string post_id;
  int age = 0;
  std::string rule_id;
  // Half-open code point offsets into the normalized text.
  std::size_t begin = 0;
  std::size_t end = 0;

  friend bool operator==(const Extraction&, const Extraction&) = default;
};

// Compiled, priority-ordered rules; the Fallback rule is always last.
// Immutable and safe to share between threads.
class RuleCascade {
 public:
  RuleCascade();
  ~RuleCascade();
  RuleCascade(RuleCascade&&) noexcept;
  RuleCascade& operator=(RuleCascade&&) noexcept;

  const std::vector<ExtractionRule>& rules() const;

 private:
  friend RuleCascade compile_rules(std::vector<ExtractionRule> rules);
  friend std::optional<Extraction> apply_cascade(std::string_view, const RuleCascade&);
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// Sorts by priority and validates: unique priorities and ids, compiling
// patterns, named groups matching the kind (qty/unit/age/age2/times). A
// Fallback rule is appended when absent. Throws PatternError naming the rule.
RuleCascade compile_rules(std::vector<ExtractionRule> rules);

// Rule file: a "#selfage-rules<TAB>1" header, then
// "id<TAB>priority<TAB>kind<TAB>source<TAB>notes" per line.
std::vector<ExtractionRule> parse_rules(std::istream& in);
RuleCascade load_rules(const std::filesystem::path& path);
RuleCascade default_rules();

// `normalized_text` must come from normalize_for_extraction. The first rule
// that matches decides; results outside [10, 99] yield nothing.
std::optional<Extraction> apply_cascade(std::string_view normalized_text,
                                        const RuleCascade& cascade);

// Leftmost maximal digit run of exactly two digits.
std::optional<int> fallback_first_two_digit(std::string_view normalized_text);

// normalize_for_extraction + apply_cascade, tagged with `post_id`.
std::optional<Extraction> extract_age(std::string_view post_id, std::string_view raw_text,
                                      const RuleCascade& cascade);

}  // namespace selfage
