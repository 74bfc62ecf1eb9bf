#pragma once

#include <cstddef>
#include <filesystem>
#include <istream>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "selfage/corpus.hpp"

namespace selfage {

// A high-recall query. `source` is a case-insensitive Perl-style regular
// expression; the placeholders {AGE} (a bounded 10-99 digit group or spelled-out
// number) and {ORD} (the ordinal form of either) are expanded before compiling.
struct QueryPattern {
  std::string id;
  std::string source;
  std::string description;
};

struct RetrievalHit {
  std::string post_id;
  std::string pattern_id;
  // Half-open code point offsets into the post text.
  std::size_t begin = 0;
  std::size_t end = 0;

  friend bool operator==(const RetrievalHit&, const RetrievalHit&) = default;
};

enum class DropDecision { Keep, Retweet, ReportedSpeech };

std::string_view to_string(DropDecision decision);

// Expands {AGE} and {ORD}.
std::string expand_pattern_macros(std::string_view source);

// All patterns folded into one alternation and evaluated in a single pass.
// Immutable and safe to share between threads.
class CompiledPatternSet {
 public:
  CompiledPatternSet();
  ~CompiledPatternSet();
  CompiledPatternSet(CompiledPatternSet&&) noexcept;
  CompiledPatternSet& operator=(CompiledPatternSet&&) noexcept;

  const std::vector<QueryPattern>& patterns() const;

  // Non-overlapping hits in text order. At a given start position the earlier
  // pattern in the set wins.
  std::vector<RetrievalHit> match(std::string_view post_id, std::string_view text) const;
  bool matches_any(std::string_view text) const;

 private:
  friend CompiledPatternSet compile_pattern_set(std::span<const QueryPattern>);
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// Throws PatternError naming the first pattern that fails to compile.
CompiledPatternSet compile_pattern_set(std::span<const QueryPattern> patterns);

std::vector<RetrievalHit> match_candidates(const Post& post, const CompiledPatternSet& matcher);

// Retweet when flagged or the text starts with "RT @"; ReportedSpeech for a
// quoted age mention with an attribution marker outside the quotes, or for
// headline-shaped text (no first-person pronoun, trailing URL).
DropDecision should_drop(const Post& post);

// Pattern file: a "#selfage-patterns<TAB>1" header, then one
// "id<TAB>source<TAB>description" per line; '#' lines and blank lines are ignored.
std::vector<QueryPattern> parse_query_patterns(std::istream& in);
std::vector<QueryPattern> load_query_patterns(const std::filesystem::path& path);
std::vector<QueryPattern> default_query_patterns();

}  // namespace selfage
