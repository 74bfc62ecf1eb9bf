#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace selfage {

enum class NormalizationProfile { Extraction, NgramClassifier, ContextualClassifier };

inline constexpr std::string_view kUrlToken = "<url>";
inline constexpr std::string_view kUserToken = "<user>";
inline constexpr std::string_view kNumToken = "<num>";

// Normalized text plus, for every output byte, the byte offset in the original
// text it was derived from. `source_offsets` has text.size() + 1 entries; the
// last is the original length.
struct MappedText {
  std::string text;
  std::vector<std::size_t> source_offsets;
};

// Spelled-out numbers 1-99 (cardinals, ordinals, "twenty-one"/"twenty one")
// become digits, URLs and @-mentions are removed, and up to two
// non-alphanumeric characters between single-digit runs are dropped
// ("the big 3-0" -> "the big 30"). Everything else is preserved.
std::string normalize_for_extraction(std::string_view text);
MappedText normalize_for_extraction_mapped(std::string_view text);

// URLs, mentions and digit runs become sentinel tokens; other text is
// lowercased, split on non-alphanumerics and Porter-stemmed. Stemming is
// repeated until the token no longer changes, so the operation is idempotent.
std::vector<std::string> normalize_for_ngram_classifier(std::string_view text);

// URLs and mentions become sentinel tokens; ASCII lowercased; nothing else changes.
std::string normalize_for_contextual_classifier(std::string_view text);

// Value of a spelled-out number word ("seven" -> 7, "twenty" -> 20); 0 if not one.
int number_word_value(std::string_view lowercase_word);

// Character (code point) offset of a byte offset into UTF-8 text.
std::size_t char_offset(std::string_view utf8, std::size_t byte_offset);

}  // namespace selfage
