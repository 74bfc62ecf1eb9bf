#pragma once

#include <optional>
#include <string>

#include "selfage/corpus.hpp"
#include "selfage/extract.hpp"

namespace selfage {

// Per-post classifier output. `score` is backend specific: a signed margin for
// the built-in baseline (Age iff score > 0), whatever the plug-in reports for
// external classifiers.
struct Prediction {
  std::string post_id;
  Label label = Label::NoAge;
  double score = 0.0;

  friend bool operator==(const Prediction&, const Prediction&) = default;
};

// A prediction joined with the age extracted from the same post, if any.
struct ExtractionResult {
  Prediction prediction;
  std::optional<Extraction> extraction;
};

}  // namespace selfage
