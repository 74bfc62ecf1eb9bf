#pragma once

#include <string_view>

namespace selfage {

// Shipped pattern and rule files, embedded at build time from data/.
std::string_view default_query_patterns_text();
std::string_view default_extraction_rules_text();

}  // namespace selfage
