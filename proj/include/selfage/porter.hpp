#pragma once

#include <string>
#include <string_view>

namespace selfage {

// Porter (1980) suffix stripping, following the reference C implementation
// (including its "bli" -> "ble" and "logi" -> "log" departures). Expects a
// lowercase ASCII word; anything else is returned unchanged.
std::string porter_stem(std::string_view word);

}  // namespace selfage
