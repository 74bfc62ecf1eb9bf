#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <utility>

namespace selfage {

// Fisher-Yates over mt19937_64 without std::uniform_int_distribution, whose
// output is implementation-defined; results are identical across toolchains.
template <typename T>
void deterministic_shuffle(std::span<T> items, std::mt19937_64& rng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng() % i);
    using std::swap;
    swap(items[i - 1], items[j]);
  }
}

}  // namespace selfage
