#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <vector>

namespace ilasr {

using Rng = std::mt19937_64;

// Streams are keyed by (seed, tags...) so that every pool, eval set and
// model init draws from its own generator regardless of call order.
inline Rng make_rng(std::uint64_t seed, std::initializer_list<std::uint64_t> tags = {}) {
  std::vector<std::uint32_t> words;
  words.reserve(2 + 2 * tags.size());
  words.push_back(static_cast<std::uint32_t>(seed));
  words.push_back(static_cast<std::uint32_t>(seed >> 32));
  for (auto t : tags) {
    words.push_back(static_cast<std::uint32_t>(t));
    words.push_back(static_cast<std::uint32_t>(t >> 32));
  }
  std::seed_seq seq(words.begin(), words.end());
  return Rng(seq);
}

}  // namespace ilasr
