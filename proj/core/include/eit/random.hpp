#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace eit {

using Engine = std::mt19937_64;

std::uint64_t splitmix64(std::uint64_t x);

// Named substream of a master seed:
//   splitmix64(splitmix64(master ^ fnv1a64(stream)) ^ splitmix64(index + 1))
// Every consumer draws from its own substream, so results do not depend on
// scheduling or on how many other draws were made.
std::uint64_t derive_seed(std::uint64_t master, std::string_view stream, std::uint64_t index = 0);

inline Engine make_engine(std::uint64_t seed) { return Engine(seed); }

}  // namespace eit
