#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace fairbound {

using Engine = std::mt19937_64;

namespace detail {

constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace detail

/// Key of the named sub-stream `stream` (and counter `index`) under a root seed.
/// Distinct (seed, stream, index) triples give statistically independent engines,
/// so consumers never share state and results do not depend on call order.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::string_view stream,
                                    std::uint64_t index = 0) {
  std::uint64_t k = detail::splitmix64(seed ^ detail::fnv1a(stream));
  return detail::splitmix64(k + detail::splitmix64(index));
}

inline Engine make_engine(std::uint64_t seed, std::string_view stream, std::uint64_t index = 0) {
  return Engine(derive_seed(seed, stream, index));
}

}  // namespace fairbound
