#include "hypocert/rng.hpp"

#include <array>

namespace hypocert {

std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

Engine make_stream(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  std::uint64_t s = seed;
  std::uint64_t h = splitmix64(s);
  std::uint64_t sa = a ^ h;
  h ^= splitmix64(sa);
  std::uint64_t sb = b ^ (h * 0xD6E8FEB86659FD93ULL);
  h ^= splitmix64(sb);

  std::array<std::uint32_t, 8> words{};
  std::uint64_t st = h;
  for (std::size_t i = 0; i < words.size(); i += 2) {
    const std::uint64_t v = splitmix64(st);
    words[i] = static_cast<std::uint32_t>(v);
    words[i + 1] = static_cast<std::uint32_t>(v >> 32);
  }
  std::seed_seq seq(words.begin(), words.end());
  return Engine(seq);
}

}  // namespace hypocert
