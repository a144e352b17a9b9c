#pragma once

#include <cstdint>
#include <random>

namespace hypocert {

/// Engine used by every stochastic routine in the library.
using Engine = std::mt19937_64;

/// One step of the splitmix64 sequence; advances `state`.
std::uint64_t splitmix64(std::uint64_t& state);

/// Independent stream identified by (seed, a, b).
///
/// Streams with different index pairs are decorrelated by hashing the triple
/// through splitmix64 before seeding, so an ensemble can hand path `j` the
/// stream `make_stream(seed, j)` and get identical results regardless of the
/// order in which paths are executed.
Engine make_stream(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0);

}  // namespace hypocert
