#pragma once

// Deterministic randomness. Every sampling operation in the toolkit draws
// from a named substream of one run-level seed, so adding a subgroup or
// reordering commands never perturbs another operation's sample. Bounded
// draws use rejection sampling on mt19937_64 output (whose stream is fixed
// by the standard), never std::uniform_int_distribution, whose mapping is
// implementation-defined.

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace kdaudit {

std::uint64_t splitmix64(std::uint64_t x);

// Seed for the substream `name` of run seed `seed`.
std::uint64_t substream_seed(std::uint64_t seed, std::string_view name);

class Rng {
public:
  explicit Rng(std::uint64_t seed) : engine_(splitmix64(seed)) {}

  std::uint64_t next() { return engine_(); }

  // Unbiased draw from [0, bound); bound must be positive.
  std::uint64_t below(std::uint64_t bound);

private:
  std::mt19937_64 engine_;
};

// n distinct indices from [0, population), uniform without replacement,
// sorted ascending. Floyd's algorithm; cost O(n), independent of population.
std::vector<std::size_t> sample_indices(std::size_t population, std::size_t n, Rng& rng);

}  // namespace kdaudit
