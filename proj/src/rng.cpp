#include "kdaudit/rng.hpp"

#include <algorithm>
#include <stdexcept>
#include <unordered_set>

#include "kdaudit/text.hpp"

namespace kdaudit {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t substream_seed(std::uint64_t seed, std::string_view name) {
  return splitmix64(seed ^ fnv1a64(name));
}

std::uint64_t Rng::below(std::uint64_t bound) {
  if (bound == 0) throw std::invalid_argument("Rng::below: bound must be positive");
  const std::uint64_t threshold = -bound % bound;
  for (;;) {
    const std::uint64_t r = next();
    if (r >= threshold) return r % bound;
  }
}

std::vector<std::size_t> sample_indices(std::size_t population, std::size_t n, Rng& rng) {
  if (n > population)
    throw std::invalid_argument("sample_indices: n exceeds population");
  std::vector<std::size_t> out;
  out.reserve(n);
  if (n == population) {
    for (std::size_t i = 0; i < population; ++i) out.push_back(i);
    return out;
  }
  std::unordered_set<std::size_t> chosen;
  chosen.reserve(n * 2);
  for (std::size_t j = population - n; j < population; ++j) {
    const std::size_t t = static_cast<std::size_t>(rng.below(j + 1));
    if (!chosen.insert(t).second) chosen.insert(j);
  }
  out.assign(chosen.begin(), chosen.end());
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace kdaudit
