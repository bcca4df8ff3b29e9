#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace wdro {

// All randomness in the library flows from a single user seed. Submodules get
// independent streams by hashing a fixed label together with that seed, so
// adding a consumer in one place never shifts the draws of another.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view label);

std::mt19937_64 make_rng(std::uint64_t seed, std::string_view label);

// Portable draw helpers. The std distributions are implementation-defined in
// the exact sequence they produce, which would make frozen test values and
// bit-reproducibility claims compiler-specific. These are pinned instead.
double uniform01(std::mt19937_64& rng);                       // [0, 1)
double uniform_in(std::mt19937_64& rng, double lo, double hi);
std::uint64_t uniform_index(std::mt19937_64& rng, std::uint64_t bound);  // [0, bound)
double normal01(std::mt19937_64& rng);

template <typename T>
void shuffle(std::vector<T>& items, std::mt19937_64& rng) {
  if (items.size() < 2) return;
  for (std::size_t i = items.size() - 1; i > 0; --i) {
    std::size_t j = static_cast<std::size_t>(uniform_index(rng, i + 1));
    std::swap(items[i], items[j]);
  }
}

}  // namespace wdro
