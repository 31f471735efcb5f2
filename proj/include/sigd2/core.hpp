#pragma once

#include <cstdint>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace sigd2 {

using ItemId = std::uint32_t;
using ClassId = std::uint32_t;
using Itemset = std::vector<ItemId>;

// Bad input text: malformed tokens, wrong arity, empty files.
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Arguments or data that violate an operation's preconditions.
class DataError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A learner could not be built (e.g. boosting found no usable round).
class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// SplitMix64 finalizer, used to derive independent seeds.
constexpr std::uint64_t mix_seed(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) noexcept {
  return mix_seed(seed ^ mix_seed(stream + 0x51ED270B27A3F1C5ULL));
}

/// Seedable generator used by every sampling routine.
///
/// The engine is mt19937_64, whose output sequence is fixed by the C++
/// standard. The standard distributions are not (their algorithms vary across
/// library vendors), so integer and real draws are derived here directly from
/// the raw 64-bit output.
class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0)
      : engine_(derive_seed(seed, stream)) {}

  std::uint64_t next() { return engine_(); }

  // Uniform integer in [0, bound), bound > 0. Rejection sampling, no modulo bias.
  std::uint64_t below(std::uint64_t bound) {
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % bound;
    std::uint64_t x;
    do {
      x = engine_();
    } while (x >= limit);
    return x % bound;
  }

  // Uniform double in [0, 1) with 53 random bits.
  double unit() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[below(i)]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace sigd2
