#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

#include "geoflow/hash.hpp"

namespace geoflow {

/// Deterministic random stream. All transforms (uniform, normal, bounded
/// integers) are built from raw mt19937_64 output rather than the standard
/// distributions, whose sequences are implementation-defined. Substreams are
/// derived counter-style from (root seed, tag, index), so the draw order of
/// one stage can never perturb another.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : root_(seed), gen_(splitmix64(seed)) {}

  RngStream child(std::string_view tag, std::uint64_t index = 0) const {
    return RngStream(substream_seed(root_, tag, index));
  }

  static std::uint64_t substream_seed(std::uint64_t root, std::string_view tag,
                                      std::uint64_t index = 0) {
    std::uint64_t h = fnv1a64(tag);
    return splitmix64(root ^ splitmix64(h + index * 0x9e3779b97f4a7c15ull));
  }

  std::uint64_t raw() { return gen_(); }

  /// Uniform in [0, 1), 53-bit resolution.
  double uniform() { return static_cast<double>(raw() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal via Box-Muller (two raw draws per sample).
  double normal() {
    double u1 = static_cast<double>((raw() >> 11) + 1) * 0x1.0p-53;  // (0, 1]
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586477 * u2);
  }

  /// Uniform in [0, bound). Unbiased via rejection.
  std::uint64_t integer(std::uint64_t bound) {
    if (bound == 0) return 0;
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % bound);
    for (;;) {
      std::uint64_t v = raw();
      if (v < limit) return v % bound;
    }
  }

  /// Fisher-Yates; uniform over permutations.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(integer(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  std::uint64_t root() const { return root_; }

 private:
  std::uint64_t root_;
  std::mt19937_64 gen_;
};

}  // namespace geoflow
