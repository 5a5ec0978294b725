// rng.hpp
//
// Deterministic random sampling. mt19937_64 output is fixed by the
// standard; the index/real helpers below avoid std::uniform_*_distribution,
// whose exact streams are implementation-defined, so results are identical
// under any conforming compiler.

#pragma once

#include <cstdint>
#include <numeric>
#include <random>
#include <vector>

namespace vlmia {

class Rng {
public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  // Unbiased integer in [0, n). Rejection sampling on the top range.
  std::uint64_t index(std::uint64_t n) {
    if (n == 0) return 0;
    // largest multiple of n representable in 64 bits
    const std::uint64_t limit = ~std::uint64_t{0} - ~std::uint64_t{0} % n;
    std::uint64_t v;
    do {
      v = engine_();
    } while (v >= limit);
    return v % n;
  }

  // Real in [0, 1) with 53 random bits.
  double real01() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  // Real in [-1, 1).
  double symmetric() { return 2.0 * real01() - 1.0; }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(index(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  // k distinct indices drawn uniformly from [0, n) without replacement
  // (partial Fisher-Yates; order of the draw is part of the result).
  std::vector<std::size_t> sample_indices(std::size_t n, std::size_t k) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    for (std::size_t i = 0; i < k; ++i) {
      std::size_t j = i + static_cast<std::size_t>(index(n - i));
      std::swap(idx[i], idx[j]);
    }
    idx.resize(k);
    return idx;
  }

private:
  std::mt19937_64 engine_;
};

}  // namespace vlmia
