#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace zskg {

// FNV-1a, used to turn stream names into seed material.
constexpr std::uint64_t fnv1a(std::string_view text) {
  std::uint64_t hash = 1469598103934665603ULL;
  for (char c : text) {
    hash ^= static_cast<unsigned char>(c);
    hash *= 1099511628211ULL;
  }
  return hash;
}

/// Seeded random stream. The engine is std::mt19937_64 (bit-exact by the
/// standard); the distributions are implemented here so that draws are
/// identical across standard library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0);

  /// Independent sub-stream keyed by (root seed, stream name, index...).
  static Rng derive(std::uint64_t root_seed, std::string_view stream,
                    std::initializer_list<std::uint64_t> keys = {});

  std::uint64_t next_u64() { return engine_(); }
  /// Uniform in [0, 1).
  double uniform();
  /// Uniform in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [0, n). n must be positive.
  std::size_t index(std::size_t n);
  /// Standard normal via Box-Muller.
  double normal();

  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::size_t j = index(i);
      std::swap(items[i - 1], items[j]);
    }
  }

  /// k distinct indices from [0, n), in draw order.
  std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k);

  std::string serialize() const;
  void deserialize(const std::string& state);

 private:
  std::mt19937_64 engine_;
};

}  // namespace zskg
