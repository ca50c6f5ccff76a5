#include "zskg/rng.hpp"

#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace zskg {

Rng::Rng(std::uint64_t seed) : engine_(seed) {}

Rng Rng::derive(std::uint64_t root_seed, std::string_view stream,
                std::initializer_list<std::uint64_t> keys) {
  std::vector<std::uint32_t> material;
  auto push64 = [&](std::uint64_t v) {
    material.push_back(static_cast<std::uint32_t>(v & 0xffffffffULL));
    material.push_back(static_cast<std::uint32_t>(v >> 32));
  };
  push64(root_seed);
  push64(fnv1a(stream));
  for (auto k : keys) push64(k);
  std::seed_seq seq(material.begin(), material.end());
  Rng rng;
  rng.engine_.seed(seq);
  return rng;
}

double Rng::uniform() {
  // 53 random mantissa bits.
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

std::size_t Rng::index(std::size_t n) {
  if (n == 0) throw std::invalid_argument("Rng::index: empty range");
  // Rejection sampling keeps the draw unbiased.
  const std::uint64_t range = static_cast<std::uint64_t>(n);
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % range;
  std::uint64_t x;
  do {
    x = engine_();
  } while (x >= limit);
  return static_cast<std::size_t>(x % range);
}

double Rng::normal() {
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::vector<std::size_t> Rng::sample_without_replacement(std::size_t n, std::size_t k) {
  if (k > n) throw std::invalid_argument("sample_without_replacement: k > n");
  std::vector<std::size_t> pool(n);
  for (std::size_t i = 0; i < n; ++i) pool[i] = i;
  // Partial Fisher-Yates.
  for (std::size_t i = 0; i < k; ++i) {
    std::size_t j = i + index(n - i);
    std::swap(pool[i], pool[j]);
  }
  pool.resize(k);
  return pool;
}

std::string Rng::serialize() const {
  std::ostringstream out;
  out << engine_;
  return out.str();
}

void Rng::deserialize(const std::string& state) {
  std::istringstream in(state);
  in >> engine_;
  if (!in) throw std::invalid_argument("Rng::deserialize: bad state");
}

}  // namespace zskg
