#include "mvan/rng.hpp"

#include <cmath>
#include <numbers>

namespace mvan {

namespace {

std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

Rng::Rng(std::uint64_t seed) : key_(mix64(seed ^ 0x5eed5eed5eed5eedULL)) {}

Rng Rng::substream(std::string_view label) const {
  return Rng(mix64(key_ ^ mix64(fnv1a(label))), 0);
}

Rng Rng::substream(std::uint64_t index) const {
  return Rng(mix64(key_ + 0x632be59bd9b4e019ULL * (index + 1)), 0);
}

std::uint64_t Rng::next_u64() {
  // Two rounds keep consecutive counters decorrelated across nearby keys.
  return mix64(mix64(key_ ^ counter_++) + key_);
}

double Rng::uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

double Rng::normal() {
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::uint64_t Rng::below(std::uint64_t n) {
  if (n <= 1) return 0;
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t x = next_u64();
  while (x >= limit) x = next_u64();
  return x % n;
}

}  // namespace mvan
