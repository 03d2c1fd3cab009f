#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

namespace mvan {

/// Counter-based generator. A stream is identified by a 64-bit key; the n-th
/// draw is a pure function of (key, n). Substreams derive a fresh key from the
/// parent key and a label, so each consumer (init, dropout, shuffling, ...) can
/// be reproduced without replaying the others.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  Rng substream(std::string_view label) const;
  Rng substream(std::uint64_t index) const;

  std::uint64_t next_u64();
  /// Uniform in [0, 1).
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double normal();
  bool bernoulli(double p) { return uniform() < p; }
  /// Uniform integer in [0, n). Unbiased (rejection sampling).
  std::uint64_t below(std::uint64_t n);

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  std::uint64_t key() const { return key_; }
  std::uint64_t counter() const { return counter_; }

 private:
  Rng(std::uint64_t key, int) : key_(key) {}

  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace mvan
