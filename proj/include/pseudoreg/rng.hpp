#pragma once

#include <cstdint>
#include <initializer_list>
#include <limits>

namespace pseudoreg {

/// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Counter-based generator: draw i of stream `key` is mix64(key + i * golden).
/// Streams are derived from a parent by hashing labels into the key, so any
/// (seed, scenario, rep, ...) path addresses its stream directly and results
/// do not depend on execution order.
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed = 0) : key_(mix64(seed)) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() {
    ++counter_;
    return mix64(key_ + counter_ * 0x9e3779b97f4a7c15ULL);
  }

  /// Independent child stream addressed by `labels`.
  Rng substream(std::initializer_list<std::uint64_t> labels) const {
    std::uint64_t k = key_;
    for (auto l : labels) k = mix64(k ^ mix64(l + 0x632be59bd9b4e019ULL));
    Rng r;
    r.key_ = k;
    return r;
  }

  /// Uniform on the open interval (0, 1).
  double uniform() { return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53; }

 private:
  std::uint64_t key_ = 0;
  std::uint64_t counter_ = 0;
};

}  // namespace pseudoreg
