#pragma once

#include <cmath>
#include <cstdint>

#include "spintest/error.hpp"

namespace spintest {

// 64-bit finalizer from SplitMix64 (Vigna; Steele/Lea/Flood, "Fast splittable
// pseudorandom number generators").
constexpr std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

/// Splittable counter-based random stream. A stream is identified by a 64-bit
/// key; derive(label) produces a child stream as a pure function of
/// (key, label), so the same (seed, path) always reproduces the same draws.
/// Drawing advances only the local counter and never affects derived streams.
class RngStream {
 public:
  RngStream() : RngStream(0) {}
  explicit RngStream(std::uint64_t seed) : key_(mix64(seed + kGamma)), counter_(0) {}

  /// Child stream for the given path label. Pure: does not consume draws.
  RngStream derive(std::uint64_t label) const {
    RngStream child;
    child.key_ = mix64(key_ ^ mix64(label * kGamma + kLeaf));
    child.counter_ = 0;
    return child;
  }

  std::uint64_t next_u64() { return mix64(key_ + (++counter_) * kGamma); }

  /// Uniform double in [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform integer in [0, bound). bound must be positive.
  std::uint64_t uniform_index(std::uint64_t bound) {
    if (bound == 0) throw contract_error("uniform_index: bound must be positive");
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(next_u64()) * bound) >> 64);
  }

  /// One Bernoulli(p) bit.
  bool bernoulli(double p) {
    if (!(p >= 0.0 && p <= 1.0)) throw contract_error("bernoulli: p must be in [0,1]");
    return uniform() < p;
  }

  /// One N(mu, sigma^2) sample via Box-Muller. sigma == 0 returns mu exactly.
  double gaussian(double mu, double sigma) {
    if (!(sigma >= 0.0)) throw contract_error("gaussian: sigma must be >= 0");
    const double u1 = 1.0 - uniform();  // (0, 1], keeps log() finite
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    return mu + sigma * (r * std::cos(2.0 * kPi * u2));
  }

  std::uint64_t key() const { return key_; }

  friend bool operator==(const RngStream& a, const RngStream& b) {
    return a.key_ == b.key_ && a.counter_ == b.counter_;
  }

 private:
  static constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ull;  // golden ratio
  static constexpr std::uint64_t kLeaf = 0xD6E8FEB86659FD93ull;
  static constexpr double kPi = 3.14159265358979323846;

  std::uint64_t key_;
  std::uint64_t counter_;
};

}  // namespace spintest
