#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace d3pmlab {

// Counter-based generator in the SplitMix64 family. A stream is identified by
// a 64-bit key; drawing the n-th value only mixes (key, n), so any stream can
// be replayed or split without shared state. Streams are derived by name or
// index, which keeps every random decision in the project addressable as
// (seed, purpose, index...).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : key_(mix64(seed ^ kSeedSalt)) {}

  // Derived streams are statistically independent of the parent and of each
  // other for distinct tags.
  Rng stream(std::string_view purpose) const {
    return Rng(mix64(key_ ^ mix64(fnv1a64(purpose))), 0);
  }
  Rng stream(std::uint64_t index) const {
    return Rng(mix64(key_ ^ mix64(index + kIndexSalt)), 0);
  }

  std::uint64_t next_u64() { return mix64(key_ + (++counter_) * kGamma); }

  // Uniform in [0, 1), 53-bit resolution.
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  bool bernoulli(double p) { return next_double() < p; }

  // Uniform integer in [0, n). Rejection-free modulo is fine here: n is tiny
  // relative to 2^64 in every call site, so the bias is far below statistical
  // test resolution.
  std::uint64_t uniform_u64(std::uint64_t n) { return next_u64() % n; }
  int uniform_int(int n) { return static_cast<int>(uniform_u64(static_cast<std::uint64_t>(n))); }

  // Inverse-CDF draw from an unnormalized nonnegative weight vector.
  int categorical(const Eigen::Ref<const Eigen::VectorXd>& weights) {
    const double total = weights.sum();
    double u = next_double() * total;
    const Eigen::Index n = weights.size();
    for (Eigen::Index k = 0; k < n; ++k) {
      u -= weights[k];
      if (u < 0.0) return static_cast<int>(k);
    }
    return static_cast<int>(n - 1);
  }

  // Fisher-Yates; identical permutation for identical (key, contents size).
  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(uniform_u64(i));
      std::swap(items[i - 1], items[j]);
    }
  }

  static std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  static std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 0xCBF29CE484222325ull;
    for (const char c : s) {
      h ^= static_cast<unsigned char>(c);
      h *= 0x100000001B3ull;
    }
    return h;
  }

 private:
  Rng(std::uint64_t key, std::uint64_t counter) : key_(key), counter_(counter) {}

  static constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ull;
  static constexpr std::uint64_t kSeedSalt = 0xD1B54A32D192ED03ull;
  static constexpr std::uint64_t kIndexSalt = 0x8CB92BA72F3D8DD7ull;

  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace d3pmlab
