#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace modpair {

/// splitmix64 step; used for seed mixing so that derived streams are
/// independent of each other and stable across platforms.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Derived seed for sub-stream `index` of stream `seed`
/// (passage_seed = mix_seed(seed, passage_index), etc.).
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index) {
  return splitmix64(splitmix64(seed) ^ splitmix64(index * 0x9e3779b97f4a7c15ULL + 1));
}

/// 64-bit FNV-1a over a byte string; used for file digests and token seeds.
inline std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Deterministic RNG wrapper. All sampling goes through the helpers below
/// rather than std::*_distribution, whose outputs are
/// implementation-defined.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(splitmix64(seed)) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform integer in [lo, hi] inclusive.
  int uniform_int(int lo, int hi) {
    const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
    return lo + static_cast<int>(next_u64() % span);
  }

  /// Uniform real in [0, 1).
  double uniform_real() {
    return static_cast<double>(next_u64() >> 11) * (1.0 / 9007199254740992.0);
  }

  /// Standard normal via Box-Muller on the deterministic uniform stream.
  double normal() {
    double u1 = uniform_real();
    double u2 = uniform_real();
    if (u1 < 1e-300) u1 = 1e-300;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = next_u64() % i;
      std::swap(v[i - 1], v[j]);
    }
  }

  /// k distinct integers from [lo, hi], in sampling order.
  std::vector<int> sample_distinct(int lo, int hi, int k) {
    std::vector<int> pool;
    pool.reserve(hi - lo + 1);
    for (int v = lo; v <= hi; ++v) pool.push_back(v);
    shuffle(pool);
    pool.resize(k);
    return pool;
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace modpair
