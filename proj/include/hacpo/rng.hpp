#pragma once

#include <cstdint>

namespace hacpo {

// Full-avalanche finalizer from splitmix64.
inline std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

// splitmix64; used both as a generator and to expand seeds.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  return mix64(state += 0x9e3779b97f4a7c15ull);
}

// Deterministic seed derivation: mixes a master seed with up to four stream
// indices (step, agent, prompt, sample). Every injection is followed by a
// full avalanche, so enumerated index ranges cannot alias across masters
// (low-bit xor cosets would otherwise produce permuted rollout batches).
// Independent of evaluation order, so rollout generation can be farmed out
// to any number of workers.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a = 0,
                                 std::uint64_t b = 0, std::uint64_t c = 0,
                                 std::uint64_t d = 0) {
  std::uint64_t s = mix64(master + 0x9e3779b97f4a7c15ull);
  s = mix64(s ^ (0x243f6a8885a308d3ull + a));
  s = mix64(s ^ (0x13198a2e03707344ull + b));
  s = mix64(s ^ (0xa4093822299f31d0ull + c));
  s = mix64(s ^ (0x082efa98ec4e6c89ull + d));
  return s;
}

// xoshiro256** with splitmix-expanded seeding. Chosen over std::mt19937 so
// that streams are bit-reproducible across standard library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) {
    std::uint64_t sm = seed;
    for (auto& word : state_) word = splitmix64(sm);
  }

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  // Uniform in [0, 1) with 53 random bits.
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform integer in [0, n).
  std::uint64_t next_below(std::uint64_t n) {
    // Rejection-free multiply-shift; bias is < 2^-64 * n, irrelevant here and
    // fully deterministic.
    return static_cast<std::uint64_t>((static_cast<unsigned __int128>(next_u64()) * n) >> 64);
  }

  // Uniform in [lo, hi).
  double next_uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
  std::uint64_t state_[4];
};

}  // namespace hacpo
