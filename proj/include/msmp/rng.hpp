#pragma once

#include <cstdint>
#include <initializer_list>

namespace msmp {

// SplitMix64 stream. All randomness in the project goes through this class so
// that generated datasets and initial weights are identical across platforms
// and standard-library versions (std::uniform_* distributions are not
// portable).
class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(seed) {}

  uint64_t next_u64() {
    uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1) with 53 random bits.
  double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // Uniform in [0, n) via Lemire multiply-shift.
  uint64_t bounded(uint64_t n) {
    return static_cast<uint64_t>((static_cast<__uint128_t>(next_u64()) * n) >> 64);
  }

  // Uniform integer in [lo, hi], inclusive.
  int64_t uniform_int(int64_t lo, int64_t hi) {
    return lo + static_cast<int64_t>(bounded(static_cast<uint64_t>(hi - lo + 1)));
  }

 private:
  uint64_t state_;
};

// Derives an independent stream seed from a master seed and a tag path,
// e.g. derive_seed(master, {experiment_id, split_tag, sample_index}).
inline uint64_t derive_seed(uint64_t seed, std::initializer_list<uint64_t> tags) {
  Rng mix(seed);
  uint64_t s = mix.next_u64();
  for (uint64_t t : tags) {
    Rng step(s ^ (t * 0xd1342543de82ef95ull + 0x2545f4914f6cdd1dull));
    s = step.next_u64();
  }
  return s;
}

}  // namespace msmp
