#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "pc/errors.hpp"

namespace pc {

// xoshiro256++ seeded through splitmix64. Chosen over std::mt19937 because the
// scalar stream must be bit-identical across platforms and standard library
// distributions make no such guarantee.
class Rng {
 public:
  explicit Rng(uint64_t seed);

  uint64_t next_u64();
  uint32_t next_u32() { return static_cast<uint32_t>(next_u64() >> 32); }

  // Uniform in [0, 1), 53-bit resolution. Always computed in double so the
  // stream does not depend on the build's scalar width.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform in the open interval (0, 1): rejects exact zero draws.
  double uniform_open();

  // Uniform in (lo, hi), both endpoints excluded.
  double uniform_open(double lo, double hi) {
    return lo + (hi - lo) * uniform_open();
  }

  // Uniform integer in [0, n). Multiply-shift reduction, no modulo bias worth
  // caring about at these ranges and fully deterministic.
  uint64_t below(uint64_t n) {
    if (n == 0) throw ContractError("Rng::below: n must be positive");
    return static_cast<uint64_t>(
        (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
  }

  // Fisher-Yates.
  template <class T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      size_t j = static_cast<size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  struct State {
    uint64_t s[4];
  };
  State state() const { return {{s_[0], s_[1], s_[2], s_[3]}}; }
  void set_state(const State& st);

 private:
  uint64_t s_[4];
};

// Stateless stream derivation: mixes (base, stream, a, b) into a fresh seed.
// Used to give every consumer (init, shuffling, masking, dropout-per-step)
// its own independent deterministic stream, which is what makes checkpoint
// resume reproduce the exact remaining training trajectory.
uint64_t derive_seed(uint64_t base, uint64_t stream, uint64_t a = 0,
                     uint64_t b = 0);

// Stream tags for derive_seed.
namespace seed_stream {
constexpr uint64_t kParamInit = 1;
constexpr uint64_t kShuffle = 2;
constexpr uint64_t kMask = 3;
constexpr uint64_t kDropout = 4;
constexpr uint64_t kEvalMask = 5;
constexpr uint64_t kHash = 6;
constexpr uint64_t kBench = 7;
constexpr uint64_t kTrainData = 8;
constexpr uint64_t kEvalData = 9;
}  // namespace seed_stream

}  // namespace pc
