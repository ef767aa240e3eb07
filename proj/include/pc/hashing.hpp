#pragma once

#include <cstddef>
#include <cstdint>

#include "pc/rng.hpp"

namespace pc {

// MurmurHash3 x86_32, byte-oriented and endian-independent.
uint32_t murmur3_32(const void* data, size_t len, uint32_t seed);

// Maps an ordered token pair to a table slot. The key is the decimal ASCII
// rendering "<a>-<b>", so (a, b) and (b, a) hash to unrelated slots.
struct PairHasher {
  uint32_t seed = 0;
  uint32_t table_size = 0;
};

uint32_t pair_index(int32_t a, int32_t b, const PairHasher& h);

// Per-table seed for (layer, head), derived by hashing the label "L<i>H<j>"
// with the model's global hash seed.
uint32_t table_hash_seed(uint32_t global_seed, size_t layer, size_t head);

// Monte-Carlo collision estimate over random distinct ordered pairs using
// `heads` independently seeded tables of the given size. Reports the chance
// that a pair collides in one given table and the chance it collides in all
// of them at once, each with its binomial standard error.
struct CollisionStats {
  double per_table_rate = 0;
  double per_table_se = 0;
  double all_tables_rate = 0;
  double all_tables_se = 0;
  size_t samples = 0;
};

CollisionStats estimate_collision_rate(uint32_t table_size, size_t heads,
                                       size_t sample_pairs, Rng& rng);

}  // namespace pc
