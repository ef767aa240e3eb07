#include "pc/hashing.hpp"

#include <charconv>
#include <cmath>
#include <cstring>
#include <string>
#include <vector>

#include "pc/errors.hpp"

namespace pc {

namespace {

inline uint32_t rotl32(uint32_t x, int r) { return (x << r) | (x >> (32 - r)); }

inline uint32_t load_le32(const uint8_t* p) {
  return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
         (static_cast<uint32_t>(p[2]) << 16) |
         (static_cast<uint32_t>(p[3]) << 24);
}

}  // namespace

uint32_t murmur3_32(const void* data, size_t len, uint32_t seed) {
  const uint8_t* p = static_cast<const uint8_t*>(data);
  const size_t nblocks = len / 4;
  uint32_t h1 = seed;
  const uint32_t c1 = 0xcc9e2d51u;
  const uint32_t c2 = 0x1b873593u;

  for (size_t i = 0; i < nblocks; ++i) {
    uint32_t k1 = load_le32(p + 4 * i);
    k1 *= c1;
    k1 = rotl32(k1, 15);
    k1 *= c2;
    h1 ^= k1;
    h1 = rotl32(h1, 13);
    h1 = h1 * 5 + 0xe6546b64u;
  }

  const uint8_t* tail = p + nblocks * 4;
  uint32_t k1 = 0;
  switch (len & 3) {
    case 3:
      k1 ^= static_cast<uint32_t>(tail[2]) << 16;
      [[fallthrough]];
    case 2:
      k1 ^= static_cast<uint32_t>(tail[1]) << 8;
      [[fallthrough]];
    case 1:
      k1 ^= static_cast<uint32_t>(tail[0]);
      k1 *= c1;
      k1 = rotl32(k1, 15);
      k1 *= c2;
      h1 ^= k1;
  }

  h1 ^= static_cast<uint32_t>(len);
  h1 ^= h1 >> 16;
  h1 *= 0x85ebca6bu;
  h1 ^= h1 >> 13;
  h1 *= 0xc2b2ae35u;
  h1 ^= h1 >> 16;
  return h1;
}

uint32_t pair_index(int32_t a, int32_t b, const PairHasher& h) {
  if (h.table_size < 2)
    throw ConfigError("pair_index: table_size " +
                      std::to_string(h.table_size) + " below 2");
  if (a < 0 || b < 0)
    throw IndexError("pair_index: negative token id (" + std::to_string(a) +
                     ", " + std::to_string(b) + ")");
  char key[24];
  char* q = std::to_chars(key, key + sizeof(key), a).ptr;
  *q++ = '-';
  q = std::to_chars(q, key + sizeof(key), b).ptr;
  return murmur3_32(key, static_cast<size_t>(q - key), h.seed) % h.table_size;
}

uint32_t table_hash_seed(uint32_t global_seed, size_t layer, size_t head) {
  std::string label = "L" + std::to_string(layer) + "H" + std::to_string(head);
  return murmur3_32(label.data(), label.size(), global_seed);
}

CollisionStats estimate_collision_rate(uint32_t table_size, size_t heads,
                                       size_t sample_pairs, Rng& rng) {
  if (table_size < 2)
    throw ConfigError("estimate_collision_rate: table_size below 2");
  if (heads < 1)
    throw ConfigError("estimate_collision_rate: need at least one table");
  if (sample_pairs < 1000)
    throw ConfigError("estimate_collision_rate: need at least 1000 samples");

  const uint32_t global_seed = rng.next_u32();
  std::vector<PairHasher> hashers(heads);
  for (size_t h = 0; h < heads; ++h)
    hashers[h] = PairHasher{table_hash_seed(global_seed, 0, h), table_size};

  constexpr uint64_t kTokenUniverse = 1u << 20;
  size_t one_hits = 0, all_hits = 0;
  for (size_t s = 0; s < sample_pairs; ++s) {
    int32_t a1, b1, a2, b2;
    do {
      a1 = static_cast<int32_t>(rng.below(kTokenUniverse));
      b1 = static_cast<int32_t>(rng.below(kTokenUniverse));
      a2 = static_cast<int32_t>(rng.below(kTokenUniverse));
      b2 = static_cast<int32_t>(rng.below(kTokenUniverse));
    } while (a1 == a2 && b1 == b2);

    bool all = true;
    for (size_t h = 0; h < heads; ++h) {
      bool hit =
          pair_index(a1, b1, hashers[h]) == pair_index(a2, b2, hashers[h]);
      if (h == 0 && hit) ++one_hits;
      if (!hit) {
        all = false;
        break;
      }
    }
    if (all) ++all_hits;
  }

  auto se = [sample_pairs](double p) {
    return std::sqrt(p * (1.0 - p) / static_cast<double>(sample_pairs));
  };
  CollisionStats st;
  st.samples = sample_pairs;
  st.per_table_rate = static_cast<double>(one_hits) / sample_pairs;
  st.per_table_se = se(st.per_table_rate);
  st.all_tables_rate = static_cast<double>(all_hits) / sample_pairs;
  st.all_tables_se = se(st.all_tables_rate);
  return st;
}

}  // namespace pc
