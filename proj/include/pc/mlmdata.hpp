#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "pc/rng.hpp"

namespace pc {

// Token id layout: 0 = padding, 1 = mask, real words from 2 upward in
// descending corpus frequency (ties broken lexicographically).
constexpr int32_t kPadId = 0;
constexpr int32_t kMaskId = 1;
constexpr int32_t kFirstWordId = 2;

class Vocab {
 public:
  static Vocab build(const std::vector<std::string>& tokens);

  int32_t id(const std::string& word) const;  // DataError on unknown words
  const std::string& word(int32_t id) const;
  size_t words() const { return id_to_word_.size() - kFirstWordId; }
  size_t total() const { return id_to_word_.size(); }  // including pad + mask

  std::vector<int32_t> encode(const std::vector<std::string>& tokens) const;

  void save_tsv(const std::string& path) const;
  static Vocab load_tsv(const std::string& path);

 private:
  std::vector<std::string> id_to_word_;
  std::vector<std::pair<std::string, int32_t>> sorted_;  // for lookup
};

// Splits a token stream into fixed-length rows; the final short row is padded
// with kPadId. seq_len must be at least 2.
std::vector<std::vector<int32_t>> chunk_sequences(std::span<const int32_t> ids,
                                                  size_t seq_len);

struct DataConfig {
  size_t seq_len = 128;
  size_t batch = 32;
  double mask_token_fraction = 0.15;      // of real tokens, per sequence
  double masked_sequence_fraction = 0.90; // sequences that get masked at all
  uint64_t seed = 0;
  void validate() const;
};

struct MaskedBatch {
  static constexpr int32_t kIgnore = -1;
  size_t batch = 0;
  size_t seq_len = 0;
  std::vector<int32_t> inputs;   // batch x seq_len, mask applied
  std::vector<int32_t> targets;  // original ids at masked slots, else kIgnore
  std::vector<std::vector<size_t>> mask_positions;  // per row, ascending

  size_t masked_count() const;
  std::vector<uint8_t> ignore_mask() const;  // flat, 1 where target == kIgnore
};

// Masks one sequence: with probability masked_sequence_fraction it picks
// round(mask_token_fraction * n_real) real-token positions (at least one)
// uniformly without replacement and overwrites them with kMaskId. Unselected
// sequences come back untouched with no mask positions. Padding is never
// masked.
struct MaskedRow {
  std::vector<int32_t> input;
  std::vector<int32_t> target;
  std::vector<size_t> positions;
};
MaskedRow apply_mlm_mask(std::span<const int32_t> seq, const DataConfig& cfg,
                         Rng& rng);

struct Dataset {
  size_t seq_len = 0;
  std::vector<std::vector<int32_t>> sequences;
};

Dataset dataset_from_ids(std::span<const int32_t> ids, size_t seq_len);

// Synthetic successor-cycle corpus over `vocab_words` ids: within a sequence
// each token is the previous one advanced by one step around the cycle
// 2..2+vocab_words-1; the starting point is random per sequence.
Dataset make_cycle_dataset(size_t vocab_words, size_t seq_len, size_t count,
                           uint64_t seed);

// Deterministic shuffled batch source. Epoch e uses the permutation seeded by
// (seed, e); the mask rng for batch b of epoch e is seeded by (seed, e, b),
// so any step's batch can be reproduced directly: that is what seek() does.
class BatchStream {
 public:
  BatchStream(const Dataset& data, DataConfig cfg);

  MaskedBatch next();
  void seek(uint64_t step);
  uint64_t step() const { return step_; }
  size_t batches_per_epoch() const { return batches_per_epoch_; }

 private:
  const Dataset* data_;
  DataConfig cfg_;
  uint64_t step_ = 0;
  uint64_t epoch_ = UINT64_MAX;
  std::vector<size_t> order_;
  size_t batches_per_epoch_ = 0;

  void load_epoch(uint64_t epoch);
};

// Fixed masked batches for evaluation: sequential order, masking seeded only
// by (seed, batch index), identical for every caller.
std::vector<MaskedBatch> make_eval_batches(const Dataset& data,
                                           const DataConfig& cfg);

std::vector<std::string> read_token_file(const std::string& path);

}  // namespace pc
