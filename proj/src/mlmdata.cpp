#include "pc/mlmdata.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include "pc/errors.hpp"

namespace pc {

Vocab Vocab::build(const std::vector<std::string>& tokens) {
  if (tokens.empty()) throw DataError("Vocab::build: empty token list");
  std::unordered_map<std::string, size_t> counts;
  for (const std::string& t : tokens) ++counts[t];

  std::vector<std::pair<std::string, size_t>> by_freq(counts.begin(),
                                                      counts.end());
  std::sort(by_freq.begin(), by_freq.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });

  Vocab v;
  v.id_to_word_.reserve(by_freq.size() + 2);
  v.id_to_word_.push_back("<pad>");
  v.id_to_word_.push_back("<mask>");
  for (const auto& [word, n] : by_freq) v.id_to_word_.push_back(word);

  v.sorted_.reserve(v.id_to_word_.size());
  for (size_t i = 0; i < v.id_to_word_.size(); ++i)
    v.sorted_.emplace_back(v.id_to_word_[i], static_cast<int32_t>(i));
  std::sort(v.sorted_.begin(), v.sorted_.end());
  return v;
}

int32_t Vocab::id(const std::string& word) const {
  auto it = std::lower_bound(
      sorted_.begin(), sorted_.end(), word,
      [](const auto& entry, const std::string& w) { return entry.first < w; });
  if (it == sorted_.end() || it->first != word)
    throw DataError("Vocab: unknown word '" + word + "'");
  return it->second;
}

const std::string& Vocab::word(int32_t id) const {
  if (id < 0 || static_cast<size_t>(id) >= id_to_word_.size())
    throw IndexError("Vocab: id " + std::to_string(id) + " out of range [0, " +
                     std::to_string(id_to_word_.size()) + ")");
  return id_to_word_[static_cast<size_t>(id)];
}

std::vector<int32_t> Vocab::encode(
    const std::vector<std::string>& tokens) const {
  std::vector<int32_t> ids;
  ids.reserve(tokens.size());
  for (const std::string& t : tokens) ids.push_back(id(t));
  return ids;
}

void Vocab::save_tsv(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("Vocab::save_tsv: cannot open " + path);
  for (size_t i = 0; i < id_to_word_.size(); ++i)
    out << id_to_word_[i] << '\t' << i << '\n';
  if (!out) throw IoError("Vocab::save_tsv: write failed for " + path);
}

Vocab Vocab::load_tsv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("Vocab::load_tsv: cannot open " + path);
  Vocab v;
  std::string line;
  size_t expect = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    size_t tab = line.rfind('\t');
    if (tab == std::string::npos)
      throw DataError("Vocab::load_tsv: malformed line '" + line + "'");
    size_t id = std::stoull(line.substr(tab + 1));
    if (id != expect)
      throw DataError("Vocab::load_tsv: ids not contiguous at line " +
                      std::to_string(expect));
    v.id_to_word_.push_back(line.substr(0, tab));
    ++expect;
  }
  if (v.id_to_word_.size() < 3)
    throw DataError("Vocab::load_tsv: no real words in " + path);
  v.sorted_.reserve(v.id_to_word_.size());
  for (size_t i = 0; i < v.id_to_word_.size(); ++i)
    v.sorted_.emplace_back(v.id_to_word_[i], static_cast<int32_t>(i));
  std::sort(v.sorted_.begin(), v.sorted_.end());
  return v;
}

std::vector<std::vector<int32_t>> chunk_sequences(std::span<const int32_t> ids,
                                                  size_t seq_len) {
  if (seq_len < 2)
    throw ConfigError("chunk_sequences: seq_len " + std::to_string(seq_len) +
                      " below 2");
  if (ids.empty()) throw DataError("chunk_sequences: empty token stream");
  std::vector<std::vector<int32_t>> rows;
  for (size_t off = 0; off < ids.size(); off += seq_len) {
    size_t take = std::min(seq_len, ids.size() - off);
    std::vector<int32_t> row(ids.begin() + off, ids.begin() + off + take);
    row.resize(seq_len, kPadId);
    rows.push_back(std::move(row));
  }
  return rows;
}

void DataConfig::validate() const {
  if (seq_len < 2)
    throw ConfigError("DataConfig: seq_len " + std::to_string(seq_len) +
                      " below 2");
  if (batch < 1) throw ConfigError("DataConfig: batch must be positive");
  if (!(mask_token_fraction > 0.0) || mask_token_fraction > 1.0)
    throw ConfigError("DataConfig: mask_token_fraction " +
                      std::to_string(mask_token_fraction) + " outside (0, 1]");
  if (masked_sequence_fraction < 0.0 || masked_sequence_fraction > 1.0)
    throw ConfigError("DataConfig: masked_sequence_fraction " +
                      std::to_string(masked_sequence_fraction) +
                      " outside [0, 1]");
}

size_t MaskedBatch::masked_count() const {
  size_t n = 0;
  for (const auto& p : mask_positions) n += p.size();
  return n;
}

std::vector<uint8_t> MaskedBatch::ignore_mask() const {
  std::vector<uint8_t> m(targets.size());
  for (size_t i = 0; i < targets.size(); ++i) m[i] = targets[i] == kIgnore;
  return m;
}

MaskedRow apply_mlm_mask(std::span<const int32_t> seq, const DataConfig& cfg,
                         Rng& rng) {
  cfg.validate();
  MaskedRow row;
  row.input.assign(seq.begin(), seq.end());
  row.target.assign(seq.size(), MaskedBatch::kIgnore);

  std::vector<size_t> real;
  for (size_t i = 0; i < seq.size(); ++i)
    if (seq[i] >= kFirstWordId) real.push_back(i);
  if (real.empty())
    throw DataError("apply_mlm_mask: sequence has no real tokens");

  if (rng.uniform() >= cfg.masked_sequence_fraction) return row;

  size_t want = static_cast<size_t>(
      std::llround(cfg.mask_token_fraction * static_cast<double>(real.size())));
  want = std::min(std::max<size_t>(want, 1), real.size());

  // Partial Fisher-Yates: first `want` entries become the sample.
  for (size_t i = 0; i < want; ++i) {
    size_t j = i + static_cast<size_t>(rng.below(real.size() - i));
    std::swap(real[i], real[j]);
  }
  real.resize(want);
  std::sort(real.begin(), real.end());

  for (size_t pos : real) {
    row.target[pos] = row.input[pos];
    row.input[pos] = kMaskId;
  }
  row.positions = std::move(real);
  return row;
}

Dataset dataset_from_ids(std::span<const int32_t> ids, size_t seq_len) {
  Dataset d;
  d.seq_len = seq_len;
  d.sequences = chunk_sequences(ids, seq_len);
  return d;
}

Dataset make_cycle_dataset(size_t vocab_words, size_t seq_len, size_t count,
                           uint64_t seed) {
  if (vocab_words < 2)
    throw ConfigError("make_cycle_dataset: need at least 2 words");
  if (seq_len < 2) throw ConfigError("make_cycle_dataset: seq_len below 2");
  if (count < 1) throw ConfigError("make_cycle_dataset: empty dataset");
  Rng rng(seed);
  Dataset d;
  d.seq_len = seq_len;
  d.sequences.reserve(count);
  for (size_t s = 0; s < count; ++s) {
    size_t start = static_cast<size_t>(rng.below(vocab_words));
    std::vector<int32_t> row(seq_len);
    for (size_t t = 0; t < seq_len; ++t)
      row[t] =
          kFirstWordId + static_cast<int32_t>((start + t) % vocab_words);
    d.sequences.push_back(std::move(row));
  }
  return d;
}

namespace {

MaskedBatch build_batch(const Dataset& data, const std::vector<size_t>& rows,
                        const DataConfig& cfg, Rng& mask_rng) {
  MaskedBatch b;
  b.batch = rows.size();
  b.seq_len = data.seq_len;
  b.inputs.reserve(b.batch * b.seq_len);
  b.targets.reserve(b.batch * b.seq_len);
  for (size_t r : rows) {
    MaskedRow row = apply_mlm_mask(data.sequences[r], cfg, mask_rng);
    b.inputs.insert(b.inputs.end(), row.input.begin(), row.input.end());
    b.targets.insert(b.targets.end(), row.target.begin(), row.target.end());
    b.mask_positions.push_back(std::move(row.positions));
  }
  return b;
}

}  // namespace

BatchStream::BatchStream(const Dataset& data, DataConfig cfg)
    : data_(&data), cfg_(std::move(cfg)) {
  cfg_.validate();
  if (data.sequences.empty()) throw DataError("BatchStream: empty dataset");
  if (data.seq_len != cfg_.seq_len)
    throw ConfigError("BatchStream: dataset seq_len " +
                      std::to_string(data.seq_len) + " vs config " +
                      std::to_string(cfg_.seq_len));
  batches_per_epoch_ =
      (data.sequences.size() + cfg_.batch - 1) / cfg_.batch;
}

void BatchStream::load_epoch(uint64_t epoch) {
  order_.resize(data_->sequences.size());
  for (size_t i = 0; i < order_.size(); ++i) order_[i] = i;
  Rng rng(derive_seed(cfg_.seed, seed_stream::kShuffle, epoch));
  rng.shuffle(order_);
  epoch_ = epoch;
}

MaskedBatch BatchStream::next() {
  const uint64_t epoch = step_ / batches_per_epoch_;
  const uint64_t b = step_ % batches_per_epoch_;
  if (epoch != epoch_) load_epoch(epoch);

  size_t lo = static_cast<size_t>(b) * cfg_.batch;
  size_t hi = std::min(lo + cfg_.batch, order_.size());
  std::vector<size_t> rows(order_.begin() + lo, order_.begin() + hi);

  Rng mask_rng(derive_seed(cfg_.seed, seed_stream::kMask, epoch, b));
  MaskedBatch out = build_batch(*data_, rows, cfg_, mask_rng);
  ++step_;
  return out;
}

void BatchStream::seek(uint64_t step) {
  step_ = step;
  epoch_ = UINT64_MAX;  // force reshuffle on the next call
}

std::vector<MaskedBatch> make_eval_batches(const Dataset& data,
                                           const DataConfig& cfg) {
  cfg.validate();
  if (data.sequences.empty())
    throw DataError("make_eval_batches: empty dataset");
  if (data.seq_len != cfg.seq_len)
    throw ConfigError("make_eval_batches: dataset seq_len " +
                      std::to_string(data.seq_len) + " vs config " +
                      std::to_string(cfg.seq_len));
  std::vector<MaskedBatch> out;
  size_t nb = (data.sequences.size() + cfg.batch - 1) / cfg.batch;
  for (size_t b = 0; b < nb; ++b) {
    size_t lo = b * cfg.batch;
    size_t hi = std::min(lo + cfg.batch, data.sequences.size());
    std::vector<size_t> rows(hi - lo);
    for (size_t i = 0; i < rows.size(); ++i) rows[i] = lo + i;
    Rng mask_rng(derive_seed(cfg.seed, seed_stream::kEvalMask, b));
    out.push_back(build_batch(data, rows, cfg, mask_rng));
  }
  return out;
}

std::vector<std::string> read_token_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("read_token_file: cannot open " + path);
  std::vector<std::string> tokens;
  std::string t;
  while (in >> t) tokens.push_back(t);
  return tokens;
}

}  // namespace pc
