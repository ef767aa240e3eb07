#pragma once

#include <string>
#include <vector>

#include "pc/model.hpp"

namespace pc {

struct BenchConfig {
  size_t seq_len = 128;
  size_t batch = 1;
  size_t warmup = 5;  // discarded forwards per repetition
  size_t iters = 30;  // measured forwards per repetition
  size_t reps = 5;
  uint64_t seed = 1234;
  bool pin = true;  // pin to one core; PC_BENCH_PIN=0 also disables
  void validate() const;
};

struct BenchReport {
  std::string model;
  std::string pool;  // "-" for the baseline
  size_t layers = 0, heads = 0, dim = 0, table_size = 0, seq_len = 0,
         batch = 0;
  std::vector<double> rep_sps;  // samples/sec per repetition
  double median_sps = 0, mean_sps = 0, stddev_sps = 0;
  uint64_t flops_per_forward = 0;
  uint64_t lookups_per_forward = 0;
  size_t param_count = 0;
  size_t table_bytes = 0;
  std::string host;
  bool pinned = false;
  std::string warning;
};

// Single-thread inference throughput: `reps` repetitions of `iters` timed
// forwards (after warmup) over synthetic token blocks; reports the median,
// mean and sample standard deviation across repetitions, plus per-forward
// FLOP and table-lookup tallies from the kernel counters.
BenchReport bench_throughput(const Model& model, const BenchConfig& cfg);

// Cross product of sequence lengths and table sizes, baseline included once
// per sequence length.
struct SweepSpec {
  ModelConfig pairconnect;  // template; table_size/seq_len_fixed overridden
  ModelConfig transformer;
  std::vector<size_t> seq_lens;
  std::vector<size_t> table_sizes;
  uint64_t init_seed = 0;
  BenchConfig bench;
};
std::vector<BenchReport> bench_sweep(const SweepSpec& spec);

std::string bench_csv_header();
std::string bench_csv_row(const BenchReport& r);
std::string host_description();

}  // namespace pc
