#include "pc/bench.hpp"

#include <sched.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <sstream>
#include <thread>

#include "pc/mlmdata.hpp"

namespace pc {

void BenchConfig::validate() const {
  if (seq_len < 2) throw ConfigError("BenchConfig: seq_len below 2");
  if (batch < 1) throw ConfigError("BenchConfig: batch must be positive");
  if (warmup < 5) throw ConfigError("BenchConfig: need at least 5 warmup iterations");
  if (iters < 30) throw ConfigError("BenchConfig: need at least 30 measured iterations");
  if (reps < 5) throw ConfigError("BenchConfig: need at least 5 repetitions");
}

namespace {

bool pin_current_thread(std::string& warning) {
  if (const char* env = std::getenv("PC_BENCH_PIN");
      env && std::strcmp(env, "0") == 0) {
    warning = "thread pinning disabled via PC_BENCH_PIN=0";
    return false;
  }
  int cpu = sched_getcpu();
  if (cpu < 0) cpu = 0;
  cpu_set_t set;
  CPU_ZERO(&set);
  CPU_SET(cpu, &set);
  if (sched_setaffinity(0, sizeof(set), &set) != 0) {
    warning = "could not pin thread to cpu " + std::to_string(cpu) + ": " +
              std::strerror(errno) + "; timings may be noisier";
    return false;
  }
  return true;
}

}  // namespace

std::string host_description() {
  std::string model = "unknown cpu";
  std::ifstream in("/proc/cpuinfo");
  std::string line;
  while (std::getline(in, line)) {
    if (line.rfind("model name", 0) == 0) {
      size_t colon = line.find(':');
      if (colon != std::string::npos) {
        model = line.substr(colon + 1);
        size_t a = model.find_first_not_of(' ');
        if (a != std::string::npos) model = model.substr(a);
      }
      break;
    }
  }
  return model + " (" + std::to_string(std::thread::hardware_concurrency()) +
         " hw threads)";
}

BenchReport bench_throughput(const Model& model, const BenchConfig& cfg) {
  cfg.validate();
  const ModelConfig& mc = model.config();

  BenchReport r;
  r.model = to_string(mc.kind);
  r.pool = mc.kind == ModelKind::kPairConnect ? to_string(mc.pool) : "-";
  r.layers = mc.layers;
  r.heads = mc.heads;
  r.dim = mc.dim;
  r.table_size = mc.kind == ModelKind::kPairConnect ? mc.table_size : 0;
  r.seq_len = cfg.seq_len;
  r.batch = cfg.batch;
  r.param_count = model.parameter_count();
  r.table_bytes = model.table_bytes();
  r.host = host_description();
  if (cfg.pin)
    r.pinned = pin_current_thread(r.warning);
  else
    r.warning = "thread pinning disabled in config";

  // Synthetic inputs: uniform real-word ids, one block per measured forward,
  // reused across repetitions.
  Rng rng(derive_seed(cfg.seed, seed_stream::kBench));
  const size_t block = cfg.seq_len * cfg.batch;
  const int32_t vocab_words =
      static_cast<int32_t>(mc.vocab_total) - kFirstWordId;
  if (vocab_words < 1)
    throw ConfigError("bench_throughput: vocab has no real words");
  std::vector<std::vector<int32_t>> inputs(cfg.warmup + cfg.iters);
  for (auto& ids : inputs) {
    ids.resize(block);
    for (auto& id : ids)
      id = kFirstWordId + static_cast<int32_t>(
                              rng.below(static_cast<uint64_t>(vocab_words)));
  }

  counters().reset();
  Tensor probe = model.forward(inputs[0], cfg.batch);
  r.flops_per_forward = counters().flops;
  r.lookups_per_forward = counters().lookups;
  (void)probe;

  using clock = std::chrono::steady_clock;
  r.rep_sps.reserve(cfg.reps);
  for (size_t rep = 0; rep < cfg.reps; ++rep) {
    for (size_t i = 0; i < cfg.warmup; ++i)
      (void)model.forward(inputs[i], cfg.batch);
    auto t0 = clock::now();
    for (size_t i = 0; i < cfg.iters; ++i)
      (void)model.forward(inputs[cfg.warmup + i], cfg.batch);
    double sec = std::chrono::duration<double>(clock::now() - t0).count();
    r.rep_sps.push_back(static_cast<double>(cfg.iters * cfg.batch) / sec);
  }

  std::vector<double> sorted = r.rep_sps;
  std::sort(sorted.begin(), sorted.end());
  const size_t n = sorted.size();
  r.median_sps = n % 2 ? sorted[n / 2]
                       : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
  double sum = 0;
  for (double s : sorted) sum += s;
  r.mean_sps = sum / static_cast<double>(n);
  double ss = 0;
  for (double s : sorted) ss += (s - r.mean_sps) * (s - r.mean_sps);
  r.stddev_sps = std::sqrt(ss / static_cast<double>(n - 1));
  return r;
}

std::vector<BenchReport> bench_sweep(const SweepSpec& spec) {
  if (spec.seq_lens.empty())
    throw ConfigError("bench_sweep: no sequence lengths");
  if (spec.table_sizes.empty())
    throw ConfigError("bench_sweep: no table sizes");
  std::vector<BenchReport> out;
  for (size_t m : spec.seq_lens) {
    BenchConfig bc = spec.bench;
    bc.seq_len = m;

    ModelConfig tx = spec.transformer;
    tx.kind = ModelKind::kTransformer;
    Model baseline = Model::make(tx, spec.init_seed);
    out.push_back(bench_throughput(baseline, bc));

    for (size_t k : spec.table_sizes) {
      ModelConfig pcc = spec.pairconnect;
      pcc.kind = ModelKind::kPairConnect;
      pcc.table_size = k;
      if (pcc.pool == PoolMode::kConcatProject) pcc.seq_len_fixed = m;
      Model candidate = Model::make(pcc, spec.init_seed);
      out.push_back(bench_throughput(candidate, bc));
    }
  }
  return out;
}

std::string bench_csv_header() {
  return "model,pool,layers,heads,dim,k,m,batch,median_sps,mean_sps,"
         "stddev_sps,flops_per_forward,lookups_per_forward,params,"
         "table_bytes";
}

std::string bench_csv_row(const BenchReport& r) {
  char buf[512];
  std::snprintf(buf, sizeof(buf),
                "%s,%s,%zu,%zu,%zu,%zu,%zu,%zu,%.6g,%.6g,%.6g,%llu,%llu,%zu,%zu",
                r.model.c_str(), r.pool.c_str(), r.layers, r.heads, r.dim,
                r.table_size, r.seq_len, r.batch, r.median_sps, r.mean_sps,
                r.stddev_sps,
                static_cast<unsigned long long>(r.flops_per_forward),
                static_cast<unsigned long long>(r.lookups_per_forward),
                r.param_count, r.table_bytes);
  return buf;
}

}  // namespace pc
