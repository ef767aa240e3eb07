#include <cmath>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "pc/bench.hpp"
#include "pc/checkpoint.hpp"
#include "pc/config_io.hpp"
#include "pc/model_gradcheck.hpp"
#include "pc/tinytask.hpp"

namespace {

using namespace pc;

std::vector<size_t> parse_size_list(const std::string& s, const char* what) {
  std::vector<size_t> out;
  size_t pos = 0;
  while (pos <= s.size()) {
    size_t comma = s.find(',', pos);
    if (comma == std::string::npos) comma = s.size();
    std::string item = s.substr(pos, comma - pos);
    if (item.empty())
      throw ConfigError(std::string(what) + ": empty entry in list '" + s + "'");
    try {
      size_t used = 0;
      unsigned long long v = std::stoull(item, &used);
      if (used != item.size()) throw std::invalid_argument(item);
      out.push_back(static_cast<size_t>(v));
    } catch (const std::exception&) {
      throw ConfigError(std::string(what) + ": bad value '" + item + "'");
    }
    pos = comma + 1;
  }
  return out;
}

void check_precision(const std::string& precision) {
  if (precision.empty()) return;
  const std::string built = sizeof(real) == 8 ? "f64" : "f32";
  if (precision != "f32" && precision != "f64")
    throw ConfigError("--precision must be f32 or f64");
  if (precision != built)
    throw ConfigError("this binary is built with " + built +
                      " scalars; rebuild with -DPC_REAL_FLOAT32=" +
                      (precision == "f32" ? std::string("ON") : "OFF") +
                      " to get " + precision);
}

// Everything the CLI can override about a TrainConfig; unset options keep the
// config-file (or built-in) value.
struct TrainOverrides {
  std::optional<std::string> model, pool;
  std::optional<size_t> layers, heads, dim, hidden, k;
  std::optional<double> dropout, lr, mask_fraction, seq_mask_fraction;
  std::optional<size_t> seq_len, batch;
  std::optional<uint64_t> seed, steps, eval_every;
  std::optional<uint32_t> hash_seed;

  void apply(TrainConfig& cfg) const {
    if (model) cfg.model.kind = model_kind_from_string(*model);
    if (pool) cfg.model.pool = pool_mode_from_string(*pool);
    if (layers) cfg.model.layers = *layers;
    if (heads) cfg.model.heads = *heads;
    if (dim) cfg.model.dim = *dim;
    if (hidden) cfg.model.hidden = *hidden;
    if (k) cfg.model.table_size = *k;
    if (dropout) cfg.model.dropout = *dropout;
    if (hash_seed) cfg.model.hash_seed = *hash_seed;
    if (lr) cfg.adam.lr = *lr;
    if (mask_fraction) cfg.mask_fraction = *mask_fraction;
    if (seq_mask_fraction) cfg.seq_mask_fraction = *seq_mask_fraction;
    if (seq_len) cfg.seq_len = *seq_len;
    if (batch) cfg.batch = *batch;
    if (seed) cfg.seed = *seed;
    if (steps) cfg.steps = *steps;
    if (eval_every) cfg.eval_every = *eval_every;
  }
};

void add_train_overrides(CLI::App* cmd, TrainOverrides& o) {
  cmd->add_option("--model", o.model, "pairconnect or transformer");
  cmd->add_option("--pool", o.pool,
                  "per-pair-mlp, pool-then-mlp or concat-project");
  cmd->add_option("--layers", o.layers);
  cmd->add_option("--heads", o.heads);
  cmd->add_option("--dim", o.dim);
  cmd->add_option("--hidden", o.hidden);
  cmd->add_option("--k", o.k, "pair-table slots per head");
  cmd->add_option("--dropout", o.dropout);
  cmd->add_option("--hash-seed", o.hash_seed);
  cmd->add_option("--lr", o.lr);
  cmd->add_option("--mask-fraction", o.mask_fraction);
  cmd->add_option("--seq-mask-fraction", o.seq_mask_fraction);
  cmd->add_option("--seq-len", o.seq_len);
  cmd->add_option("--batch", o.batch);
  cmd->add_option("--seed", o.seed);
  cmd->add_option("--steps", o.steps);
  cmd->add_option("--eval-every", o.eval_every);
}

struct DataOpts {
  std::string corpus, eval_corpus, vocab_path;
  bool cycle = false;
  size_t cycle_vocab = 20;
  size_t cycle_train = 2048;
  size_t cycle_eval = 256;
};

void add_data_opts(CLI::App* cmd, DataOpts& d) {
  cmd->add_option("--corpus", d.corpus,
                  "whitespace-tokenized training text file");
  cmd->add_option("--eval-corpus", d.eval_corpus,
                  "held-out text file (defaults to the training corpus)");
  cmd->add_flag("--cycle", d.cycle, "use the synthetic successor-cycle corpus");
  cmd->add_option("--cycle-vocab", d.cycle_vocab, "cycle length");
  cmd->add_option("--cycle-train", d.cycle_train, "training sequences");
  cmd->add_option("--cycle-eval", d.cycle_eval, "eval sequences");
}

struct BuiltData {
  Dataset train, eval;
  std::optional<Vocab> vocab;
  size_t vocab_total = 0;
};

BuiltData build_data(const DataOpts& d, size_t seq_len, uint64_t seed) {
  BuiltData out;
  if (d.cycle == d.corpus.empty() && !d.cycle)
    throw ConfigError("pick a data source: --corpus <file> or --cycle");
  if (d.cycle && !d.corpus.empty())
    throw ConfigError("--cycle and --corpus are mutually exclusive");
  if (d.cycle) {
    out.train = make_cycle_dataset(d.cycle_vocab, seq_len, d.cycle_train,
                                   derive_seed(seed, seed_stream::kTrainData));
    out.eval = make_cycle_dataset(d.cycle_vocab, seq_len, d.cycle_eval,
                                  derive_seed(seed, seed_stream::kEvalData));
    out.vocab_total = d.cycle_vocab + 2;
    return out;
  }
  std::vector<std::string> tokens = read_token_file(d.corpus);
  out.vocab = Vocab::build(tokens);
  out.train = dataset_from_ids(out.vocab->encode(tokens), seq_len);
  if (!d.eval_corpus.empty()) {
    std::vector<std::string> etok = read_token_file(d.eval_corpus);
    out.eval = dataset_from_ids(out.vocab->encode(etok), seq_len);
  } else {
    out.eval = out.train;
  }
  out.vocab_total = out.vocab->total();
  return out;
}

int cmd_train(const std::string& config_path, const TrainOverrides& over,
              const DataOpts& data_opts, const std::string& resume,
              const std::string& checkpoint_out, const std::string& metrics,
              const std::string& vocab_out) {
  TrainConfig cfg;
  std::optional<TrainSession> session;
  if (!resume.empty()) {
    session = session_from_checkpoint(load_checkpoint(resume));
    cfg = session->cfg;
    if (!config_path.empty())
      throw ConfigError("--resume and --config are mutually exclusive");
    TrainOverrides allowed;  // only the run length may change on resume
    allowed.steps = over.steps;
    allowed.eval_every = over.eval_every;
    allowed.apply(cfg);
    session->cfg = cfg;
  } else {
    if (!config_path.empty()) cfg = load_config_file(config_path);
    over.apply(cfg);
  }

  BuiltData data = build_data(data_opts, cfg.seq_len, cfg.seed);
  if (session) {
    if (cfg.model.vocab_total != data.vocab_total)
      throw ConfigError("resume: checkpoint vocab_total " +
                        std::to_string(cfg.model.vocab_total) +
                        " vs data " + std::to_string(data.vocab_total));
  } else {
    cfg.model.vocab_total = data.vocab_total;
    if (cfg.model.pool == PoolMode::kConcatProject)
      cfg.model.seq_len_fixed = cfg.seq_len;
    cfg.validate();
    session = TrainSession::fresh(cfg);
  }

  if (data.vocab && !vocab_out.empty()) data.vocab->save_tsv(vocab_out);

  BatchStream stream(data.train, cfg.data_config());
  std::vector<MaskedBatch> eval_batches =
      make_eval_batches(data.eval, cfg.data_config());
  MetricsLog log = metrics.empty() ? MetricsLog() : MetricsLog(metrics);

  std::printf("training %s: %zu layers, %zu heads, d=%zu, vocab=%zu, "
              "%llu -> %llu steps\n",
              to_string(cfg.model.kind), cfg.model.layers, cfg.model.heads,
              cfg.model.dim, cfg.model.vocab_total,
              static_cast<unsigned long long>(session->step),
              static_cast<unsigned long long>(cfg.steps));
  train_steps(*session, stream, cfg.steps, eval_batches, &log);

  EvalResult ev = evaluate(session->model, eval_batches);
  std::printf("step %llu: eval loss %.6f, masked accuracy %.4f (%zu slots)\n",
              static_cast<unsigned long long>(session->step), ev.loss,
              ev.accuracy, ev.masked);

  if (!checkpoint_out.empty()) {
    save_checkpoint(checkpoint_out, *session);
    std::printf("checkpoint written to %s\n", checkpoint_out.c_str());
  }
  return 0;
}

int cmd_eval(const std::string& ckpt_path, const DataOpts& data_opts) {
  LoadedCheckpoint ck = load_checkpoint(ckpt_path);
  BuiltData data = build_data(data_opts, ck.cfg.seq_len, ck.cfg.seed);
  if (data.vocab_total != ck.cfg.model.vocab_total)
    throw ConfigError("eval: checkpoint vocab_total " +
                      std::to_string(ck.cfg.model.vocab_total) + " vs data " +
                      std::to_string(data.vocab_total));
  std::vector<MaskedBatch> batches =
      make_eval_batches(data.eval, ck.cfg.data_config());
  EvalResult ev = evaluate(ck.model, batches);
  std::printf("eval loss %.6f, masked accuracy %.4f over %zu masked slots\n",
              ev.loss, ev.accuracy, ev.masked);
  return 0;
}

void print_bench_report(const BenchReport& r) {
  std::printf("%s", r.model.c_str());
  if (r.pool != "-") std::printf(" (%s)", r.pool.c_str());
  std::printf(": L=%zu h=%zu d=%zu", r.layers, r.heads, r.dim);
  if (r.table_size) std::printf(" K=%zu", r.table_size);
  std::printf(" m=%zu batch=%zu\n", r.seq_len, r.batch);
  std::printf("  host: %s%s\n", r.host.c_str(),
              r.pinned ? ", pinned" : ", not pinned");
  if (!r.warning.empty()) std::printf("  warning: %s\n", r.warning.c_str());
  std::printf("  samples/sec: median %.2f, mean %.2f, stddev %.2f over %zu reps\n",
              r.median_sps, r.mean_sps, r.stddev_sps, r.rep_sps.size());
  std::printf("  per forward: %.3g flops, %llu table lookups\n",
              static_cast<double>(r.flops_per_forward),
              static_cast<unsigned long long>(r.lookups_per_forward));
  std::printf("  params: %zu scalars, pair tables %.1f MiB\n", r.param_count,
              static_cast<double>(r.table_bytes) / (1024.0 * 1024.0));
}

void write_csv(const std::string& path, const std::vector<BenchReport>& rows) {
  std::ofstream out(path);
  if (!out) throw IoError("bench: cannot open " + path);
  out << bench_csv_header() << '\n';
  for (const BenchReport& r : rows) out << bench_csv_row(r) << '\n';
}

ModelConfig bench_model_config(const TrainOverrides& over, size_t seq_len) {
  TrainConfig cfg;
  cfg.model.vocab_total = 10000;  // synthetic benchmark vocabulary
  cfg.seq_len = seq_len;
  over.apply(cfg);
  if (cfg.model.pool == PoolMode::kConcatProject)
    cfg.model.seq_len_fixed = cfg.seq_len;
  cfg.model.validate();
  return cfg.model;
}

int cmd_bench(const TrainOverrides& over, const std::string& ckpt_path,
              BenchConfig bench, std::optional<size_t> vocab,
              const std::string& csv) {
  std::optional<LoadedCheckpoint> ck;
  std::optional<Model> model;
  if (!ckpt_path.empty()) {
    ck = load_checkpoint(ckpt_path);
    model = std::move(ck->model);
  } else {
    ModelConfig mc = bench_model_config(over, bench.seq_len);
    if (vocab) mc.vocab_total = *vocab;
    model = Model::make(mc, bench.seed);
  }
  BenchReport r = bench_throughput(*model, bench);
  print_bench_report(r);
  if (!csv.empty()) write_csv(csv, {r});
  return 0;
}

int cmd_sweep(const TrainOverrides& over, const std::string& ms,
              const std::string& ks, BenchConfig bench,
              std::optional<size_t> vocab, const std::string& csv) {
  SweepSpec spec;
  spec.seq_lens = parse_size_list(ms, "--m");
  spec.table_sizes = parse_size_list(ks, "--k");
  spec.bench = bench;
  spec.init_seed = bench.seed;

  TrainConfig base;
  base.model.vocab_total = vocab ? *vocab : 10000;
  over.apply(base);
  spec.pairconnect = base.model;
  spec.transformer = base.model;
  spec.transformer.kind = ModelKind::kTransformer;
  spec.pairconnect.kind = ModelKind::kPairConnect;

  std::vector<BenchReport> rows = bench_sweep(spec);
  std::printf("%s\n", bench_csv_header().c_str());
  for (const BenchReport& r : rows)
    std::printf("%s\n", bench_csv_row(r).c_str());
  if (!csv.empty()) write_csv(csv, rows);
  return 0;
}

int cmd_gradcheck(const std::string& model, const std::string& pool, double h,
                  double tol, uint64_t seed) {
  struct Case {
    ModelKind kind;
    PoolMode mode;
  };
  std::vector<Case> cases;
  auto add_pc = [&](PoolMode m) {
    cases.push_back({ModelKind::kPairConnect, m});
  };
  if (model == "pairconnect" || model == "both") {
    if (pool == "all") {
      add_pc(PoolMode::kPerPairMlp);
      add_pc(PoolMode::kPoolThenMlp);
      add_pc(PoolMode::kConcatProject);
    } else {
      add_pc(pool_mode_from_string(pool));
    }
  }
  if (model == "transformer" || model == "both")
    cases.push_back({ModelKind::kTransformer, PoolMode::kPoolThenMlp});
  if (cases.empty())
    throw ConfigError("gradcheck: --model must be pairconnect, transformer or both");

  bool ok = true;
  for (const Case& c : cases) {
    ModelGradCheckSpec spec;
    spec.kind = c.kind;
    spec.pool = c.mode;
    spec.h = h;
    spec.seed = seed;
    GradCheckResult res = run_model_gradcheck(spec);
    bool pass = res.max_rel_err <= tol;
    ok = ok && pass;
    std::printf("%-12s %-15s max rel err %.3e, max abs err %.3e over %zu "
                "grads (worst %s[%zu]: analytic %.9e vs numeric %.9e) %s\n",
                to_string(c.kind),
                c.kind == ModelKind::kPairConnect ? to_string(c.mode) : "-",
                res.max_rel_err, res.max_abs_err, res.checked,
                res.worst_param.c_str(), res.worst_flat_index, res.analytic,
                res.numeric, pass ? "ok" : "FAIL");
  }
  return ok ? 0 : 1;
}

int cmd_collide(size_t k, size_t heads, size_t samples, uint64_t seed) {
  Rng rng(seed);
  CollisionStats st =
      estimate_collision_rate(static_cast<uint32_t>(k), heads, samples, rng);
  const double expect_one = 1.0 / static_cast<double>(k);
  const double expect_all =
      std::pow(expect_one, static_cast<double>(heads));
  std::printf("K=%zu, %zu tables, %zu sampled pairs\n", k, heads, st.samples);
  std::printf("  single table: %.6g +/- %.2g (expect about %.6g)\n",
              st.per_table_rate, st.per_table_se, expect_one);
  std::printf("  all tables simultaneously: %.6g +/- %.2g (expect about %.6g)\n",
              st.all_tables_rate, st.all_tables_se, expect_all);
  return 0;
}

int cmd_ablate(const std::string& ks, uint64_t steps, uint64_t seed,
               const std::string& pool, const std::string& csv) {
  std::vector<size_t> k_list = parse_size_list(ks, "--k");
  std::ostringstream table;
  table << "k,eval_loss,eval_accuracy\n";
  for (size_t k : k_list) {
    TinyTaskConfig cfg;
    cfg.kind = ModelKind::kPairConnect;
    cfg.pool = pool_mode_from_string(pool);
    cfg.table_size = k;
    cfg.seed = seed;
    cfg.steps = steps;
    TinyTaskOutcome out = run_tiny_task(cfg);
    char row[96];
    std::snprintf(row, sizeof(row), "%zu,%.6f,%.4f", k, out.eval.loss,
                  out.eval.accuracy);
    table << row << '\n';
    std::printf("K=%-6zu eval loss %.6f, accuracy %.4f\n", k, out.eval.loss,
                out.eval.accuracy);
  }
  if (!csv.empty()) {
    std::ofstream out(csv);
    if (!out) throw IoError("ablate-hash: cannot open " + csv);
    out << table.str();
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"PairConnect: pair-table MLMs and a Transformer baseline"};
  app.require_subcommand(1);
  std::string precision;
  app.add_option("--precision", precision,
                 "assert the scalar width this binary was built with (f32/f64)");

  // train
  auto* train = app.add_subcommand("train", "train a model with masked-token loss");
  TrainOverrides train_over;
  DataOpts train_data;
  std::string train_config, train_resume, train_ckpt, train_metrics, train_vocab;
  add_train_overrides(train, train_over);
  add_data_opts(train, train_data);
  train->add_option("--config", train_config, "key = value config file");
  train->add_option("--resume", train_resume, "checkpoint to continue from");
  train->add_option("--checkpoint", train_ckpt, "write final checkpoint here");
  train->add_option("--metrics", train_metrics, "append metrics CSV here");
  train->add_option("--vocab-out", train_vocab, "write vocabulary TSV here");

  // eval
  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint");
  DataOpts eval_data;
  std::string eval_ckpt;
  add_data_opts(eval, eval_data);
  eval->add_option("--checkpoint", eval_ckpt)->required();

  // bench
  auto* bench = app.add_subcommand("bench", "single-thread inference throughput");
  TrainOverrides bench_over;
  BenchConfig bench_cfg;
  std::string bench_ckpt, bench_csv;
  std::optional<size_t> bench_vocab;
  add_train_overrides(bench, bench_over);
  bench->add_option("--checkpoint", bench_ckpt, "benchmark a trained model");
  bench->add_option("--m", bench_cfg.seq_len, "sequence length");
  bench->add_option("--bench-batch", bench_cfg.batch);
  bench->add_option("--warmup", bench_cfg.warmup);
  bench->add_option("--iters", bench_cfg.iters);
  bench->add_option("--reps", bench_cfg.reps);
  bench->add_option("--vocab-total", bench_vocab, "synthetic vocabulary size");
  bench->add_flag("!--no-pin", bench_cfg.pin, "do not pin the thread");
  bench->add_option("--csv", bench_csv);

  // sweep
  auto* sweep = app.add_subcommand(
      "sweep", "benchmark both models across sequence lengths and table sizes");
  TrainOverrides sweep_over;
  BenchConfig sweep_cfg;
  std::string sweep_ms = "128", sweep_ks = "100,1000,10000", sweep_csv;
  std::optional<size_t> sweep_vocab;
  add_train_overrides(sweep, sweep_over);
  sweep->add_option("--m", sweep_ms, "comma list of sequence lengths");
  sweep->add_option("--sweep-k", sweep_ks, "comma list of table sizes");
  sweep->add_option("--warmup", sweep_cfg.warmup);
  sweep->add_option("--iters", sweep_cfg.iters);
  sweep->add_option("--reps", sweep_cfg.reps);
  sweep->add_option("--vocab-total", sweep_vocab);
  sweep->add_flag("!--no-pin", sweep_cfg.pin);
  sweep->add_option("--csv", sweep_csv);

  // gradcheck
  auto* grad = app.add_subcommand("gradcheck",
                                  "finite-difference check on tiny models");
  std::string grad_model = "both", grad_pool = "all";
  double grad_h = 1e-5, grad_tol = 1e-6;
  uint64_t grad_seed = 7;
  grad->add_option("--model", grad_model, "pairconnect, transformer or both");
  grad->add_option("--pool", grad_pool, "pooling mode or 'all'");
  grad->add_option("--h-step", grad_h, "difference step");
  grad->add_option("--tol", grad_tol, "max relative error allowed");
  grad->add_option("--seed", grad_seed);

  // collide
  auto* collide = app.add_subcommand("collide",
                                     "Monte-Carlo pair-hash collision rates");
  size_t col_k = 1000, col_heads = 1, col_samples = 1000000;
  uint64_t col_seed = 7;
  collide->add_option("--k", col_k, "table size");
  collide->add_option("--heads", col_heads, "independent tables");
  collide->add_option("--samples", col_samples);
  collide->add_option("--seed", col_seed);

  // ablate-hash
  auto* ablate = app.add_subcommand(
      "ablate-hash", "table-size ablation on the synthetic cycle task");
  std::string ab_ks = "100,500,1000,5000,10000", ab_pool = "pool-then-mlp",
              ab_csv;
  uint64_t ab_steps = tiny::kDefaultSteps, ab_seed = 42;
  ablate->add_option("--k", ab_ks, "comma list of table sizes");
  ablate->add_option("--steps", ab_steps);
  ablate->add_option("--seed", ab_seed);
  ablate->add_option("--pool", ab_pool);
  ablate->add_option("--csv", ab_csv);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    check_precision(precision);
    if (train->parsed())
      return cmd_train(train_config, train_over, train_data, train_resume,
                       train_ckpt, train_metrics, train_vocab);
    if (eval->parsed()) return cmd_eval(eval_ckpt, eval_data);
    if (bench->parsed())
      return cmd_bench(bench_over, bench_ckpt, bench_cfg, bench_vocab,
                       bench_csv);
    if (sweep->parsed())
      return cmd_sweep(sweep_over, sweep_ms, sweep_ks, sweep_cfg, sweep_vocab,
                       sweep_csv);
    if (grad->parsed())
      return cmd_gradcheck(grad_model, grad_pool, grad_h, grad_tol, grad_seed);
    if (collide->parsed())
      return cmd_collide(col_k, col_heads, col_samples, col_seed);
    if (ablate->parsed())
      return cmd_ablate(ab_ks, ab_steps, ab_seed, ab_pool, ab_csv);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
