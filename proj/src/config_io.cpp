#include "pc/config_io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace pc {

namespace {

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

uint64_t parse_u64(const std::string& key, const std::string& v) {
  try {
    size_t pos = 0;
    if (!v.empty() && v[0] == '-')
      throw ConfigError("config: " + key + " must be non-negative, got " + v);
    uint64_t out = std::stoull(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return out;
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception&) {
    throw ConfigError("config: bad integer for " + key + ": '" + v + "'");
  }
}

double parse_f64(const std::string& key, const std::string& v) {
  try {
    size_t pos = 0;
    double out = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return out;
  } catch (const std::exception&) {
    throw ConfigError("config: bad number for " + key + ": '" + v + "'");
  }
}

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

}  // namespace

std::string serialize_config(const TrainConfig& cfg) {
  std::ostringstream os;
  os << "model = " << to_string(cfg.model.kind) << '\n'
     << "layers = " << cfg.model.layers << '\n'
     << "heads = " << cfg.model.heads << '\n'
     << "dim = " << cfg.model.dim << '\n'
     << "hidden = " << cfg.model.hidden << '\n'
     << "k = " << cfg.model.table_size << '\n'
     << "pool = " << to_string(cfg.model.pool) << '\n'
     << "dropout = " << fmt_double(cfg.model.dropout) << '\n'
     << "hash_seed = " << cfg.model.hash_seed << '\n'
     << "vocab_total = " << cfg.model.vocab_total << '\n'
     << "seq_len_fixed = " << cfg.model.seq_len_fixed << '\n'
     << "seq_len = " << cfg.seq_len << '\n'
     << "batch = " << cfg.batch << '\n'
     << "mask_fraction = " << fmt_double(cfg.mask_fraction) << '\n'
     << "seq_mask_fraction = " << fmt_double(cfg.seq_mask_fraction) << '\n'
     << "lr = " << fmt_double(cfg.adam.lr) << '\n'
     << "beta1 = " << fmt_double(cfg.adam.beta1) << '\n'
     << "beta2 = " << fmt_double(cfg.adam.beta2) << '\n'
     << "eps = " << fmt_double(cfg.adam.eps) << '\n'
     << "seed = " << cfg.seed << '\n'
     << "steps = " << cfg.steps << '\n'
     << "eval_every = " << cfg.eval_every << '\n';
  return os.str();
}

TrainConfig parse_config(const std::string& text) {
  TrainConfig cfg;
  std::istringstream in(text);
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string s = trim(line);
    if (s.empty() || s[0] == '#') continue;
    size_t eq = s.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(lineno) +
                        ": expected key = value, got '" + s + "'");
    std::string key = trim(s.substr(0, eq));
    std::string val = trim(s.substr(eq + 1));

    if (key == "model") cfg.model.kind = model_kind_from_string(val);
    else if (key == "layers") cfg.model.layers = parse_u64(key, val);
    else if (key == "heads") cfg.model.heads = parse_u64(key, val);
    else if (key == "dim") cfg.model.dim = parse_u64(key, val);
    else if (key == "hidden") cfg.model.hidden = parse_u64(key, val);
    else if (key == "k") cfg.model.table_size = parse_u64(key, val);
    else if (key == "pool") cfg.model.pool = pool_mode_from_string(val);
    else if (key == "dropout") cfg.model.dropout = parse_f64(key, val);
    else if (key == "hash_seed")
      cfg.model.hash_seed = static_cast<uint32_t>(parse_u64(key, val));
    else if (key == "vocab_total") cfg.model.vocab_total = parse_u64(key, val);
    else if (key == "seq_len_fixed")
      cfg.model.seq_len_fixed = parse_u64(key, val);
    else if (key == "seq_len") cfg.seq_len = parse_u64(key, val);
    else if (key == "batch") cfg.batch = parse_u64(key, val);
    else if (key == "mask_fraction") cfg.mask_fraction = parse_f64(key, val);
    else if (key == "seq_mask_fraction")
      cfg.seq_mask_fraction = parse_f64(key, val);
    else if (key == "lr") cfg.adam.lr = parse_f64(key, val);
    else if (key == "beta1") cfg.adam.beta1 = parse_f64(key, val);
    else if (key == "beta2") cfg.adam.beta2 = parse_f64(key, val);
    else if (key == "eps") cfg.adam.eps = parse_f64(key, val);
    else if (key == "seed") cfg.seed = parse_u64(key, val);
    else if (key == "steps") cfg.steps = parse_u64(key, val);
    else if (key == "eval_every") cfg.eval_every = parse_u64(key, val);
    else
      throw ConfigError("config line " + std::to_string(lineno) +
                        ": unknown key '" + key + "'");
  }
  return cfg;
}

TrainConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("load_config_file: cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

}  // namespace pc
