#include "pc/checkpoint.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>

#include "pc/config_io.hpp"

namespace pc {

namespace {

constexpr char kMagic[8] = {'P', 'C', 'M', 'L', 'M', 'C', 'K', '1'};
constexpr uint32_t kVersion = 1;
constexpr uint32_t kTrailer = 0x31544B43;  // "CKT1"

using Kind = CheckpointError::Kind;

void put_u16(std::ostream& out, uint16_t v) {
  char b[2] = {static_cast<char>(v & 0xff), static_cast<char>(v >> 8)};
  out.write(b, 2);
}

void put_u32(std::ostream& out, uint32_t v) {
  char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(b, 4);
}

void put_u64(std::ostream& out, uint64_t v) {
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(b, 8);
}

void put_reals(std::ostream& out, const Tensor& t) {
  // Payload is the in-memory IEEE754 layout; this targets little-endian
  // hosts, which is asserted at build time below.
  out.write(reinterpret_cast<const char*>(t.data()),
            static_cast<std::streamsize>(t.numel() * sizeof(real)));
}

static_assert(std::endian::native == std::endian::little,
              "checkpoint payload assumes a little-endian host");

void read_exact(std::istream& in, char* buf, size_t n) {
  in.read(buf, static_cast<std::streamsize>(n));
  if (static_cast<size_t>(in.gcount()) != n)
    throw CheckpointError(Kind::Truncated, "checkpoint: unexpected end of file");
}

uint16_t get_u16(std::istream& in) {
  unsigned char b[2];
  read_exact(in, reinterpret_cast<char*>(b), 2);
  return static_cast<uint16_t>(b[0] | (b[1] << 8));
}

uint32_t get_u32(std::istream& in) {
  unsigned char b[4];
  read_exact(in, reinterpret_cast<char*>(b), 4);
  uint32_t v = 0;
  for (int i = 3; i >= 0; --i) v = (v << 8) | b[i];
  return v;
}

uint64_t get_u64(std::istream& in) {
  unsigned char b[8];
  read_exact(in, reinterpret_cast<char*>(b), 8);
  uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | b[i];
  return v;
}

void get_reals(std::istream& in, Tensor& t) {
  read_exact(in, reinterpret_cast<char*>(t.data()), t.numel() * sizeof(real));
}

void write_tensor_header(std::ostream& out, const std::string& name,
                         const Tensor& t) {
  if (name.size() > UINT16_MAX)
    throw ContractError("checkpoint: parameter name too long");
  put_u16(out, static_cast<uint16_t>(name.size()));
  out.write(name.data(), static_cast<std::streamsize>(name.size()));
  out.put(static_cast<char>(sizeof(real)));
  out.put(static_cast<char>(t.rank()));
  for (size_t i = 0; i < t.rank(); ++i) put_u64(out, t.extent(i));
}

struct TensorHeader {
  std::string name;
  Shape shape;
};

TensorHeader read_tensor_header(std::istream& in) {
  TensorHeader h;
  uint16_t nlen = get_u16(in);
  h.name.resize(nlen);
  read_exact(in, h.name.data(), nlen);
  char elem, rank;
  read_exact(in, &elem, 1);
  read_exact(in, &rank, 1);
  if (static_cast<size_t>(elem) != sizeof(real))
    throw CheckpointError(
        Kind::Corrupt, "checkpoint: stored scalars are " +
                           std::to_string(static_cast<int>(elem)) +
                           " bytes, this build uses " +
                           std::to_string(sizeof(real)));
  for (int i = 0; i < rank; ++i) h.shape.push_back(get_u64(in));
  return h;
}

std::vector<std::array<uint32_t, 3>> table_seeds(Model& model) {
  std::vector<std::array<uint32_t, 3>> out;
  PairConnectModel* m = model.pairconnect();
  if (!m) return out;
  for (size_t li = 0; li < m->layers.size(); ++li)
    for (size_t h = 0; h < m->layers[li].heads.size(); ++h)
      out.push_back({static_cast<uint32_t>(li), static_cast<uint32_t>(h),
                     m->layers[li].heads[h].pairs.hasher.seed});
  return out;
}

}  // namespace

void save_checkpoint(const std::string& path, Model& model,
                     const TrainConfig& cfg, const AdamState* adam,
                     uint64_t step) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("save_checkpoint: cannot open " + path);

  out.write(kMagic, 8);
  put_u32(out, kVersion);
  std::string config = serialize_config(cfg);
  put_u32(out, static_cast<uint32_t>(config.size()));
  out.write(config.data(), static_cast<std::streamsize>(config.size()));

  std::vector<NamedParam> params = model.parameters();
  put_u32(out, static_cast<uint32_t>(params.size()));
  for (const NamedParam& p : params) {
    write_tensor_header(out, p.name, *p.tensor);
    put_reals(out, *p.tensor);
  }

  auto seeds = table_seeds(model);
  put_u32(out, static_cast<uint32_t>(seeds.size()));
  for (const auto& s : seeds) {
    put_u32(out, s[0]);
    put_u32(out, s[1]);
    put_u32(out, s[2]);
  }

  out.put(adam ? 1 : 0);
  if (adam) {
    if (adam->m.size() != params.size())
      throw ContractError("save_checkpoint: optimizer state for " +
                          std::to_string(adam->m.size()) + " params, model has " +
                          std::to_string(params.size()));
    put_u64(out, adam->t);
    for (size_t i = 0; i < params.size(); ++i) {
      put_reals(out, adam->m[i]);
      put_reals(out, adam->v[i]);
    }
  }

  put_u64(out, step);
  put_u64(out, cfg.seed);
  put_u32(out, kTrailer);
  if (!out) throw IoError("save_checkpoint: write failed for " + path);
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("load_checkpoint: cannot open " + path);

  char magic[8];
  read_exact(in, magic, 8);
  if (std::memcmp(magic, kMagic, 8) != 0)
    throw CheckpointError(Kind::BadMagic,
                          "checkpoint: bad magic, not a checkpoint file");
  uint32_t version = get_u32(in);
  if (version != kVersion)
    throw CheckpointError(Kind::BadVersion,
                          "checkpoint: version " + std::to_string(version) +
                              ", this build reads " + std::to_string(kVersion));

  uint32_t config_len = get_u32(in);
  std::string config_text(config_len, '\0');
  read_exact(in, config_text.data(), config_len);
  TrainConfig cfg;
  try {
    cfg = parse_config(config_text);
  } catch (const ConfigError& e) {
    throw CheckpointError(Kind::Corrupt,
                          std::string("checkpoint: bad config block: ") +
                              e.what());
  }

  Model model = Model::make(cfg.model, cfg.seed);
  std::vector<NamedParam> params = model.parameters();
  uint32_t count = get_u32(in);
  if (count != params.size())
    throw CheckpointError(Kind::Corrupt,
                          "checkpoint: " + std::to_string(count) +
                              " tensors, config implies " +
                              std::to_string(params.size()));
  for (NamedParam& p : params) {
    TensorHeader h = read_tensor_header(in);
    if (h.name != p.name)
      throw CheckpointError(Kind::Corrupt, "checkpoint: tensor '" + h.name +
                                               "' where '" + p.name +
                                               "' expected");
    if (h.shape != p.tensor->shape())
      throw CheckpointError(Kind::Corrupt,
                            "checkpoint: " + h.name + " stored as " +
                                shape_str(h.shape) + ", config implies " +
                                p.tensor->shape_str());
    get_reals(in, *p.tensor);
  }

  auto expect_seeds = table_seeds(model);
  uint32_t nseeds = get_u32(in);
  if (nseeds != expect_seeds.size())
    throw CheckpointError(Kind::Corrupt,
                          "checkpoint: " + std::to_string(nseeds) +
                              " table seeds, config implies " +
                              std::to_string(expect_seeds.size()));
  for (const auto& s : expect_seeds) {
    uint32_t layer = get_u32(in), head = get_u32(in), seed = get_u32(in);
    if (layer != s[0] || head != s[1] || seed != s[2])
      throw CheckpointError(
          Kind::Corrupt, "checkpoint: hash seed mismatch at layer " +
                             std::to_string(layer) + " head " +
                             std::to_string(head));
  }

  char has_adam;
  read_exact(in, &has_adam, 1);
  std::optional<AdamState> adam;
  if (has_adam == 1) {
    AdamState st = AdamState::make(params, cfg.adam);
    st.t = get_u64(in);
    for (size_t i = 0; i < params.size(); ++i) {
      get_reals(in, st.m[i]);
      get_reals(in, st.v[i]);
    }
    adam = std::move(st);
  } else if (has_adam != 0) {
    throw CheckpointError(Kind::Corrupt, "checkpoint: bad optimizer flag");
  }

  uint64_t step = get_u64(in);
  uint64_t seed = get_u64(in);
  if (seed != cfg.seed)
    throw CheckpointError(Kind::Corrupt,
                          "checkpoint: run seed disagrees with config block");
  if (get_u32(in) != kTrailer)
    throw CheckpointError(Kind::Corrupt, "checkpoint: bad trailer");

  return LoadedCheckpoint{std::move(cfg), std::move(model), std::move(adam),
                          step};
}

TrainSession session_from_checkpoint(LoadedCheckpoint&& ck) {
  AdamState adam = ck.adam ? std::move(*ck.adam)
                           : AdamState::make(ck.model.parameters(), ck.cfg.adam);
  return TrainSession{std::move(ck.cfg), std::move(ck.model), std::move(adam),
                      ck.step};
}

}  // namespace pc
