#pragma once

#include <algorithm>
#include <bit>
#include <cstdint>
#include <fstream>
#include <iterator>
#include <string>
#include <string_view>
#include <vector>

#include "dsclap/config.hpp"
#include "dsclap/errors.hpp"
#include "dsclap/model.hpp"
#include "dsclap/optimizer.hpp"

namespace dsclap {

/// Everything needed to reproduce training from this point: parameters,
/// optimizer moments, the config snapshot, and the RNG position. All
/// randomness is derived from (seed, epoch, sample id) counters, so the
/// progress counters fully determine the RNG state.
struct Checkpoint {
  Model model;
  OptimizerState optimizer;
  TrainConfig config;
  std::uint64_t epochs_completed = 0;
  std::uint64_t global_step = 0;
  Task task = Task::none;

  bool operator==(const Checkpoint&) const = default;
};

// ============================================================================
// Binary format
//
// magic "DSCK" | u32 version | u32 array count | arrays. Each array:
// u16 name length | name bytes | u8 rank | u64 dims[rank] | f64 payload.
// Everything little-endian regardless of host. Integer-valued metadata
// rides in the f64 slots as raw 64-bit words, so any u64 (e.g. a seed)
// survives bit-exactly.
// ============================================================================

inline constexpr std::uint32_t kCheckpointVersion = 1;
inline constexpr std::string_view kCheckpointMagic = "DSCK";

namespace detail {

inline void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline void put_u16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
}

inline void put_f64(std::string& out, double v) {
  put_u64(out, std::bit_cast<std::uint64_t>(v));
}

struct ByteReader {
  std::string_view data;
  std::size_t pos = 0;

  void require(std::size_t n) const {
    if (pos + n > data.size())
      throw DataFormatError("incompatible checkpoint: truncated file");
  }
  std::uint64_t u64() {
    require(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i)
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(data[pos + i])) << (8 * i);
    pos += 8;
    return v;
  }
  std::uint32_t u32() {
    require(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
      v |= static_cast<std::uint32_t>(static_cast<unsigned char>(data[pos + i])) << (8 * i);
    pos += 4;
    return v;
  }
  std::uint16_t u16() {
    require(2);
    std::uint16_t v = static_cast<std::uint16_t>(
        static_cast<unsigned char>(data[pos]) |
        (static_cast<unsigned char>(data[pos + 1]) << 8));
    pos += 2;
    return v;
  }
  std::uint8_t u8() {
    require(1);
    return static_cast<std::uint8_t>(data[pos++]);
  }
  double f64() { return std::bit_cast<double>(u64()); }
};

struct NamedArray {
  std::string name;
  std::vector<std::size_t> dims;
  Vec values;
};

inline void append_array(std::string& out, std::string_view name,
                         const std::vector<std::size_t>& dims,
                         const double* values, std::size_t count) {
  if (name.size() > 0xffff) throw InvalidArgument("tensor name too long");
  put_u16(out, static_cast<std::uint16_t>(name.size()));
  out.append(name);
  out.push_back(static_cast<char>(dims.size()));
  for (std::size_t d : dims) put_u64(out, d);
  for (std::size_t i = 0; i < count; ++i) put_f64(out, values[i]);
}

/// u64 carried bit-exactly inside an f64 slot.
inline double word(std::uint64_t v) { return std::bit_cast<double>(v); }
inline std::uint64_t unword(double v) { return std::bit_cast<std::uint64_t>(v); }

}  // namespace detail

inline std::string serialize_checkpoint(const Checkpoint& ckpt) {
  using detail::word;
  const TrainConfig& cfg = ckpt.config;

  Vec config_block = {
      cfg.learning_rate,
      word(cfg.batch_size),
      word(cfg.epochs),
      cfg.lambda_weight,
      cfg.gamma_weight,
      word(cfg.hard_negatives),
      word(cfg.seed),
      cfg.weight_decay,
      cfg.beta1,
      cfg.beta2,
      cfg.epsilon,
      word(cfg.model.embed_dim),
      word(cfg.model.proj_dim),
      word(cfg.model.vocab_size),
      word(cfg.model.frame_window),
      word(cfg.model.frame_stride),
      word(cfg.model.max_audio_len),
      word(cfg.model.max_text_len),
      word(cfg.seeds.size()),
  };
  for (std::uint64_t s : cfg.seeds) config_block.push_back(word(s));

  Vec progress = {detail::word(ckpt.epochs_completed),
                  detail::word(ckpt.global_step),
                  detail::word(static_cast<std::uint64_t>(ckpt.task))};

  std::vector<detail::NamedArray> arrays;
  arrays.push_back({"config", {config_block.size()}, config_block});
  arrays.push_back({"progress", {progress.size()}, progress});

  Model& model = const_cast<Model&>(ckpt.model);
  visit_tensors(model, [&](const TensorRef& ref) {
    arrays.push_back(
        {ref.name, ref.dims, Vec(ref.data, ref.data + ref.size)});
  });

  arrays.push_back(
      {"adamw.step", {}, Vec{detail::word(ckpt.optimizer.step)}});
  for (const auto& [name, slot] : ckpt.optimizer.slots) {
    arrays.push_back({"adamw.m." + name, {slot.m.size()}, slot.m});
    arrays.push_back({"adamw.v." + name, {slot.v.size()}, slot.v});
  }

  std::string out;
  out.append(kCheckpointMagic);
  detail::put_u32(out, kCheckpointVersion);
  detail::put_u32(out, static_cast<std::uint32_t>(arrays.size()));
  for (const auto& a : arrays)
    detail::append_array(out, a.name, a.dims, a.values.data(), a.values.size());
  return out;
}

inline Checkpoint parse_checkpoint(std::string_view bytes) {
  using detail::unword;
  detail::ByteReader in{bytes};

  in.require(4);
  if (bytes.substr(0, 4) != kCheckpointMagic)
    throw DataFormatError("incompatible checkpoint: bad magic");
  in.pos = 4;
  if (in.u32() != kCheckpointVersion)
    throw DataFormatError("incompatible checkpoint: unsupported version");

  std::uint32_t count = in.u32();
  std::vector<detail::NamedArray> arrays(count);
  for (auto& a : arrays) {
    std::uint16_t name_len = in.u16();
    in.require(name_len);
    a.name = std::string(bytes.substr(in.pos, name_len));
    in.pos += name_len;
    std::uint8_t rank = in.u8();
    std::size_t total = 1;
    a.dims.resize(rank);
    for (auto& d : a.dims) {
      d = in.u64();
      if (d > (std::size_t{1} << 28) || total > (std::size_t{1} << 28))
        throw DataFormatError("incompatible checkpoint: dimension too large");
      total *= d;
    }
    in.require(total * 8);  // bounds the allocation by the actual file size
    a.values.resize(total);
    for (double& v : a.values) v = in.f64();
  }
  if (in.pos != bytes.size())
    throw DataFormatError("incompatible checkpoint: trailing bytes");

  auto find = [&](std::string_view name) -> detail::NamedArray* {
    for (auto& a : arrays)
      if (a.name == name) return &a;
    return nullptr;
  };
  auto require = [&](std::string_view name) -> detail::NamedArray& {
    detail::NamedArray* a = find(name);
    if (!a)
      throw DataFormatError("incompatible checkpoint: missing array '" +
                            std::string(name) + "'");
    return *a;
  };

  Checkpoint ckpt;
  {
    const Vec& c = require("config").values;
    if (c.size() < 19)
      throw DataFormatError("incompatible checkpoint: config block too short");
    TrainConfig& cfg = ckpt.config;
    cfg.learning_rate = c[0];
    cfg.batch_size = unword(c[1]);
    cfg.epochs = unword(c[2]);
    cfg.lambda_weight = c[3];
    cfg.gamma_weight = c[4];
    cfg.hard_negatives = unword(c[5]);
    cfg.seed = unword(c[6]);
    cfg.weight_decay = c[7];
    cfg.beta1 = c[8];
    cfg.beta2 = c[9];
    cfg.epsilon = c[10];
    cfg.model.embed_dim = unword(c[11]);
    cfg.model.proj_dim = unword(c[12]);
    cfg.model.vocab_size = unword(c[13]);
    cfg.model.frame_window = unword(c[14]);
    cfg.model.frame_stride = unword(c[15]);
    cfg.model.max_audio_len = unword(c[16]);
    cfg.model.max_text_len = unword(c[17]);
    std::size_t seed_count = unword(c[18]);
    if (c.size() != 19 + seed_count)
      throw DataFormatError("incompatible checkpoint: config block size");
    cfg.seeds.clear();
    for (std::size_t i = 0; i < seed_count; ++i)
      cfg.seeds.push_back(unword(c[19 + i]));
  }
  {
    const Vec& p = require("progress").values;
    if (p.size() != 3)
      throw DataFormatError("incompatible checkpoint: progress block size");
    ckpt.epochs_completed = unword(p[0]);
    ckpt.global_step = unword(p[1]);
    std::uint64_t task_code = unword(p[2]);
    if (task_code > 2)
      throw DataFormatError("incompatible checkpoint: unknown task");
    ckpt.task = static_cast<Task>(task_code);
  }

  // Model tensor shapes follow from the config snapshot.
  ckpt.model.encoder.config = ckpt.config.model;
  const detail::NamedArray* cls = find("classifier.weight");
  if (cls) {
    if (cls->dims.size() != 2)
      throw DataFormatError("incompatible checkpoint: classifier rank");
    ckpt.model.classifier.weight = Matrix(cls->dims[0], cls->dims[1]);
    ckpt.model.classifier.bias = Vec(cls->dims[0], 0.0);
  }
  {
    const EncoderConfig& m = ckpt.config.model;
    EncoderParams& enc = ckpt.model.encoder;
    enc.audio_weight = Matrix(m.embed_dim, m.frame_window);
    enc.audio_bias = Vec(m.embed_dim, 0.0);
    enc.token_embedding = Matrix(m.vocab_size, m.embed_dim);
    enc.audio_projection.weight = Matrix(m.proj_dim, m.embed_dim);
    enc.audio_projection.bias = Vec(m.proj_dim, 0.0);
    enc.text_projection.weight = Matrix(m.proj_dim, m.embed_dim);
    enc.text_projection.bias = Vec(m.proj_dim, 0.0);
  }
  visit_tensors(ckpt.model, [&](const TensorRef& ref) {
    detail::NamedArray& a = require(ref.name);
    if (a.dims != ref.dims || a.values.size() != ref.size)
      throw DataFormatError("incompatible checkpoint: shape mismatch for '" +
                            ref.name + "'");
    std::copy(a.values.begin(), a.values.end(), ref.data);
  });

  ckpt.optimizer.step = unword(require("adamw.step").values.at(0));
  for (const auto& a : arrays) {
    if (a.name.rfind("adamw.m.", 0) == 0) {
      std::string key = a.name.substr(8);
      detail::NamedArray& v = require("adamw.v." + key);
      if (v.values.size() != a.values.size())
        throw DataFormatError("incompatible checkpoint: moment size mismatch");
      ckpt.optimizer.slots[key] = MomentPair{a.values, v.values};
    }
  }
  return ckpt;
}

inline void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  std::string bytes = serialize_checkpoint(ckpt);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataFormatError("cannot open file for writing: " + path);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataFormatError("write failed: " + path);
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataFormatError("cannot open file for reading: " + path);
  std::string bytes((std::istreambuf_iterator<char>(in)),
                    std::istreambuf_iterator<char>());
  return parse_checkpoint(bytes);
}

}  // namespace dsclap
