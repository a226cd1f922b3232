#include "sgla/checkpoint.hpp"

#include <zlib.h>

#include <fstream>
#include <iterator>
#include <json.hpp>
#include <sstream>

namespace sgla {

namespace {

constexpr char kMagic[8] = {'S', 'G', 'L', 'A', 'C', 'K', 'P', 'T'};

// Bounds that reject garbage lengths before allocating.
constexpr std::uint64_t kMaxName = 4096;
constexpr std::uint64_t kMaxRank = 8;
constexpr std::uint64_t kMaxElements = std::uint64_t{1} << 32;

class Writer {
 public:
  void raw(const void* p, std::size_t n) {
    const auto* b = static_cast<const unsigned char*>(p);
    buf_.insert(buf_.end(), b, b + n);
  }
  template <typename T>
  void pod(T v) {
    raw(&v, sizeof v);
  }
  void str(const std::string& s) {
    pod<std::uint32_t>(static_cast<std::uint32_t>(s.size()));
    raw(s.data(), s.size());
  }
  std::vector<unsigned char>& buffer() { return buf_; }

 private:
  std::vector<unsigned char> buf_;
};

class Reader {
 public:
  Reader(const unsigned char* p, std::size_t n) : p_(p), n_(n) {}

  void raw(void* dst, std::size_t n) {
    if (n > n_ - pos_) throw CheckpointError("checkpoint is truncated");
    std::memcpy(dst, p_ + pos_, n);
    pos_ += n;
  }
  template <typename T>
  T pod() {
    T v;
    raw(&v, sizeof v);
    return v;
  }
  std::string str(std::uint64_t limit) {
    const auto len = pod<std::uint32_t>();
    if (len > limit) throw CheckpointError("checkpoint string length " + std::to_string(len) + " is implausible");
    std::string s(len, '\0');
    raw(s.data(), len);
    return s;
  }
  bool done() const { return pos_ == n_; }

 private:
  const unsigned char* p_;
  std::size_t n_;
  std::size_t pos_ = 0;
};

std::uint32_t crc_of(const unsigned char* p, std::size_t n) {
  uLong crc = crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; feed large buffers in chunks.
  while (n > 0) {
    const uInt chunk = static_cast<uInt>(std::min<std::size_t>(n, 1u << 30));
    crc = crc32(crc, p, chunk);
    p += chunk;
    n -= chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

}  // namespace

std::string to_string(DType dtype) { return dtype == DType::f32 ? "f32" : "f64"; }

std::size_t dtype_size(DType dtype) { return dtype == DType::f32 ? 4 : 8; }

const TensorRecord* Checkpoint::find(const std::string& name) const {
  for (const auto& t : tensors) {
    if (t.name == name) return &t;
  }
  return nullptr;
}

std::string config_to_json(const TrackerConfig& c) {
  const nlohmann::json j = {
      {"num_layers", c.backbone.num_layers},       {"embed_dim", c.backbone.embed_dim},
      {"num_heads", c.backbone.num_heads},         {"patch_size", c.backbone.patch_size},
      {"template_size", c.backbone.template_size}, {"search_size", c.backbone.search_size},
      {"mlp_ratio", c.backbone.mlp_ratio},         {"l_star", c.l_star},
      {"selector_hidden", c.selector_hidden},      {"head_channels", c.head_channels},
      {"with_selector", c.with_selector},
  };
  return j.dump();
}

TrackerConfig config_from_json(const std::string& text) {
  TrackerConfig c;
  try {
    const nlohmann::json j = nlohmann::json::parse(text);
    c.backbone.num_layers = j.at("num_layers");
    c.backbone.embed_dim = j.at("embed_dim");
    c.backbone.num_heads = j.at("num_heads");
    c.backbone.patch_size = j.at("patch_size");
    c.backbone.template_size = j.at("template_size");
    c.backbone.search_size = j.at("search_size");
    c.backbone.mlp_ratio = j.at("mlp_ratio");
    c.l_star = j.at("l_star");
    c.selector_hidden = j.at("selector_hidden");
    c.head_channels = j.at("head_channels");
    c.with_selector = j.at("with_selector");
    c.validate();
  } catch (const std::exception& e) {
    throw CheckpointError(std::string("bad config snapshot in checkpoint: ") + e.what());
  }
  return c;
}

// Layout: magic, u32 version, config JSON, u32 count, records, u32 CRC32 of
// everything before it. Record: name, u8 dtype, u32 rank, u64 dims, u64 byte
// count, raw bytes.
void write_checkpoint(const Checkpoint& ckpt, std::ostream& out) {
  Writer w;
  w.raw(kMagic, sizeof kMagic);
  w.pod<std::uint32_t>(ckpt.version);
  w.str(config_to_json(ckpt.config));
  w.pod<std::uint32_t>(static_cast<std::uint32_t>(ckpt.tensors.size()));
  for (const auto& t : ckpt.tensors) {
    w.str(t.name);
    w.pod<std::uint8_t>(static_cast<std::uint8_t>(t.dtype));
    w.pod<std::uint32_t>(static_cast<std::uint32_t>(t.shape.size()));
    for (Index d : t.shape) w.pod<std::uint64_t>(static_cast<std::uint64_t>(d));
    w.pod<std::uint64_t>(t.bytes.size());
    w.raw(t.bytes.data(), t.bytes.size());
  }
  const std::uint32_t crc = crc_of(w.buffer().data(), w.buffer().size());
  w.pod<std::uint32_t>(crc);
  out.write(reinterpret_cast<const char*>(w.buffer().data()), static_cast<std::streamsize>(w.buffer().size()));
  if (!out) throw CheckpointError("failed to write checkpoint");
}

Checkpoint read_checkpoint(std::istream& in) {
  const std::vector<unsigned char> buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (buf.size() < sizeof kMagic + 8 || std::memcmp(buf.data(), kMagic, sizeof kMagic) != 0) {
    throw CheckpointError("not a checkpoint file (bad magic)");
  }
  const std::size_t body = buf.size() - 4;
  std::uint32_t stored;
  std::memcpy(&stored, buf.data() + body, 4);
  if (crc_of(buf.data(), body) != stored) throw CheckpointError("checkpoint checksum mismatch (file is corrupted)");

  Reader r(buf.data() + sizeof kMagic, body - sizeof kMagic);
  Checkpoint ckpt;
  ckpt.version = r.pod<std::uint32_t>();
  if (ckpt.version != kCheckpointVersion) {
    throw CheckpointError("unsupported checkpoint format version " + std::to_string(ckpt.version) + " (expected " +
                          std::to_string(kCheckpointVersion) + ")");
  }
  ckpt.config = config_from_json(r.str(1 << 16));
  const auto count = r.pod<std::uint32_t>();
  for (std::uint32_t i = 0; i < count; ++i) {
    TensorRecord t;
    t.name = r.str(kMaxName);
    const auto tag = r.pod<std::uint8_t>();
    if (tag != static_cast<std::uint8_t>(DType::f32) && tag != static_cast<std::uint8_t>(DType::f64)) {
      throw CheckpointError("unknown dtype tag " + std::to_string(tag) + " for tensor " + t.name);
    }
    t.dtype = static_cast<DType>(tag);
    const auto rank = r.pod<std::uint32_t>();
    if (rank == 0 || rank > kMaxRank) throw CheckpointError("implausible rank for tensor " + t.name);
    std::uint64_t elements = 1;
    for (std::uint32_t d = 0; d < rank; ++d) {
      const auto dim = r.pod<std::uint64_t>();
      if (dim == 0 || dim > kMaxElements) throw CheckpointError("implausible shape for tensor " + t.name);
      elements *= dim;
      if (elements > kMaxElements) throw CheckpointError("implausible shape for tensor " + t.name);
      t.shape.push_back(static_cast<Index>(dim));
    }
    const auto nbytes = r.pod<std::uint64_t>();
    if (nbytes != elements * dtype_size(t.dtype)) throw CheckpointError("byte count mismatch for tensor " + t.name);
    t.bytes.resize(nbytes);
    r.raw(t.bytes.data(), nbytes);
    ckpt.tensors.push_back(std::move(t));
  }
  if (!r.done()) throw CheckpointError("trailing bytes after checkpoint records");
  return ckpt;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CheckpointError("cannot open " + path.string() + " for writing");
  write_checkpoint(ckpt, out);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint " + path.string());
  return read_checkpoint(in);
}

}  // namespace sgla
