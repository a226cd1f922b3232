#pragma once

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <vector>

#include "sgla/model.hpp"

namespace sgla {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

inline constexpr std::uint32_t kCheckpointVersion = 1;

enum class DType : std::uint8_t { f32 = 1, f64 = 2 };

std::string to_string(DType dtype);
std::size_t dtype_size(DType dtype);

template <typename Scalar>
constexpr DType dtype_of() {
  static_assert(std::is_same_v<Scalar, float> || std::is_same_v<Scalar, double>);
  return std::is_same_v<Scalar, float> ? DType::f32 : DType::f64;
}

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TensorRecord {
  std::string name;
  DType dtype = DType::f64;
  Shape shape;
  std::vector<unsigned char> bytes;  // little-endian scalars
};

struct Checkpoint {
  std::uint32_t version = kCheckpointVersion;
  TrackerConfig config;
  std::vector<TensorRecord> tensors;

  const TensorRecord* find(const std::string& name) const;
};

void write_checkpoint(const Checkpoint& ckpt, std::ostream& out);
Checkpoint read_checkpoint(std::istream& in);
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

std::string config_to_json(const TrackerConfig& config);
TrackerConfig config_from_json(const std::string& text);

template <typename Scalar>
Checkpoint make_checkpoint(TrackerModel<Scalar>& model) {
  Checkpoint ckpt;
  ckpt.config = model.config();
  model.visit([&](const std::string& name, Tensor<Scalar>& t) {
    TensorRecord rec;
    rec.name = name;
    rec.dtype = dtype_of<Scalar>();
    rec.shape = t.shape();
    rec.bytes.resize(static_cast<std::size_t>(t.numel()) * sizeof(Scalar));
    std::memcpy(rec.bytes.data(), t.data().data(), rec.bytes.size());
    ckpt.tensors.push_back(std::move(rec));
  });
  return ckpt;
}

/// Copies every record into the matching parameter, converting dtype when
/// needed. Any missing, unexpected or reshaped tensor is reported by name.
template <typename Scalar>
void apply_checkpoint(const Checkpoint& ckpt, TrackerModel<Scalar>& model) {
  std::vector<std::string> problems;
  std::vector<std::string> seen;
  model.visit([&](const std::string& name, Tensor<Scalar>& t) {
    seen.push_back(name);
    const TensorRecord* rec = ckpt.find(name);
    if (!rec) {
      problems.push_back("missing tensor " + name + " " + to_string(t.shape()));
      return;
    }
    if (rec->shape != t.shape()) {
      problems.push_back("shape mismatch for " + name + ": checkpoint " + to_string(rec->shape) + ", model " +
                         to_string(t.shape()));
      return;
    }
    const std::size_t n = static_cast<std::size_t>(t.numel());
    if (rec->bytes.size() != n * dtype_size(rec->dtype)) {
      problems.push_back("truncated data for " + name);
      return;
    }
    if (rec->dtype == dtype_of<Scalar>()) {
      std::memcpy(t.data().data(), rec->bytes.data(), rec->bytes.size());
    } else if (rec->dtype == DType::f32) {
      for (std::size_t i = 0; i < n; ++i) {
        float v;
        std::memcpy(&v, rec->bytes.data() + i * sizeof v, sizeof v);
        t.data()[static_cast<Index>(i)] = static_cast<Scalar>(v);
      }
    } else {
      for (std::size_t i = 0; i < n; ++i) {
        double v;
        std::memcpy(&v, rec->bytes.data() + i * sizeof v, sizeof v);
        t.data()[static_cast<Index>(i)] = static_cast<Scalar>(v);
      }
    }
  });
  for (const auto& rec : ckpt.tensors) {
    if (std::find(seen.begin(), seen.end(), rec.name) == seen.end()) {
      problems.push_back("unexpected tensor " + rec.name + " " + to_string(rec.shape));
    }
  }
  if (!problems.empty()) {
    std::string msg = "checkpoint does not match model:";
    for (const auto& p : problems) msg += "\n  " + p;
    throw CheckpointError(msg);
  }
}

/// Model built from the checkpoint's own config snapshot.
template <typename Scalar>
TrackerModel<Scalar> model_from_checkpoint(const Checkpoint& ckpt) {
  TrackerModel<Scalar> model(ckpt.config, 0);
  apply_checkpoint(ckpt, model);
  return model;
}

}  // namespace sgla
