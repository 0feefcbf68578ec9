#include "causalmem/checkpoint.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>

namespace causalmem {

namespace {

constexpr std::array<char, 8> kMagic = {'M', 'E', 'M', 'N', 'E', 'T', '0', '1'};

template <typename UInt>
void write_le(std::ostream& out, UInt value) {
  std::array<char, sizeof(UInt)> bytes{};
  for (std::size_t i = 0; i < sizeof(UInt); ++i) {
    bytes[i] = static_cast<char>((value >> (8 * i)) & 0xFF);
  }
  out.write(bytes.data(), bytes.size());
}

template <typename UInt>
UInt read_le(std::istream& in) {
  std::array<unsigned char, sizeof(UInt)> bytes{};
  in.read(reinterpret_cast<char*>(bytes.data()), bytes.size());
  if (!in) throw CheckpointError("truncated checkpoint");
  UInt value = 0;
  for (std::size_t i = 0; i < sizeof(UInt); ++i) {
    value |= static_cast<UInt>(bytes[i]) << (8 * i);
  }
  return value;
}

std::uint32_t narrow(std::size_t v) {
  if (v > std::numeric_limits<std::uint32_t>::max()) {
    throw CheckpointError("dimension too large for checkpoint header");
  }
  return static_cast<std::uint32_t>(v);
}

}  // namespace

void write_checkpoint(std::ostream& out, const ModelParams<double>& params) {
  const auto& shape = params.shape();
  out.write(kMagic.data(), kMagic.size());
  write_le(out, narrow(shape.vocab_size));
  write_le(out, narrow(shape.dim));
  write_le(out, narrow(shape.hops));
  write_le(out, narrow(shape.labels));
  write_le(out, static_cast<std::uint32_t>(shape.tying));
  for (const auto* t : params.tensors()) {
    for (Eigen::Index r = 0; r < t->rows(); ++r) {
      for (Eigen::Index c = 0; c < t->cols(); ++c) {
        write_le(out, std::bit_cast<std::uint64_t>((*t)(r, c)));
      }
    }
  }
  if (!out) throw CheckpointError("failed writing checkpoint");
}

ModelParams<double> read_checkpoint(std::istream& in) {
  std::array<char, 8> magic{};
  in.read(magic.data(), magic.size());
  if (!in || magic != kMagic) throw CheckpointError("not a checkpoint: bad magic bytes");

  ModelShape shape;
  shape.vocab_size = read_le<std::uint32_t>(in);
  shape.dim = read_le<std::uint32_t>(in);
  shape.hops = read_le<std::uint32_t>(in);
  shape.labels = read_le<std::uint32_t>(in);
  const auto tying = read_le<std::uint32_t>(in);
  if (tying > 1) throw CheckpointError("unknown tying flag " + std::to_string(tying));
  shape.tying = static_cast<Tying>(tying);
  try {
    shape.validate();
  } catch (const std::invalid_argument& e) {
    throw CheckpointError(e.what());
  }

  ModelParams<double> params(shape);
  for (auto* t : params.tensors()) {
    for (Eigen::Index r = 0; r < t->rows(); ++r) {
      for (Eigen::Index c = 0; c < t->cols(); ++c) {
        (*t)(r, c) = std::bit_cast<double>(read_le<std::uint64_t>(in));
      }
    }
  }
  if (in.peek() != std::char_traits<char>::eof()) {
    throw CheckpointError("trailing bytes after checkpoint payload");
  }
  if (!params.all_finite()) throw CheckpointError("checkpoint contains non-finite weights");
  return params;
}

void save_checkpoint(const std::filesystem::path& path, const ModelParams<double>& params) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError("cannot write checkpoint " + path.string());
  write_checkpoint(out, params);
}

ModelParams<double> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint " + path.string());
  try {
    return read_checkpoint(in);
  } catch (const CheckpointError& e) {
    throw CheckpointError(path.string() + ": " + e.what());
  }
}

std::filesystem::path vocab_sidecar_path(const std::filesystem::path& checkpoint) {
  return checkpoint.parent_path() / "vocab.txt";
}

}  // namespace causalmem
