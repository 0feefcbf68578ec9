#pragma once

#include <filesystem>
#include <iosfwd>
#include <stdexcept>

#include "causalmem/memnet.hpp"

namespace causalmem {

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Binary layout: "MEMNET01", then little-endian u32 V, d, H, L, tying flag,
// then every matrix of ModelParams::tensors() as row-major little-endian
// float64.
void write_checkpoint(std::ostream& out, const ModelParams<double>& params);
ModelParams<double> read_checkpoint(std::istream& in);

void save_checkpoint(const std::filesystem::path& path, const ModelParams<double>& params);
ModelParams<double> load_checkpoint(const std::filesystem::path& path);

/// The vocabulary sidecar stored next to a checkpoint.
std::filesystem::path vocab_sidecar_path(const std::filesystem::path& checkpoint);

}  // namespace causalmem
