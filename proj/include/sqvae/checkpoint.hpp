#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "sqvae/training.hpp"

namespace sqvae {

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// One named float64 array of a checkpoint.
struct CheckpointArray {
  std::string name;
  std::vector<std::uint64_t> shape;
  std::vector<double> data;
};

/// Decoded SQVC file.
///
/// Layout, all integers and doubles little-endian:
///   "SQVC" u32 version
///   u64 config_len, config JSON bytes
///   u64 seed, u64 step, u64 epoch
///   u64 n_arrays, then per array:
///     u32 name_len, name bytes, u32 rank, rank x u64 dims, numel x f64
struct CheckpointFile {
  std::string config_json;
  std::uint64_t seed = 0;
  std::uint64_t step = 0;
  std::uint64_t epoch = 0;
  std::vector<CheckpointArray> arrays;

  const CheckpointArray* find(const std::string& name) const;
};

std::vector<std::uint8_t> encode_checkpoint(const CheckpointFile& f);
/// Throws FormatError ("bad checkpoint magic", version mismatch, truncation).
CheckpointFile decode_checkpoint(const std::vector<std::uint8_t>& bytes);

/// Everything needed to continue training bit for bit: parameters, Adam
/// moments, the plateau schedule, codebook usage statistics and counters.
CheckpointFile snapshot(const TrainState& st);
/// Rebuild a state from a snapshot. The dataset is regenerated (or reloaded)
/// from the embedded config unless one is supplied.
TrainState restore(const CheckpointFile& f, std::shared_ptr<const Dataset> ds = nullptr);

void save_checkpoint(const std::filesystem::path& path, const TrainState& st);
TrainState load_checkpoint(const std::filesystem::path& path, std::shared_ptr<const Dataset> ds = nullptr);

}  // namespace sqvae
