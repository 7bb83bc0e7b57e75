#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace sqvae {

enum class DataKind { Continuous, Categorical };

enum class Split { Train, Val, Test };

Split parse_split(const std::string& name);
std::string split_name(Split s);

/// Immutable sample matrix plus disjoint train/val/test index lists.
struct Dataset {
  DataKind kind = DataKind::Continuous;
  std::size_t n = 0;
  std::size_t D = 0;
  std::size_t classes = 0;               // C_all, categorical only
  std::vector<double> pixels;            // continuous: n * D in [0, 1]
  std::vector<std::size_t> labels_map;   // categorical: n * D in [0, classes)
  std::vector<std::uint8_t> labels;      // optional per-sample labels (IDX)
  std::vector<std::size_t> train, val, test;

  const std::vector<std::size_t>& indices(Split s) const;
  /// Contract check of the invariants; throws ContractError.
  void validate() const;
};

struct IdxArray {
  std::vector<std::uint32_t> dims;
  std::vector<std::uint8_t> bytes;
};

/// Unsigned-byte IDX files (magic 0x0000080N, N = number of dims).
IdxArray read_idx(const std::filesystem::path& path);
void write_idx(const std::filesystem::path& path, const IdxArray& arr);

/// MNIST-style images (n, rows, cols) scaled by 1/255; the labels file is
/// optional (pass an empty path). The last `val_count` training indices form
/// the validation split; `test_count` samples from the end become the test
/// split (0 = none).
Dataset load_mnist_idx(const std::filesystem::path& images, const std::filesystem::path& labels,
                       std::size_t val_count = 10000, std::size_t test_count = 0);

/// n images of side x side with 1-3 axis-aligned Gaussian blobs.
Dataset synth_continuous(std::size_t n, std::size_t side, std::uint64_t seed);

/// n Voronoi label maps with L sites each.
Dataset synth_categorical(std::size_t n, std::size_t side, std::size_t L, std::uint64_t seed);

/// Assign consecutive index ranges [0, n_train), [n_train, n_train + n_val), rest.
void assign_splits(Dataset& ds, std::size_t n_train, std::size_t n_val);

/// Batches of split indices in a Fisher-Yates order keyed by (seed, epoch).
/// The final short batch is kept.
std::vector<std::vector<std::size_t>> batches(const Dataset& ds, Split split, std::size_t batch_size,
                                              std::uint64_t seed, std::uint64_t epoch);

/// Rows of the continuous sample matrix for the given indices, (|idx|, D) row-major.
std::vector<double> gather_pixels(const Dataset& ds, const std::vector<std::size_t>& idx);
/// Labels of the given samples, flattened to |idx| * D.
std::vector<std::size_t> gather_labels(const Dataset& ds, const std::vector<std::size_t>& idx);

}  // namespace sqvae
