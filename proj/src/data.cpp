#include "sqvae/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <limits>
#include <numeric>

#include "sqvae/error.hpp"
#include "sqvae/rng.hpp"

namespace sqvae {

Split parse_split(const std::string& name) {
  if (name == "train") return Split::Train;
  if (name == "val") return Split::Val;
  if (name == "test") return Split::Test;
  throw ConfigError("unknown split '" + name + "' (expected train, val or test)");
}

std::string split_name(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Val: return "val";
    case Split::Test: return "test";
  }
  return "?";
}

const std::vector<std::size_t>& Dataset::indices(Split s) const {
  switch (s) {
    case Split::Train: return train;
    case Split::Val: return val;
    case Split::Test: return test;
  }
  return train;
}

void Dataset::validate() const {
  if (kind == DataKind::Continuous) {
    require(pixels.size() == n * D, "dataset: pixel buffer size mismatch");
    for (double v : pixels) require(v >= 0.0 && v <= 1.0, "dataset: continuous value outside [0, 1]");
  } else {
    require(labels_map.size() == n * D, "dataset: label buffer size mismatch");
    for (std::size_t c : labels_map) require(c < classes, "dataset: class outside [0, C_all)");
  }
  std::vector<char> seen(n, 0);
  for (const auto* part : {&train, &val, &test}) {
    for (std::size_t i : *part) {
      require(i < n, "dataset: split index out of range");
      require(!seen[i], "dataset: splits overlap at index " + std::to_string(i));
      seen[i] = 1;
    }
  }
  require(std::all_of(seen.begin(), seen.end(), [](char c) { return c != 0; }), "dataset: splits do not cover all indices");
}

// --- IDX ---------------------------------------------------------------------

namespace {

std::uint32_t read_be32(const std::vector<std::uint8_t>& buf, std::size_t off, const std::string& path) {
  if (off + 4 > buf.size()) {
    throw FormatError(path + ": truncated header at offset " + std::to_string(off));
  }
  return (std::uint32_t{buf[off]} << 24) | (std::uint32_t{buf[off + 1]} << 16) | (std::uint32_t{buf[off + 2]} << 8) |
         std::uint32_t{buf[off + 3]};
}

void put_be32(std::vector<std::uint8_t>& buf, std::uint32_t v) {
  for (int s = 24; s >= 0; s -= 8) buf.push_back(static_cast<std::uint8_t>(v >> s));
}

}  // namespace

IdxArray read_idx(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  const std::vector<std::uint8_t> buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const std::string name = path.string();
  const std::uint32_t magic = read_be32(buf, 0, name);
  const std::uint32_t ndims = magic & 0xFFu;
  if ((magic & 0xFFFFFF00u) != 0x00000800u || ndims == 0) {
    char hex[16];
    std::snprintf(hex, sizeof hex, "0x%08X", magic);
    throw FormatError(name + ": bad IDX magic " + hex + " at offset 0 (expected unsigned-byte 0x0000080N)");
  }
  IdxArray arr;
  std::size_t count = 1;
  for (std::uint32_t d = 0; d < ndims; ++d) {
    arr.dims.push_back(read_be32(buf, 4 + 4 * d, name));
    count *= arr.dims.back();
  }
  const std::size_t off = 4 + 4 * static_cast<std::size_t>(ndims);
  if (buf.size() < off + count) {
    throw FormatError(name + ": truncated payload at offset " + std::to_string(buf.size()) + " (expected " +
                      std::to_string(count) + " bytes from offset " + std::to_string(off) + ")");
  }
  arr.bytes.assign(buf.begin() + static_cast<std::ptrdiff_t>(off),
                   buf.begin() + static_cast<std::ptrdiff_t>(off + count));
  return arr;
}

void write_idx(const std::filesystem::path& path, const IdxArray& arr) {
  require(!arr.dims.empty() && arr.dims.size() < 256, "write_idx: need 1..255 dims");
  std::size_t count = 1;
  for (auto d : arr.dims) count *= d;
  require(count == arr.bytes.size(), "write_idx: dims do not match payload");
  std::vector<std::uint8_t> buf;
  put_be32(buf, 0x00000800u | static_cast<std::uint32_t>(arr.dims.size()));
  for (auto d : arr.dims) put_be32(buf, d);
  buf.insert(buf.end(), arr.bytes.begin(), arr.bytes.end());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
}

Dataset load_mnist_idx(const std::filesystem::path& images, const std::filesystem::path& labels,
                       std::size_t val_count, std::size_t test_count) {
  const IdxArray img = read_idx(images);
  if (img.dims.size() != 3) throw FormatError(images.string() + ": expected a 3-dimensional image file");
  Dataset ds;
  ds.kind = DataKind::Continuous;
  ds.n = img.dims[0];
  ds.D = static_cast<std::size_t>(img.dims[1]) * img.dims[2];
  ds.pixels.resize(img.bytes.size());
  for (std::size_t i = 0; i < img.bytes.size(); ++i) ds.pixels[i] = img.bytes[i] / 255.0;
  if (!labels.empty()) {
    const IdxArray lab = read_idx(labels);
    if (lab.dims.size() != 1 || lab.dims[0] != ds.n) {
      throw FormatError(labels.string() + ": label count does not match image count");
    }
    ds.labels = lab.bytes;
  }
  require(val_count + test_count <= ds.n, "load_mnist_idx: split sizes exceed sample count");
  assign_splits(ds, ds.n - val_count - test_count, val_count);
  return ds;
}

// --- synthetic -----------------------------------------------------------------

Dataset synth_continuous(std::size_t n, std::size_t side, std::uint64_t seed) {
  require(n >= 1 && side >= 4, "synth_continuous needs n >= 1 and side >= 4");
  Dataset ds;
  ds.kind = DataKind::Continuous;
  ds.n = n;
  ds.D = side * side;
  ds.pixels.assign(n * ds.D, 0.0);
  const double s = static_cast<double>(side);
  for (std::size_t i = 0; i < n; ++i) {
    Rng rng(seed, Stream::Data, i);
    const std::size_t blobs = 1 + rng.below(3);
    double* img = ds.pixels.data() + i * ds.D;
    for (std::size_t b = 0; b < blobs; ++b) {
      const double cx = rng.uniform(0.15 * s, 0.85 * s);
      const double cy = rng.uniform(0.15 * s, 0.85 * s);
      const double sx = rng.uniform(0.06 * s, 0.2 * s);
      const double sy = rng.uniform(0.06 * s, 0.2 * s);
      const double amp = rng.uniform(0.5, 1.0);
      for (std::size_t y = 0; y < side; ++y) {
        for (std::size_t x = 0; x < side; ++x) {
          const double dx = (static_cast<double>(x) + 0.5 - cx) / sx;
          const double dy = (static_cast<double>(y) + 0.5 - cy) / sy;
          img[y * side + x] += amp * std::exp(-0.5 * (dx * dx + dy * dy));
        }
      }
    }
    for (std::size_t j = 0; j < ds.D; ++j) img[j] = std::clamp(img[j], 0.0, 1.0);
  }
  assign_splits(ds, n, 0);
  return ds;
}

Dataset synth_categorical(std::size_t n, std::size_t side, std::size_t L, std::uint64_t seed) {
  require(L >= 2 && L <= 256, "synth_categorical needs 2 <= L <= 256, got L = " + std::to_string(L));
  require(n >= 1 && side >= 4, "synth_categorical needs n >= 1 and side >= 4");
  Dataset ds;
  ds.kind = DataKind::Categorical;
  ds.n = n;
  ds.D = side * side;
  ds.classes = L;
  ds.labels_map.assign(n * ds.D, 0);
  const double s = static_cast<double>(side);
  std::vector<double> sx(L), sy(L);
  for (std::size_t i = 0; i < n; ++i) {
    Rng rng(seed, Stream::Data, i);
    for (std::size_t c = 0; c < L; ++c) {
      sx[c] = rng.uniform(0.0, s);
      sy[c] = rng.uniform(0.0, s);
    }
    std::size_t* map = ds.labels_map.data() + i * ds.D;
    for (std::size_t y = 0; y < side; ++y) {
      for (std::size_t x = 0; x < side; ++x) {
        double best = std::numeric_limits<double>::infinity();
        std::size_t arg = 0;
        for (std::size_t c = 0; c < L; ++c) {
          const double dx = static_cast<double>(x) + 0.5 - sx[c];
          const double dy = static_cast<double>(y) + 0.5 - sy[c];
          const double d = dx * dx + dy * dy;
          if (d < best) {
            best = d;
            arg = c;
          }
        }
        map[y * side + x] = arg;
      }
    }
  }
  assign_splits(ds, n, 0);
  return ds;
}

void assign_splits(Dataset& ds, std::size_t n_train, std::size_t n_val) {
  require(n_train + n_val <= ds.n, "assign_splits: split sizes exceed sample count");
  ds.train.resize(n_train);
  std::iota(ds.train.begin(), ds.train.end(), std::size_t{0});
  ds.val.resize(n_val);
  std::iota(ds.val.begin(), ds.val.end(), n_train);
  ds.test.resize(ds.n - n_train - n_val);
  std::iota(ds.test.begin(), ds.test.end(), n_train + n_val);
}

std::vector<std::vector<std::size_t>> batches(const Dataset& ds, Split split, std::size_t batch_size,
                                              std::uint64_t seed, std::uint64_t epoch) {
  require(batch_size >= 1, "batches: batch_size must be >= 1");
  std::vector<std::size_t> order = ds.indices(split);
  require(!order.empty(), "batches: split '" + split_name(split) + "' is empty");
  Rng rng(seed, Stream::Shuffle, epoch);
  for (std::size_t i = order.size() - 1; i > 0; --i) {
    const std::size_t j = static_cast<std::size_t>(rng.below(i + 1));
    std::swap(order[i], order[j]);
  }
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t start = 0; start < order.size(); start += batch_size) {
    const std::size_t end = std::min(order.size(), start + batch_size);
    out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start), order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return out;
}

std::vector<double> gather_pixels(const Dataset& ds, const std::vector<std::size_t>& idx) {
  require(ds.kind == DataKind::Continuous, "gather_pixels on a categorical dataset");
  std::vector<double> out;
  out.reserve(idx.size() * ds.D);
  for (std::size_t i : idx) {
    require(i < ds.n, "gather_pixels: index out of range");
    out.insert(out.end(), ds.pixels.begin() + static_cast<std::ptrdiff_t>(i * ds.D),
               ds.pixels.begin() + static_cast<std::ptrdiff_t>((i + 1) * ds.D));
  }
  return out;
}

std::vector<std::size_t> gather_labels(const Dataset& ds, const std::vector<std::size_t>& idx) {
  require(ds.kind == DataKind::Categorical, "gather_labels on a continuous dataset");
  std::vector<std::size_t> out;
  out.reserve(idx.size() * ds.D);
  for (std::size_t i : idx) {
    require(i < ds.n, "gather_labels: index out of range");
    out.insert(out.end(), ds.labels_map.begin() + static_cast<std::ptrdiff_t>(i * ds.D),
               ds.labels_map.begin() + static_cast<std::ptrdiff_t>((i + 1) * ds.D));
  }
  return out;
}

}  // namespace sqvae
