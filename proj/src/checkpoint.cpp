#include "sqvae/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "sqvae/error.hpp"

namespace sqvae {

namespace {

constexpr char kMagic[4] = {'S', 'Q', 'V', 'C'};

class Writer {
 public:
  void bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    out.insert(out.end(), b, b + n);
  }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void str32(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    bytes(s.data(), s.size());
  }

  std::vector<std::uint8_t> out;
};

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& b) : buf(b) {}

  void need(std::size_t n) const {
    if (buf.size() - pos < n) throw FormatError("truncated checkpoint at offset " + std::to_string(pos));
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(buf[pos++]) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(buf[pos++]) << (8 * i);
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string str(std::uint64_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(buf.data() + pos), n);
    pos += n;
    return s;
  }

  const std::vector<std::uint8_t>& buf;
  std::size_t pos = 0;
};

void put(CheckpointFile& f, const std::string& name, std::vector<std::uint64_t> shape, std::vector<double> data) {
  f.arrays.push_back({name, std::move(shape), std::move(data)});
}

void put_scalar(CheckpointFile& f, const std::string& name, double v) { put(f, name, {1}, {v}); }

const CheckpointArray& get(const CheckpointFile& f, const std::string& name) {
  const CheckpointArray* a = f.find(name);
  if (!a) throw FormatError("checkpoint has no array '" + name + "'");
  return *a;
}

void copy_into(const CheckpointArray& a, std::span<double> dst) {
  if (a.data.size() != dst.size()) {
    throw FormatError("checkpoint array '" + a.name + "' has " + std::to_string(a.data.size()) +
                      " values, expected " + std::to_string(dst.size()));
  }
  std::copy(a.data.begin(), a.data.end(), dst.begin());
}

double get_scalar(const CheckpointFile& f, const std::string& name) {
  const auto& a = get(f, name);
  if (a.data.size() != 1) throw FormatError("checkpoint array '" + name + "' is not a scalar");
  return a.data[0];
}

}  // namespace

const CheckpointArray* CheckpointFile::find(const std::string& name) const {
  for (const auto& a : arrays) {
    if (a.name == name) return &a;
  }
  return nullptr;
}

std::vector<std::uint8_t> encode_checkpoint(const CheckpointFile& f) {
  Writer w;
  w.bytes(kMagic, 4);
  w.u32(kCheckpointVersion);
  w.u64(f.config_json.size());
  w.bytes(f.config_json.data(), f.config_json.size());
  w.u64(f.seed);
  w.u64(f.step);
  w.u64(f.epoch);
  w.u64(f.arrays.size());
  for (const auto& a : f.arrays) {
    std::uint64_t numel = 1;
    for (auto d : a.shape) numel *= d;
    require(numel == a.data.size(), "encode_checkpoint: shape of '" + a.name + "' does not match its data");
    w.str32(a.name);
    w.u32(static_cast<std::uint32_t>(a.shape.size()));
    for (auto d : a.shape) w.u64(d);
    for (double v : a.data) w.f64(v);
  }
  return std::move(w.out);
}

CheckpointFile decode_checkpoint(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) throw FormatError("bad checkpoint magic");
  Reader r(bytes);
  r.pos = 4;
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    throw FormatError("checkpoint version " + std::to_string(version) + " not supported (expected " +
                      std::to_string(kCheckpointVersion) + ")");
  }
  CheckpointFile f;
  f.config_json = r.str(r.u64());
  f.seed = r.u64();
  f.step = r.u64();
  f.epoch = r.u64();
  const std::uint64_t n = r.u64();
  for (std::uint64_t i = 0; i < n; ++i) {
    CheckpointArray a;
    a.name = r.str(r.u32());
    const std::uint32_t rank = r.u32();
    std::uint64_t numel = 1;
    for (std::uint32_t k = 0; k < rank; ++k) {
      a.shape.push_back(r.u64());
      numel *= a.shape.back();
    }
    r.need(numel * 8);
    a.data.resize(numel);
    for (auto& v : a.data) v = r.f64();
    f.arrays.push_back(std::move(a));
  }
  if (r.pos != bytes.size()) throw FormatError("trailing bytes after checkpoint at offset " + std::to_string(r.pos));
  return f;
}

CheckpointFile snapshot(const TrainState& st) {
  CheckpointFile f;
  f.config_json = config_to_json(st.config).dump();
  f.seed = st.config.seed;
  f.step = st.step;
  f.epoch = st.epoch;
  for (const auto& [name, t] : st.model.state_tensors()) {
    put(f, "param." + name, {t.shape().begin(), t.shape().end()}, {t.data().begin(), t.data().end()});
  }
  put_scalar(f, "adam.t", static_cast<double>(st.adam.t));
  for (const auto& [name, m] : st.adam.m) put(f, "adam.m." + name, {m.size()}, m);
  for (const auto& [name, v] : st.adam.v) put(f, "adam.v." + name, {v.size()}, v);
  put_scalar(f, "schedule.lr", st.schedule.lr);
  put_scalar(f, "schedule.best", st.schedule.best);
  put_scalar(f, "schedule.has_best", st.schedule.has_best ? 1.0 : 0.0);
  put_scalar(f, "schedule.bad_epochs", static_cast<double>(st.schedule.bad_epochs));
  const UsageStats& u = st.usage;
  if (!u.ema_cluster_size.empty()) {
    const std::uint64_t K = u.ema_cluster_size.size();
    put(f, "usage.counts", {K}, {u.counts.begin(), u.counts.end()});
    put(f, "usage.ema_cluster_size", {K}, u.ema_cluster_size);
    put(f, "usage.ema_cluster_sum", {K, u.ema_cluster_sum.size() / K}, u.ema_cluster_sum);
    put_scalar(f, "usage.window_batches", static_cast<double>(u.window_batches));
  }
  return f;
}

TrainState restore(const CheckpointFile& f, std::shared_ptr<const Dataset> ds) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(f.config_json);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("checkpoint config is not valid JSON: ") + e.what());
  }
  const TrainConfig cfg = config_from_json(doc);
  if (!ds) ds = load_dataset(cfg.dataset);
  TrainState st = TrainState::create(cfg, std::move(ds));
  for (const auto& [name, t] : st.model.state_tensors()) {
    Tensor p = t;
    copy_into(get(f, "param." + name), p.mutable_data());
  }
  st.adam.t = static_cast<std::uint64_t>(get_scalar(f, "adam.t"));
  for (const auto& a : f.arrays) {
    if (a.name.rfind("adam.m.", 0) == 0) st.adam.m[a.name.substr(7)] = a.data;
    if (a.name.rfind("adam.v.", 0) == 0) st.adam.v[a.name.substr(7)] = a.data;
  }
  st.schedule.lr = get_scalar(f, "schedule.lr");
  st.schedule.best = get_scalar(f, "schedule.best");
  st.schedule.has_best = get_scalar(f, "schedule.has_best") != 0.0;
  st.schedule.bad_epochs = static_cast<std::size_t>(get_scalar(f, "schedule.bad_epochs"));
  if (!st.usage.ema_cluster_size.empty()) {
    const auto& counts = get(f, "usage.counts");
    if (counts.data.size() != st.usage.counts.size()) throw FormatError("checkpoint usage counts do not match K");
    for (std::size_t k = 0; k < counts.data.size(); ++k) st.usage.counts[k] = static_cast<std::uint64_t>(counts.data[k]);
    copy_into(get(f, "usage.ema_cluster_size"), st.usage.ema_cluster_size);
    copy_into(get(f, "usage.ema_cluster_sum"), st.usage.ema_cluster_sum);
    st.usage.window_batches = static_cast<std::size_t>(get_scalar(f, "usage.window_batches"));
  }
  st.step = f.step;
  st.epoch = f.epoch;
  return st;
}

void save_checkpoint(const std::filesystem::path& path, const TrainState& st) {
  const auto bytes = encode_checkpoint(snapshot(st));
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot write checkpoint " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw FormatError("failed writing checkpoint " + path.string());
}

TrainState load_checkpoint(const std::filesystem::path& path, std::shared_ptr<const Dataset> ds) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot read checkpoint " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return restore(decode_checkpoint(bytes), std::move(ds));
}

}  // namespace sqvae
