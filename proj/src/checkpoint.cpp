#include <cstring>

#include "nerv/bitstream.hpp"
#include "nerv/byteio.hpp"
#include "nerv/error.hpp"
#include "nerv/train.hpp"

namespace nerv {

namespace {

constexpr char kMagic[4] = {'N', 'R', 'V', 'C'};
constexpr std::uint16_t kVersion = 1;

void write_floats(ByteWriter& w, const std::vector<float>& v) {
  w.u64(v.size());
  for (float x : v) w.f32(x);
}

std::vector<float> read_floats(ByteReader& r) {
  const std::size_t at = r.offset();
  const std::uint64_t n = r.u64();
  if (n > r.remaining() / 4) r.fail_at("float array exceeds stream", at);
  std::vector<float> v(n);
  for (auto& x : v) x = r.f32();
  return v;
}

void write_moments(ByteWriter& w, const std::map<std::string, std::vector<float>>& m) {
  w.u32(static_cast<std::uint32_t>(m.size()));
  for (const auto& [name, v] : m) {
    w.str(name);
    write_floats(w, v);
  }
}

std::map<std::string, std::vector<float>> read_moments(ByteReader& r) {
  std::map<std::string, std::vector<float>> m;
  const std::uint32_t n = r.u32();
  for (std::uint32_t i = 0; i < n; ++i) {
    std::string name = r.str();
    m[name] = read_floats(r);
  }
  return m;
}

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ck) {
  ByteWriter w;
  w.raw(std::string(kMagic, 4));
  w.u16(kVersion);
  write_config_block(w, ck.model.config);
  w.u32(static_cast<std::uint32_t>(ck.epoch));
  w.u32(static_cast<std::uint32_t>(ck.metadata.size()));
  for (const auto& [k, v] : ck.metadata) {
    w.str(k);
    w.str(v);
  }
  w.u32(static_cast<std::uint32_t>(ck.model.params.size()));
  for (const auto& [name, t] : ck.model.params) {
    w.str(name);
    w.u8(static_cast<std::uint8_t>(t.rank()));
    for (auto d : t.shape) w.u32(static_cast<std::uint32_t>(d));
    write_floats(w, t.data);
  }
  w.u64(ck.optimizer.step);
  write_moments(w, ck.optimizer.m);
  write_moments(w, ck.optimizer.v);
  return w.take();
}

Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw DataError("not a checkpoint file");
  }
  ByteReader r(bytes);
  r.bytes(4);
  const std::uint16_t version = r.u16();
  if (version != kVersion) {
    throw VersionError("unsupported checkpoint version " + std::to_string(version));
  }
  Checkpoint ck;
  ck.model.config = read_config_block(r);
  ck.epoch = static_cast<int>(r.u32());
  const std::uint32_t n_meta = r.u32();
  for (std::uint32_t i = 0; i < n_meta; ++i) {
    std::string k = r.str();
    std::string v = r.str();
    ck.metadata.emplace_back(std::move(k), std::move(v));
  }
  const auto expected = parameter_shapes(ck.model.config);
  const std::uint32_t n_tensors = r.u32();
  for (std::uint32_t i = 0; i < n_tensors; ++i) {
    const std::size_t at = r.offset();
    std::string name = r.str();
    Tensor t;
    const int rank = r.u8();
    for (int d = 0; d < rank; ++d) t.shape.push_back(r.u32());
    t.data = read_floats(r);
    auto it = expected.find(name);
    if (it == expected.end() || it->second != t.shape || t.data.size() != shape_numel(t.shape)) {
      r.fail_at("checkpoint tensor '" + name + "' does not match the configuration", at);
    }
    ck.model.params.emplace(std::move(name), std::move(t));
  }
  if (ck.model.params.size() != expected.size()) r.fail("checkpoint is missing tensors");
  ck.optimizer.step = r.u64();
  ck.optimizer.m = read_moments(r);
  ck.optimizer.v = read_moments(r);
  if (r.remaining() != 0) r.fail("trailing bytes after checkpoint");
  return ck;
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  write_file(path, encode_checkpoint(ckpt));
}

Checkpoint load_checkpoint(const std::string& path) { return decode_checkpoint(read_file(path)); }

}  // namespace nerv
