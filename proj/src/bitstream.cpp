#include "nerv/bitstream.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>

#include "nerv/error.hpp"

namespace nerv {

namespace {

void put_checked(ByteWriter& w, long long v, long long max, const char* field, int width) {
  if (v < 0 || v > max) {
    throw InvalidConfig(std::string(field) + " " + std::to_string(v) + " does not fit the format");
  }
  switch (width) {
    case 1: w.u8(static_cast<std::uint8_t>(v)); break;
    case 2: w.u16(static_cast<std::uint16_t>(v)); break;
    default: w.u32(static_cast<std::uint32_t>(v)); break;
  }
}

void write_header(ByteWriter& w, const CompressedArtifact& a) {
  w.raw(std::string(kNrvMagic, 4));
  w.u16(kNrvVersion);
  write_config_block(w, a.config);
  w.u32(static_cast<std::uint32_t>(a.tensors.size()));
  for (const auto& [name, q] : a.tensors) {
    put_checked(w, static_cast<long long>(name.size()), 0xFFFF, "tensor name length", 2);
    w.raw(name);
    put_checked(w, static_cast<long long>(q.shape.size()), 0xFF, "tensor rank", 1);
    for (auto d : q.shape) put_checked(w, static_cast<long long>(d), 0xFFFFFFFFll, "dimension", 4);
    w.u8(static_cast<std::uint8_t>(q.bit));
    w.f32(q.scale);
    w.f32(q.mu_min);
    put_checked(w, static_cast<long long>(q.symbol_count()), 0xFFFFFFFFll, "symbol count", 4);
  }
}

void write_codebook(ByteWriter& w, const CompressedArtifact& a) {
  w.u32(static_cast<std::uint32_t>(a.code.entries.size()));
  for (const auto& [sym, len] : a.code.entries) {
    w.u16(sym);
    w.u8(len);
  }
  w.u64(a.payload_bits);
}

template <typename E>
E read_enum(ByteReader& r, int count, const char* what) {
  const std::size_t at = r.offset();
  const int v = r.u8();
  if (v >= count) r.fail_at(std::string("invalid ") + what + " " + std::to_string(v), at);
  return static_cast<E>(v);
}

}  // namespace

void write_config_block(ByteWriter& w, const NervConfig& c) {
  validate(c);
  w.f64(c.embed_base);
  put_checked(w, c.embed_length, 0xFFFF, "embed_length", 2);
  w.u8(static_cast<std::uint8_t>(c.embedding));
  put_checked(w, c.num_blocks(), 0xFF, "block count", 1);
  for (int s : c.upscale_factors) put_checked(w, s, 0xFF, "upscale factor", 1);
  put_checked(w, c.stem_channels, 0xFFFFFFFFll, "stem_channels", 4);
  put_checked(w, c.block_channels, 0xFFFFFFFFll, "block_channels", 4);
  put_checked(w, c.mlp_hidden, 0xFFFFFFFFll, "mlp_hidden", 4);
  put_checked(w, c.stem_height(), 0xFFFF, "stem height", 2);
  put_checked(w, c.stem_width(), 0xFFFF, "stem width", 2);
  w.u8(static_cast<std::uint8_t>(c.activation));
  w.u8(static_cast<std::uint8_t>(c.norm));
  w.u8(static_cast<std::uint8_t>(c.upscale_mode));
  put_checked(w, c.conv_kernel, 0xFF, "conv_kernel", 1);
  put_checked(w, c.height, 0xFFFF, "height", 2);
  put_checked(w, c.width, 0xFFFF, "width", 2);
  put_checked(w, c.frame_count, 0xFFFFFFFFll, "frame_count", 4);
}

NervConfig read_config_block(ByteReader& r) {
  const std::size_t start = r.offset();
  NervConfig c;
  c.embed_base = r.f64();
  c.embed_length = r.u16();
  c.embedding = read_enum<Embedding>(r, 2, "embedding");
  const int nb = r.u8();
  c.upscale_factors.clear();
  for (int i = 0; i < nb; ++i) c.upscale_factors.push_back(r.u8());
  const auto u32_int = [&r](const char* what) {
    const std::size_t at = r.offset();
    const std::uint32_t v = r.u32();
    if (v > static_cast<std::uint32_t>(std::numeric_limits<int>::max())) {
      r.fail_at(std::string(what) + " out of range", at);
    }
    return static_cast<int>(v);
  };
  c.stem_channels = u32_int("stem_channels");
  c.block_channels = u32_int("block_channels");
  c.mlp_hidden = u32_int("mlp_hidden");
  const int stem_h = r.u16();
  const int stem_w = r.u16();
  c.activation = read_enum<Activation>(r, 4, "activation");
  c.norm = read_enum<Norm>(r, 3, "norm");
  c.upscale_mode = read_enum<UpscaleMode>(r, 3, "upscale mode");
  c.conv_kernel = r.u8();
  c.height = r.u16();
  c.width = r.u16();
  c.frame_count = u32_int("frame_count");
  try {
    validate(c);
  } catch (const InvalidConfig& e) {
    r.fail_at(std::string("invalid configuration block: ") + e.what(), start);
  }
  if (stem_h != c.stem_height() || stem_w != c.stem_width()) {
    r.fail_at("stem size inconsistent with resolution and upscale factors", start);
  }
  return c;
}

std::vector<std::uint8_t> serialize(const CompressedArtifact& a) {
  ByteWriter w;
  write_header(w, a);
  write_codebook(w, a);
  if (a.payload.size() != (a.payload_bits + 7) / 8) {
    throw DataError("payload size does not match its bit length");
  }
  w.bytes(a.payload);
  return w.take();
}

ArtifactLayout artifact_layout(const CompressedArtifact& a) {
  ArtifactLayout l;
  ByteWriter h;
  write_header(h, a);
  ByteWriter cb;
  write_codebook(cb, a);
  l.header_bytes = h.size();
  l.codebook_bytes = cb.size();
  l.payload_bytes = a.payload.size();
  l.total_bytes = l.header_bytes + l.codebook_bytes + l.payload_bytes;
  return l;
}

CompressedArtifact deserialize(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kNrvMagic, 4) != 0) {
    throw NotNervFile("missing NRVB magic");
  }
  ByteReader r(bytes);
  r.bytes(4);
  const std::uint16_t version = r.u16();
  if (version != kNrvVersion) {
    throw VersionError("unsupported .nrv format version " + std::to_string(version));
  }
  CompressedArtifact a;
  a.config = read_config_block(r);
  const auto expected = parameter_shapes(a.config);

  const std::size_t count_at = r.offset();
  const std::uint32_t n_tensors = r.u32();
  if (n_tensors != expected.size()) {
    r.fail_at("tensor count " + std::to_string(n_tensors) + " does not match the configuration",
              count_at);
  }
  std::uint64_t total_symbols = 0;
  for (std::uint32_t i = 0; i < n_tensors; ++i) {
    const std::size_t at = r.offset();
    const std::string name = r.raw(r.u16());
    auto it = expected.find(name);
    if (it == expected.end()) r.fail_at("unexpected tensor '" + name + "'", at);
    if (!a.tensors.empty() && !(a.tensors.back().first < name)) {
      r.fail_at("tensor records out of order", at);
    }
    QuantizedTensor q;
    const int rank = r.u8();
    for (int d = 0; d < rank; ++d) q.shape.push_back(r.u32());
    if (q.shape != it->second) r.fail_at("tensor '" + name + "' has unexpected shape", at);
    const std::size_t bit_at = r.offset();
    q.bit = r.u8();
    if (!((q.bit >= 1 && q.bit <= 16) || q.bit == kBypassBits)) {
      r.fail_at("invalid bit width " + std::to_string(q.bit), bit_at);
    }
    q.scale = r.f32();
    q.mu_min = r.f32();
    if (!std::isfinite(q.scale) || !std::isfinite(q.mu_min) || q.scale < 0.0f) {
      r.fail_at("invalid quantization parameters for '" + name + "'", bit_at);
    }
    const std::size_t sc_at = r.offset();
    const std::uint64_t symbols = r.u32();
    const std::uint64_t want = shape_numel(q.shape) * (q.bit == kBypassBits ? 2 : 1);
    if (symbols != want) r.fail_at("symbol count mismatch for '" + name + "'", sc_at);
    total_symbols += symbols;
    q.indices.resize(0);
    a.tensors.emplace_back(name, std::move(q));
  }

  const std::size_t cb_at = r.offset();
  const std::uint32_t n_codes = r.u32();
  if (n_codes == 0 || n_codes > 65536) r.fail_at("invalid codebook size", cb_at);
  if (static_cast<std::uint64_t>(n_codes) * 3 > r.remaining()) {
    r.fail_at("codebook exceeds stream", cb_at);
  }
  std::vector<std::pair<std::uint16_t, std::uint8_t>> entries;
  entries.reserve(n_codes);
  for (std::uint32_t i = 0; i < n_codes; ++i) {
    const std::uint16_t sym = r.u16();
    const std::uint8_t len = r.u8();
    entries.emplace_back(sym, len);
  }
  try {
    a.code = canonical_code(entries);
  } catch (const DataError& e) {
    r.fail_at(std::string("invalid codebook: ") + e.what(), cb_at);
  }
  if (a.code.entries != entries) r.fail_at("codebook not in canonical order", cb_at);

  const std::size_t bits_at = r.offset();
  a.payload_bits = r.u64();
  const std::uint64_t payload_bytes = a.payload_bits / 8 + (a.payload_bits % 8 != 0);
  if (a.payload_bits > static_cast<std::uint64_t>(r.remaining()) * 8 ||
      payload_bytes != r.remaining()) {
    r.fail_at("payload length " + std::to_string(r.remaining()) +
                  " bytes does not match declared " + std::to_string(a.payload_bits) + " bits",
              bits_at);
  }
  if (total_symbols > a.payload_bits) r.fail_at("payload too short for symbol count", bits_at);
  const std::size_t payload_at = r.offset();
  const auto payload = r.bytes(payload_bytes);
  a.payload.assign(payload.begin(), payload.end());

  std::vector<std::uint16_t> symbols;
  try {
    symbols = huffman_decode(a.code, payload, a.payload_bits, total_symbols);
  } catch (const CorruptStream& e) {
    throw CorruptStream("undecodable payload", payload_at + e.offset());
  }
  std::size_t pos = 0;
  for (auto& [name, q] : a.tensors) {
    const std::size_t n = shape_numel(q.shape) * (q.bit == kBypassBits ? 2 : 1);
    q.indices.assign(symbols.begin() + pos, symbols.begin() + pos + n);
    pos += n;
    if (q.bit != kBypassBits) {
      const std::uint32_t levels = (std::uint32_t{1} << q.bit) - 1;
      for (auto s : q.indices) {
        if (s > levels) r.fail_at("index exceeds level range in '" + name + "'", payload_at);
      }
    }
  }
  return a;
}

std::vector<std::uint8_t> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::vector<std::uint8_t> data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("error reading '" + path + "'");
  return data;
}

void write_file(const std::string& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path + "'");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("error writing '" + path + "'");
}

}  // namespace nerv
