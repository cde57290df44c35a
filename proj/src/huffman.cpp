#include "nerv/huffman.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <string>

#include "nerv/error.hpp"

namespace nerv {

std::vector<std::uint32_t> HuffmanCode::codewords() const {
  std::vector<std::uint32_t> out;
  out.reserve(entries.size());
  std::uint64_t code = 0;
  int prev = entries.empty() ? 0 : entries.front().second;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const int len = entries[i].second;
    if (i > 0) code = (code + 1) << (len - prev);
    prev = len;
    out.push_back(static_cast<std::uint32_t>(code));
  }
  return out;
}

std::uint8_t HuffmanCode::max_length() const {
  std::uint8_t m = 0;
  for (const auto& e : entries) m = std::max(m, e.second);
  return m;
}

double HuffmanCode::kraft_sum() const {
  double s = 0.0;
  for (const auto& e : entries) s += std::ldexp(1.0, -static_cast<int>(e.second));
  return s;
}

namespace {

struct Node {
  std::uint64_t freq;
  std::uint32_t id;  // leaves first (by symbol), then internal nodes in creation order
};

struct NodeGreater {
  bool operator()(const Node& a, const Node& b) const {
    return a.freq != b.freq ? a.freq > b.freq : a.id > b.id;
  }
};

// Code lengths of the leaves (ordered by symbol) for the given weights.
std::vector<int> huffman_lengths(const std::vector<std::uint64_t>& weights) {
  const std::size_t n = weights.size();
  if (n == 1) return {1};
  std::vector<std::uint32_t> parent(2 * n - 1, 0);
  std::priority_queue<Node, std::vector<Node>, NodeGreater> heap;
  for (std::size_t i = 0; i < n; ++i) heap.push({weights[i], static_cast<std::uint32_t>(i)});
  std::uint32_t next = static_cast<std::uint32_t>(n);
  while (heap.size() > 1) {
    const Node a = heap.top();
    heap.pop();
    const Node b = heap.top();
    heap.pop();
    parent[a.id] = next;
    parent[b.id] = next;
    heap.push({a.freq + b.freq, next});
    ++next;
  }
  const std::uint32_t root = next - 1;
  std::vector<int> depth(2 * n - 1, 0);
  for (std::uint32_t id = root; id-- > 0;) depth[id] = depth[parent[id]] + 1;
  return {depth.begin(), depth.begin() + n};
}

}  // namespace

HuffmanCode canonical_code(std::vector<std::pair<std::uint16_t, std::uint8_t>> entries) {
  if (entries.empty()) throw DataError("empty Huffman code");
  std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second < b.second : a.first < b.first;
  });
  std::uint64_t kraft = 0;  // in units of 2^-kMaxCodeLength
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const int len = entries[i].second;
    if (len < 1 || len > kMaxCodeLength) {
      throw DataError("code length " + std::to_string(len) + " out of range");
    }
    kraft += std::uint64_t{1} << (kMaxCodeLength - len);
  }
  if (kraft > (std::uint64_t{1} << kMaxCodeLength)) throw DataError("code violates Kraft inequality");
  std::vector<std::uint16_t> symbols;
  for (const auto& e : entries) symbols.push_back(e.first);
  std::sort(symbols.begin(), symbols.end());
  if (std::adjacent_find(symbols.begin(), symbols.end()) != symbols.end()) {
    throw DataError("duplicate symbol in code");
  }
  return HuffmanCode{std::move(entries)};
}

HuffmanCode build_huffman(std::span<const std::uint64_t> frequencies) {
  std::vector<std::uint16_t> symbols;
  std::vector<std::uint64_t> weights;
  for (std::size_t s = 0; s < frequencies.size() && s <= 0xFFFF; ++s) {
    if (frequencies[s] > 0) {
      symbols.push_back(static_cast<std::uint16_t>(s));
      weights.push_back(frequencies[s]);
    }
  }
  if (symbols.empty()) throw DataError("cannot build a code without symbols");
  auto lengths = huffman_lengths(weights);
  // Flatten the distribution until the longest codeword fits.
  while (*std::max_element(lengths.begin(), lengths.end()) > kMaxCodeLength) {
    for (auto& w : weights) w = (w + 1) / 2;
    lengths = huffman_lengths(weights);
  }
  std::vector<std::pair<std::uint16_t, std::uint8_t>> entries;
  for (std::size_t i = 0; i < symbols.size(); ++i) {
    entries.emplace_back(symbols[i], static_cast<std::uint8_t>(lengths[i]));
  }
  return canonical_code(std::move(entries));
}

HuffmanEncoded huffman_encode(std::span<const std::uint16_t> symbols) {
  if (symbols.empty()) throw DataError("cannot entropy-code an empty sequence");
  std::vector<std::uint64_t> freq(65536, 0);
  for (auto s : symbols) ++freq[s];
  return huffman_encode(symbols, build_huffman(freq));
}

HuffmanEncoded huffman_encode(std::span<const std::uint16_t> symbols, const HuffmanCode& code) {
  std::vector<std::uint32_t> word(65536, 0);
  std::vector<std::uint8_t> length(65536, 0);
  const auto words = code.codewords();
  for (std::size_t i = 0; i < code.entries.size(); ++i) {
    word[code.entries[i].first] = words[i];
    length[code.entries[i].first] = code.entries[i].second;
  }
  HuffmanEncoded enc;
  enc.code = code;
  std::uint64_t acc = 0;  // pending bits, right aligned
  int pending = 0;
  for (auto s : symbols) {
    const int len = length[s];
    if (len == 0) throw DataError("symbol " + std::to_string(s) + " has no codeword");
    acc = (acc << len) | word[s];
    pending += len;
    enc.bit_count += len;
    while (pending >= 8) {
      pending -= 8;
      enc.payload.push_back(static_cast<std::uint8_t>(acc >> pending));
    }
    acc &= (std::uint64_t{1} << pending) - 1;
  }
  if (pending > 0) enc.payload.push_back(static_cast<std::uint8_t>(acc << (8 - pending)));
  return enc;
}

std::vector<std::uint16_t> huffman_decode(const HuffmanCode& code,
                                          std::span<const std::uint8_t> payload,
                                          std::uint64_t bit_count, std::size_t n_symbols) {
  if (bit_count > static_cast<std::uint64_t>(payload.size()) * 8) {
    throw CorruptStream("payload shorter than its declared bit length", payload.size());
  }
  // Canonical decoding tables: first code and entry offset per length.
  const int max_len = code.max_length();
  std::vector<std::uint64_t> first(max_len + 2, 0), count(max_len + 2, 0), offset(max_len + 2, 0);
  for (const auto& e : code.entries) ++count[e.second];
  std::uint64_t c = 0, off = 0;
  for (int len = 1; len <= max_len; ++len) {
    first[len] = c;
    offset[len] = off;
    off += count[len];
    c = (c + count[len]) << 1;
  }

  std::vector<std::uint16_t> out;
  out.reserve(std::min<std::uint64_t>(n_symbols, bit_count));
  std::uint64_t pos = 0;
  for (std::size_t i = 0; i < n_symbols; ++i) {
    std::uint64_t v = 0;
    int len = 0;
    for (;;) {
      if (pos >= bit_count) throw CorruptStream("truncated entropy-coded payload", pos / 8);
      v = (v << 1) | ((payload[pos / 8] >> (7 - pos % 8)) & 1u);
      ++pos;
      ++len;
      if (len > max_len) throw CorruptStream("invalid codeword in payload", (pos - 1) / 8);
      if (v - first[len] < count[len] && v >= first[len]) {
        out.push_back(code.entries[offset[len] + (v - first[len])].first);
        break;
      }
    }
  }
  if (pos != bit_count) throw CorruptStream("payload has unconsumed bits", pos / 8);
  return out;
}

}  // namespace nerv
