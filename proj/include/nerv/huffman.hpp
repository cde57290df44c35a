#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

namespace nerv {

/// Canonical prefix code over 16-bit symbols. `entries` holds (symbol, code
/// length) sorted by (length, symbol); codewords follow from the lengths.
struct HuffmanCode {
  std::vector<std::pair<std::uint16_t, std::uint8_t>> entries;

  /// Codeword of each entry (MSB-first, `length` bits).
  std::vector<std::uint32_t> codewords() const;
  std::uint8_t max_length() const;
  /// Sum of 2^-length; at most 1 for a decodable code.
  double kraft_sum() const;

  bool operator==(const HuffmanCode&) const = default;
};

/// Longest codeword the encoder emits and the decoder accepts.
inline constexpr int kMaxCodeLength = 32;

/// Builds a canonical Huffman code from symbol frequencies. Ties in the
/// merge order are broken by symbol value, so the result is deterministic.
/// A single distinct symbol gets a 1-bit code. Throws DataError when every
/// frequency is zero.
HuffmanCode build_huffman(std::span<const std::uint64_t> frequencies);

/// Re-sorts (symbol, length) pairs canonically and checks them: lengths in
/// [1, kMaxCodeLength], unique symbols, Kraft sum <= 1. Throws DataError.
HuffmanCode canonical_code(std::vector<std::pair<std::uint16_t, std::uint8_t>> entries);

struct HuffmanEncoded {
  HuffmanCode code;
  std::vector<std::uint8_t> payload;  // MSB-first, zero padded
  std::uint64_t bit_count = 0;
};

/// Throws DataError for an empty sequence.
HuffmanEncoded huffman_encode(std::span<const std::uint16_t> symbols);

/// Encodes with a given code; every symbol must have a codeword.
HuffmanEncoded huffman_encode(std::span<const std::uint16_t> symbols, const HuffmanCode& code);

/// Decodes exactly `n_symbols` symbols from the first `bit_count` payload
/// bits. Throws CorruptStream (offset = payload byte) on truncation, an
/// invalid codeword, or unconsumed bits.
std::vector<std::uint16_t> huffman_decode(const HuffmanCode& code,
                                          std::span<const std::uint8_t> payload,
                                          std::uint64_t bit_count, std::size_t n_symbols);

}  // namespace nerv
