#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "nerv/byteio.hpp"
#include "nerv/compression.hpp"

namespace nerv {

inline constexpr char kNrvMagic[4] = {'N', 'R', 'V', 'B'};
/// Format 1: affine quantization with 2^bit - 1 levels, indices rounded half
/// away from zero, one canonical code per file.
inline constexpr std::uint16_t kNrvVersion = 1;

/// Fixed binary layout of a NervConfig.
void write_config_block(ByteWriter& w, const NervConfig& config);
/// Throws CorruptStream for unknown enum values or inconsistent geometry.
NervConfig read_config_block(ByteReader& r);

/// Deterministic .nrv encoding (little-endian throughout).
std::vector<std::uint8_t> serialize(const CompressedArtifact& artifact);

/// Parses and fully validates a .nrv stream, including decoding the payload.
/// Throws NotNervFile, VersionError or CorruptStream (with byte offset).
CompressedArtifact deserialize(std::span<const std::uint8_t> bytes);

struct ArtifactLayout {
  std::size_t header_bytes = 0;    // magic through per-tensor records
  std::size_t codebook_bytes = 0;  // codebook and payload bit length
  std::size_t payload_bytes = 0;
  std::size_t total_bytes = 0;
};

ArtifactLayout artifact_layout(const CompressedArtifact& artifact);

std::vector<std::uint8_t> read_file(const std::string& path);
void write_file(const std::string& path, std::span<const std::uint8_t> bytes);

}  // namespace nerv
