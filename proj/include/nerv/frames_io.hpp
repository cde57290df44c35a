#pragma once

#include <string>
#include <vector>

#include "nerv/video.hpp"

namespace nerv {

/// Reads an 8- or 16-bit PNG (grey, grey+alpha, palette, RGB or RGBA; alpha
/// is dropped) as a planar RGB image scaled to [0, 1]. Throws IoError/DataError.
Image read_png(const std::string& path);

/// Writes an 8-bit RGB PNG; values are clamped to [0, 1] and scaled with
/// round-half-away-from-zero.
void write_png(const std::string& path, const Image& image);

/// Loads every *.png in `directory`, ordered by filename. Throws DataError for
/// an empty directory or mixed resolutions.
VideoTensor load_frames(const std::string& directory);

/// Writes frame_00000.png, frame_00001.png, ... (at least five digits) and
/// returns the file names. Creates the directory if needed.
std::vector<std::string> save_frames(const std::vector<Image>& frames, const std::string& directory);

/// 8-bit code of a [0, 1] value.
unsigned char to_u8(float v);

}  // namespace nerv
