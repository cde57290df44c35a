#pragma once

#include <string_view>

#include "nerv/video.hpp"

namespace nerv {

enum class FilterKind { gaussian, uniform, median, minimum, maximum };

std::string_view to_string(FilterKind k);
FilterKind parse_filter_kind(std::string_view s);

/// Per-channel window x window filter with mirror padding that repeats the
/// edge sample (d c b a | a b c d | d c b a). The Gaussian uses
/// sigma = (window - 1) / 2, truncated to the window and normalized.
/// Throws InvalidConfig unless the window is odd and >= 3.
Image filter_image(const Image& image, FilterKind kind, int window = 3);

/// filter_image() applied to every frame.
VideoTensor filter_baseline(const VideoTensor& video, FilterKind kind, int window = 3);

}  // namespace nerv
