#include "nerv/frames_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <memory>

#include <png.h>

#include "nerv/error.hpp"

namespace fs = std::filesystem;

namespace nerv {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using File = std::unique_ptr<std::FILE, FileCloser>;

[[noreturn]] void png_error_handler(png_structp png, png_const_charp msg) {
  auto* what = static_cast<std::string*>(png_get_error_ptr(png));
  if (what) *what = msg;
  png_longjmp(png, 1);
}

void png_warning_handler(png_structp, png_const_charp) {}

}  // namespace

unsigned char to_u8(float v) {
  const float c = std::clamp(v, 0.0f, 1.0f);
  return static_cast<unsigned char>(std::floor(static_cast<double>(c) * 255.0 + 0.5));
}

Image read_png(const std::string& path) {
  File f(std::fopen(path.c_str(), "rb"));
  if (!f) throw IoError("cannot open '" + path + "'");
  unsigned char sig[8];
  if (std::fread(sig, 1, 8, f.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0) {
    throw DataError("'" + path + "' is not a PNG file");
  }
  std::string error;
  png_structp png =
      png_create_read_struct(PNG_LIBPNG_VER_STRING, &error, png_error_handler, png_warning_handler);
  if (!png) throw IoError("libpng initialization failed");
  png_infop info = png_create_info_struct(png);
  Image img;
  std::vector<png_bytep> rows;
  std::vector<unsigned char> buffer;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw DataError("cannot decode '" + path + "': " + error);
  }
  png_init_io(png, f.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);
  const int depth = png_get_bit_depth(png, info);
  const int color = png_get_color_type(png, info);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA) png_set_gray_to_rgb(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  png_set_strip_alpha(png);
  if (depth == 16) png_set_swap(png);  // little-endian host order
  png_read_update_info(png, info);
  const png_uint_32 w = png_get_image_width(png, info);
  const png_uint_32 h = png_get_image_height(png, info);
  const int out_depth = png_get_bit_depth(png, info);
  const std::size_t stride = png_get_rowbytes(png, info);
  buffer.resize(stride * h);
  rows.resize(h);
  for (png_uint_32 y = 0; y < h; ++y) rows[y] = buffer.data() + y * stride;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  img = Image({3, h, w});
  const std::size_t hw = static_cast<std::size_t>(h) * w;
  for (png_uint_32 y = 0; y < h; ++y) {
    for (png_uint_32 x = 0; x < w; ++x) {
      for (int c = 0; c < 3; ++c) {
        float v;
        if (out_depth == 16) {
          const unsigned char* p = rows[y] + (x * 3 + c) * 2;
          v = static_cast<float>(p[0] | (p[1] << 8)) / 65535.0f;
        } else {
          v = static_cast<float>(rows[y][x * 3 + c]) / 255.0f;
        }
        img.data[c * hw + y * w + x] = v;
      }
    }
  }
  return img;
}

void write_png(const std::string& path, const Image& image) {
  if (image.rank() != 3 || image.dim(0) != 3) throw ShapeError("expected a (3, H, W) image");
  const std::size_t h = image.dim(1), w = image.dim(2), hw = h * w;
  std::vector<unsigned char> buffer(hw * 3);
  for (std::size_t p = 0; p < hw; ++p)
    for (int c = 0; c < 3; ++c) buffer[p * 3 + c] = to_u8(image.data[c * hw + p]);

  File f(std::fopen(path.c_str(), "wb"));
  if (!f) throw IoError("cannot write '" + path + "'");
  std::string error;
  png_structp png =
      png_create_write_struct(PNG_LIBPNG_VER_STRING, &error, png_error_handler, png_warning_handler);
  if (!png) throw IoError("libpng initialization failed");
  png_infop info = png_create_info_struct(png);
  std::vector<png_bytep> rows(h);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("cannot encode '" + path + "': " + error);
  }
  png_init_io(png, f.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(w), static_cast<png_uint_32>(h), 8,
               PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  for (std::size_t y = 0; y < h; ++y) rows[y] = buffer.data() + y * w * 3;
  png_set_rows(png, info, rows.data());
  png_write_png(png, info, PNG_TRANSFORM_IDENTITY, nullptr);
  png_destroy_write_struct(&png, &info);
  if (std::fflush(f.get()) != 0) throw IoError("error writing '" + path + "'");
}

VideoTensor load_frames(const std::string& directory) {
  std::error_code ec;
  if (!fs::is_directory(directory, ec)) throw IoError("'" + directory + "' is not a directory");
  std::vector<std::string> names;
  for (const auto& entry : fs::directory_iterator(directory)) {
    if (!entry.is_regular_file()) continue;
    auto ext = entry.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), ::tolower);
    if (ext == ".png") names.push_back(entry.path().filename().string());
  }
  if (names.empty()) throw DataError("no PNG frames in '" + directory + "'");
  std::sort(names.begin(), names.end());
  std::vector<Image> frames;
  for (const auto& n : names) {
    frames.push_back(read_png((fs::path(directory) / n).string()));
    if (frames.back().shape != frames.front().shape) {
      throw DataError("frame '" + n + "' is " + shape_string(frames.back().shape) + ", expected " +
                      shape_string(frames.front().shape));
    }
  }
  return make_video(std::move(frames), std::move(names));
}

std::vector<std::string> save_frames(const std::vector<Image>& frames, const std::string& directory) {
  std::error_code ec;
  fs::create_directories(directory, ec);
  if (ec) throw IoError("cannot create '" + directory + "': " + ec.message());
  const int digits = std::max<int>(5, static_cast<int>(std::to_string(frames.size()).size()));
  std::vector<std::string> names;
  for (std::size_t i = 0; i < frames.size(); ++i) {
    char name[64];
    std::snprintf(name, sizeof name, "frame_%0*zu.png", digits, i);
    write_png((fs::path(directory) / name).string(), frames[i]);
    names.emplace_back(name);
  }
  return names;
}

}  // namespace nerv
