#include <png.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "nerv/error.hpp"
#include "nerv/frames_io.hpp"
#include "nerv/kvconfig.hpp"
#include "test_support.hpp"

using namespace nerv;
namespace fs = std::filesystem;

namespace {

// Writes a 16-bit RGB PNG with libpng directly (the library only emits 8-bit).
void write_png16(const std::string& path, int h, int w, const std::vector<std::uint16_t>& rgb) {
  FILE* f = std::fopen(path.c_str(), "wb");
  REQUIRE(f);
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  png_init_io(png, f);
  png_set_IHDR(png, info, w, h, 16, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  std::vector<png_byte> row(w * 6);
  for (int y = 0; y < h; ++y) {
    for (int i = 0; i < w * 3; ++i) {
      const auto v = rgb[y * w * 3 + i];
      row[2 * i] = static_cast<png_byte>(v >> 8);  // big-endian samples
      row[2 * i + 1] = static_cast<png_byte>(v & 0xFF);
    }
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  std::fclose(f);
}

}  // namespace

TEST_CASE("8-bit png round-trip is exact on every level") {
  Image im({3, 16, 16});
  for (std::size_t i = 0; i < im.numel(); ++i) im.data[i] = float((i * 37) % 256) / 255.0f;
  const auto path = (testing::temp_dir("png") / "levels.png").string();
  write_png(path, im);
  const Image back = read_png(path);
  REQUIRE(back.shape == im.shape);
  for (std::size_t i = 0; i < im.numel(); ++i) CHECK(to_u8(back.data[i]) == to_u8(im.data[i]));
  CHECK(back == im);

  CHECK(to_u8(-0.5f) == 0);
  CHECK(to_u8(2.0f) == 255);
  CHECK(to_u8(0.5f / 255.0f) == 1);  // half rounds up
}

TEST_CASE("16-bit png input is scaled to the unit range") {
  const auto path = (testing::temp_dir("png16") / "deep.png").string();
  write_png16(path, 2, 3, {0, 65535, 32768, 1, 2, 3, 100, 200, 300, 65535, 0, 0, 7, 7, 7, 9, 9, 9});
  const Image im = read_png(path);
  REQUIRE(im.shape == Shape{3, 2, 3});
  CHECK(im.data[0] == 0.0f);                                  // R(0,0)
  CHECK(im.data[6] == 1.0f);                                  // G(0,0)
  CHECK(im.data[12] == doctest::Approx(32768.0 / 65535.0));   // B(0,0)
}

TEST_CASE("frame directories") {
  const auto dir = testing::temp_dir("frames");
  std::vector<Image> frames{testing::random_image(8, 10, 1), testing::random_image(8, 10, 2),
                            testing::random_image(8, 10, 3)};
  for (auto& f : frames)
    for (auto& v : f.data) v = to_u8(v) / 255.0f;
  const auto names = save_frames(frames, dir.string());
  CHECK(names == std::vector<std::string>{"frame_00000.png", "frame_00001.png", "frame_00002.png"});
  const VideoTensor v = load_frames(dir.string());
  CHECK(v.num_frames() == 3);
  CHECK(v.frames == frames);
  CHECK(v.filenames == names);
  CHECK(v.fingerprint == content_fingerprint(frames));

  write_png((dir / "frame_00003.png").string(), testing::random_image(8, 11, 4));
  CHECK_THROWS_AS(load_frames(dir.string()), DataError);
  CHECK_THROWS_AS(load_frames(testing::temp_dir("empty").string()), DataError);

  const auto junk = (dir / "junk.png").string();
  std::ofstream(junk) << "not a png";
  CHECK_THROWS_AS(read_png(junk), Error);
  CHECK_THROWS_AS(read_png((dir / "missing.png").string()), IoError);
}

TEST_CASE("key-value config parsing") {
  const auto kv = KvConfig::parse(
      "# comment\n"
      "epochs = 12\n"
      "\n"
      "lr=0.001\n"
      "upscale_factors = 2, 2 ,4\n"
      "track_ms_ssim = no\n"
      "epochs = 14\n");
  CHECK(kv.get_int("epochs", 0) == 14);
  CHECK(kv.get_double("lr", 0) == 0.001);
  CHECK(kv.get_int_list("upscale_factors", {}) == std::vector<int>{2, 2, 4});
  CHECK(kv.get_bool("track_ms_ssim", true) == false);
  CHECK(kv.get_string("missing", "x") == "x");
  CHECK_THROWS_AS(KvConfig::parse("epochs 12"), InvalidConfig);
  CHECK_THROWS_AS(KvConfig::parse(" = 3"), InvalidConfig);
  CHECK_THROWS_AS(kv.get_int("lr", 0), InvalidConfig);
  CHECK_THROWS_AS(KvConfig::load("/nonexistent/cfg.txt"), IoError);

  auto over = kv;
  over.apply_override("epochs=3");
  CHECK(over.get_int("epochs", 0) == 3);
  CHECK_THROWS_AS(over.apply_override("epochs"), InvalidConfig);
}

TEST_CASE("settings resolution and snapshots") {
  auto kv = KvConfig::parse("epochs = 20\nstem_channels = 8\nloss_terms = l2+ssim\nprune_q = 0.3\n");
  const RunSettings s = resolve_settings(kv);
  CHECK(s.train.epochs == 20);
  CHECK(s.train.warmup_epochs == 4);
  CHECK(s.model.stem_channels == 8);
  CHECK(s.prune_q == 0.3);

  const KvConfig snap = settings_snapshot(s);
  const RunSettings again = resolve_settings(KvConfig::parse(snap.to_text()));
  CHECK(settings_snapshot(again).to_text() == snap.to_text());
  CHECK(again.model == s.model);

  CHECK(format_double(0.1) == "0.10000000000000001");
  kv.set("epochz", "1");
  CHECK_THROWS_AS(resolve_settings(kv), InvalidConfig);
  CHECK_THROWS_AS(resolve_settings(KvConfig::parse("prune_q = 1")), InvalidConfig);
  CHECK_THROWS_AS(resolve_settings(KvConfig::parse("activation = tanh")), InvalidConfig);
}
