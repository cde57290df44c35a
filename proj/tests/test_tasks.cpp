#include <algorithm>
#include <cmath>
#include <sstream>

#include "doctest.h"
#include "nerv/baselines.hpp"
#include "nerv/error.hpp"
#include "nerv/metrics.hpp"
#include "nerv/tasks.hpp"
#include "test_support.hpp"

using namespace nerv;

namespace {

// Pixels (all three channels) where two frames differ.
std::size_t changed_pixels(const Image& a, const Image& b) {
  const std::size_t hw = a.dim(1) * a.dim(2);
  std::size_t n = 0;
  for (std::size_t p = 0; p < hw; ++p) {
    bool diff = false;
    for (int c = 0; c < 3; ++c) diff |= a.data[c * hw + p] != b.data[c * hw + p];
    n += diff;
  }
  return n;
}

TrainConfig quick(int epochs) {
  TrainConfig c;
  c.epochs = epochs;
  c.warmup_epochs = epochs / 5;
  c.base_lr = 2e-3;
  c.track_ms_ssim = false;
  return c;
}

}  // namespace

TEST_CASE("noise touches exactly the requested number of pixels") {
  // Values strictly inside (0, 1) so every perturbation is visible.
  std::vector<Image> frames;
  for (int i = 0; i < 3; ++i) frames.push_back(testing::random_image(20, 25, 40 + i, 0.1, 0.9));
  const VideoTensor clean = make_video(frames);
  for (auto pattern : {NoisePattern::white, NoisePattern::black, NoisePattern::salt_pepper}) {
    for (double d : {0.0, 0.05, 0.33, 1.0}) {
      const auto noisy = add_noise(clean, {pattern, d, 7});
      for (int i = 0; i < 3; ++i)
        CHECK(changed_pixels(clean.frames[i], noisy.frames[i]) ==
              static_cast<std::size_t>(std::floor(d * 20 * 25)));
    }
  }
  const auto white = add_noise(clean, {NoisePattern::white, 1.0, 1});
  for (const auto& f : white.frames)
    CHECK(std::all_of(f.data.begin(), f.data.end(), [](float v) { return v == 1.0f; }));
  const auto sp = add_noise(clean, {NoisePattern::salt_pepper, 0.5, 3});
  for (const auto& f : sp.frames)
    for (std::size_t i = 0; i < f.numel(); ++i)
      if (f.data[i] != clean.frames[0].data[i] && &f == &sp.frames[0])
        CHECK((f.data[i] == 0.0f || f.data[i] == 1.0f));

  const auto r1 = add_noise(clean, {NoisePattern::random, 0.2, 9});
  const auto r2 = add_noise(clean, {NoisePattern::random, 0.2, 9});
  const auto r3 = add_noise(clean, {NoisePattern::random, 0.2, 10});
  CHECK(r1.frames == r2.frames);
  CHECK(r1.frames != r3.frames);
  CHECK(add_noise(clean, {NoisePattern::black, 0.0, 1}).frames == clean.frames);
  CHECK_THROWS_AS(add_noise(clean, {NoisePattern::black, 1.5, 1}), InvalidConfig);
}

TEST_CASE("classical filters") {
  const Image flat = testing::constant_image(9, 9, 0.42f);
  for (auto k : {FilterKind::gaussian, FilterKind::uniform, FilterKind::median, FilterKind::minimum,
                 FilterKind::maximum})
    for (float v : filter_image(flat, k, 5).data) CHECK(v == doctest::Approx(0.42f));

  Image spike = testing::constant_image(7, 7, 0.2f);
  spike.data[3 * 7 + 3] = 1.0f;  // red channel, centre
  const Image med = filter_image(spike, FilterKind::median, 3);
  CHECK(med.data[3 * 7 + 3] == 0.2f);
  const Image mx = filter_image(spike, FilterKind::maximum, 3);
  CHECK(mx.data[2 * 7 + 2] == 1.0f);
  CHECK(mx.data[0] == 0.2f);
  const Image avg = filter_image(spike, FilterKind::uniform, 3);
  CHECK(avg.data[3 * 7 + 4] == doctest::Approx(0.2f + 0.8f / 9.0f));

  // Reflective padding repeats the edge sample, so a corner min sees itself.
  Image ramp = testing::constant_image(3, 3, 0.0f);
  for (int i = 0; i < 9; ++i) ramp.data[i] = 0.1f * i;
  CHECK(filter_image(ramp, FilterKind::minimum, 3).data[0] == 0.0f);
  CHECK(filter_image(ramp, FilterKind::maximum, 3).data[0] == doctest::Approx(0.4f));

  CHECK_THROWS_AS(filter_image(flat, FilterKind::median, 4), InvalidConfig);
  CHECK_THROWS_AS(filter_image(flat, FilterKind::median, 1), InvalidConfig);
  CHECK(filter_baseline(make_video({flat, flat}), FilterKind::median).num_frames() == 2);
}

TEST_CASE("sampling cost of the two representations") {
  CHECK(sampling_cost(132, 720, 1080, Representation::pixel_wise) == 102643200ull);
  CHECK(sampling_cost(132, 720, 1080, Representation::image_wise) == 132ull);
  CHECK(sampling_cost(1, 1, 1, Representation::pixel_wise) == 1ull);
  CHECK(sampling_cost(1, 1, 1, Representation::image_wise) == 1ull);
}

TEST_CASE("pixel-wise baselines") {
  for (auto v : {PixelwiseVariant::sine_mlp, PixelwiseVariant::pe_relu_mlp}) {
    PixelwiseConfig c;
    c.variant = v;
    c.height = 8;
    c.width = 8;
    c.frame_count = 2;
    c = match_pixelwise_budget(c, 20000);
    CHECK(std::abs(double(count_params(c)) - 20000) / 20000 < 0.05);
    const auto a = build_pixelwise(c, 4), b = build_pixelwise(c, 4);
    CHECK(a.params == b.params);
    CHECK(count_params(a) == count_params(c));
    const double x = pixel_coordinate(v, 3, 8), t = pixel_coordinate(v, 1, 2);
    const auto rgb = pixelwise_forward(a, x, x, t);
    CHECK(rgb == pixelwise_forward(b, x, x, t));
    for (float ch : rgb) CHECK((ch >= 0.0f && ch <= 1.0f));
    const Image frame = pixelwise_render(a, 1);
    CHECK(frame.shape == Shape{3, 8, 8});
    const std::size_t at = 3 * 8 + 3;
    CHECK(frame.data[at] == doctest::Approx(rgb[0]).epsilon(1e-5));
    CHECK_THROWS_AS(pixelwise_forward(a, 5.0, 0.5, 0.5), DomainError);

    PixelwiseModel m = a;
    const auto video = synth_translating_gradient(2, 8, 8);
    const auto h = train_pixelwise(m, video, quick(5), 16);
    CHECK(h.records.size() == 5);
    CHECK(h.records.back().loss < h.records.front().loss);
  }
  CHECK(pixel_coordinate(PixelwiseVariant::sine_mlp, 0, 4) == doctest::Approx(-0.75));
  CHECK(pixel_coordinate(PixelwiseVariant::pe_relu_mlp, 3, 4) == doctest::Approx(1.0));
}

TEST_CASE("interpolation on a static video") {
  const auto video = synth_static(6, 32, 32);
  NervConfig cfg = testing::small_config(6);
  cfg.embed_length = 3;
  const auto r = interpolation_eval(video, 2, cfg, quick(300), 2);
  CHECK(r.train_frames == std::vector<int>{0, 2, 4});
  CHECK(r.heldout_frames == std::vector<int>{1, 3, 5});
  CHECK(r.train_psnr > 25.0);
  CHECK(r.heldout_psnr > 25.0);
  CHECK(r.heldout.psnr == r.heldout_psnr);
  CHECK_THROWS_AS(interpolation_eval(video, 1, testing::small_config(6), quick(1), 2), InvalidConfig);
  CHECK_THROWS_AS(interpolation_eval(video, 6, testing::small_config(6), quick(1), 2), InvalidConfig);
}

TEST_CASE("denoising report") {
  const auto clean = synth_translating_gradient(4, 32, 32);
  const auto r = denoise_eval(clean, {NoisePattern::salt_pepper, 0.05, 1}, testing::small_config(),
                              quick(20), 3);
  const auto noisy = add_noise(clean, {NoisePattern::salt_pepper, 0.05, 1});
  CHECK(r.noisy_psnr == doctest::Approx(compare_videos(noisy.frames, clean.frames).psnr));
  CHECK(r.filter_psnr.size() == 5);
  CHECK(std::isfinite(r.nerv.psnr));
}

TEST_CASE("ablation variants share a parameter budget") {
  const NervConfig base = testing::small_config();
  const std::size_t budget = count_params(build_model(base, 0).params);
  for (auto axis : {AblationAxis::embedding, AblationAxis::upscale, AblationAxis::norm,
                    AblationAxis::activation, AblationAxis::loss}) {
    const auto vs = ablation_variants(axis, base, quick(1), budget);
    REQUIRE(vs.size() >= 2);
    for (const auto& v : vs) {
      const double n = double(count_params(build_model(v.model, 0).params));
      CHECK(std::abs(n - budget) / budget < 0.1);
    }
    CHECK(parse_ablation_axis(to_string(axis)) == axis);
  }
  const auto emb = ablation_variants(AblationAxis::embedding, base, quick(1), budget);
  CHECK(std::any_of(emb.begin(), emb.end(),
                    [](const auto& v) { return v.model.embedding == Embedding::none; }));
}

TEST_CASE("rate-distortion points") {
  const auto video = synth_translating_gradient(4, 32, 32);
  NervConfig narrow = testing::small_config(), wide = narrow;
  narrow.block_channels = 8;
  wide.block_channels = 24;
  TrainConfig ft = quick(3);
  const auto pts = rd_report(video, {narrow, wide}, 0.2, 8, quick(10), ft, 1);
  REQUIRE(pts.size() == 2);
  for (const auto& p : pts)
    CHECK(p.record.bpp == doctest::Approx(8.0 * p.file.size() / (4.0 * 32 * 32)));
  CHECK(pts[0].record.params < pts[1].record.params);
  CHECK(pts[0].record.bpp < pts[1].record.bpp);
}

TEST_CASE("evaluation csv") {
  std::vector<EvalRecord> recs{{"a", 10, 0.5, 30.25, 0.9, 1.5, 200.0}};
  std::ostringstream with, without;
  write_eval_csv(with, recs, true);
  write_eval_csv(without, recs, false);
  CHECK(with.str().rfind("label,params,bpp,psnr,ms_ssim,encode_seconds,decode_fps\na,10,", 0) == 0);
  CHECK(without.str().find(",0.000,0.000\n") != std::string::npos);
  CHECK(with.str() != without.str());
}
