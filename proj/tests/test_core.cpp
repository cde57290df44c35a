#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "doctest.h"
#include "nerv/encoding.hpp"
#include "nerv/error.hpp"
#include "nerv/layers.hpp"
#include "nerv/loss.hpp"
#include "nerv/model.hpp"
#include "nerv/random.hpp"
#include "test_support.hpp"

using namespace nerv;

TEST_CASE("positional encoding values") {
  auto e = positional_encode(0.5, 2.0, 1);
  REQUIRE(e.size() == 2);
  CHECK(e[0] == doctest::Approx(1.0));
  CHECK(std::abs(e[1]) < 1e-12);

  e = positional_encode(1.0, 2.0, 2);
  REQUIRE(e.size() == 4);
  CHECK(std::abs(e[0]) < 1e-12);
  CHECK(e[1] == doctest::Approx(-1.0));
  CHECK(std::abs(e[2]) < 1e-12);
  CHECK(e[3] == doctest::Approx(1.0));

  CHECK(positional_encode(0.3, 1.25, 80).size() == 160);
  NervConfig c;
  CHECK(c.embedding_dim() == 160);
  CHECK(embed_timestamp(c, 0.25).size() == 160);
}

TEST_CASE("positional encoding stays in [-1, 1]") {
  Rng rng(7);
  for (int i = 0; i < 200; ++i) {
    const double t = 1.0 - rng.uniform();  // (0, 1]
    const double b = rng.uniform(1.0, 3.0);
    const int l = 1 + static_cast<int>(rng.below(100));
    for (double v : positional_encode(t, b, l)) {
      CHECK(v >= -1.0);
      CHECK(v <= 1.0);
    }
  }
}

TEST_CASE("positional encoding rejects bad parameters") {
  CHECK_THROWS_AS(positional_encode(0.5, 1.25, 0), InvalidConfig);
  CHECK_THROWS_AS(positional_encode(0.5, 0.0, 4), InvalidConfig);
  CHECK_THROWS_AS(positional_encode(0.5, -1.0, 4), InvalidConfig);
  NervConfig c;
  CHECK_THROWS_AS(embed_timestamp(c, 0.0), DomainError);
  CHECK_THROWS_AS(embed_timestamp(c, 1.5), DomainError);
}

TEST_CASE("frame timestamps") {
  CHECK(frame_timestamp(0, 4) == 0.25);
  CHECK(frame_timestamp(3, 4) == 1.0);
  CHECK(frame_timestamp(0, 1) == 1.0);
  CHECK_THROWS_AS(frame_timestamp(4, 4), DomainError);
  CHECK_THROWS_AS(frame_timestamp(-1, 4), DomainError);
}

TEST_CASE("smallest embedding length covering a sampling rate") {
  CHECK(nyquist_embed_length(1.25, 8.0) == 10);  // 1.25^9 = 7.45, 1.25^10 = 9.31
  CHECK(nyquist_embed_length(2.0, 8.0) == 3);
  CHECK(nyquist_embed_length(2.0, 1.0) == 1);
  CHECK_THROWS_AS(nyquist_embed_length(1.0, 8.0), InvalidConfig);
}

namespace {

// out(c, S*i+a, S*j+d) = in(c*S*S + a*S + d, i, j), written out directly.
Tensor shuffle_oracle(const Tensor& x, int s) {
  const int c = static_cast<int>(x.dim(0)) / (s * s), h = static_cast<int>(x.dim(1)),
            w = static_cast<int>(x.dim(2));
  Tensor y({static_cast<std::size_t>(c), static_cast<std::size_t>(h * s),
            static_cast<std::size_t>(w * s)});
  for (int ch = 0; ch < c; ++ch)
    for (int i = 0; i < h; ++i)
      for (int j = 0; j < w; ++j)
        for (int a = 0; a < s; ++a)
          for (int d = 0; d < s; ++d) {
            const int src_c = ch * s * s + a * s + d;
            y.data[(static_cast<std::size_t>(ch) * h * s + s * i + a) * w * s + s * j + d] =
                x.data[(static_cast<std::size_t>(src_c) * h + i) * w + j];
          }
  return y;
}

}  // namespace

TEST_CASE("pixel shuffle layout") {
  Tensor x({4, 1, 1}, std::vector<float>{1, 2, 3, 4});
  Tensor y = pixel_shuffle(x, 2);
  CHECK(y.shape == Shape{1, 2, 2});
  CHECK(y.data == std::vector<float>{1, 2, 3, 4});  // [[a, b], [c, d]]

  Tensor z = testing::random_image(5, 7, 3);
  CHECK(pixel_shuffle(z, 1) == z);

  CHECK_THROWS_AS(pixel_shuffle(Tensor({3, 2, 2}), 2), ShapeError);
}

TEST_CASE("pixel shuffle matches the index map and is a bijection") {
  Rng rng(11);
  for (int s : {2, 3, 5}) {
    Tensor x({static_cast<std::size_t>(2 * s * s), 3, 4});
    for (auto& v : x.data) v = static_cast<float>(rng.uniform());
    Tensor y = pixel_shuffle(x, s);
    CHECK(y == shuffle_oracle(x, s));

    auto a = x.data, b = y.data;
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    CHECK(a == b);

    std::vector<float> back(x.numel());
    ops::pixel_unshuffle<float>(y.data, 2, 3, 4, s, back);
    CHECK(back == x.data);
  }
}

TEST_CASE("conv2d forward against a direct loop") {
  const int cin = 3, cout = 4, h = 5, w = 6, k = 3;
  Rng rng(5);
  std::vector<double> x(cin * h * w), wt(cout * cin * k * k), b(cout);
  for (auto& v : x) v = rng.uniform(-1, 1);
  for (auto& v : wt) v = rng.uniform(-1, 1);
  for (auto& v : b) v = rng.uniform(-1, 1);
  std::vector<double> y(cout * h * w), col(cin * k * k * h * w);
  ops::conv2d_forward<double>(x, cin, h, w, wt, b, cout, k, y, col);
  for (int o = 0; o < cout; ++o)
    for (int i = 0; i < h; ++i)
      for (int j = 0; j < w; ++j) {
        double acc = b[o];
        for (int c = 0; c < cin; ++c)
          for (int di = 0; di < k; ++di)
            for (int dj = 0; dj < k; ++dj) {
              const int ii = i + di - 1, jj = j + dj - 1;
              if (ii < 0 || ii >= h || jj < 0 || jj >= w) continue;
              acc += wt[((o * cin + c) * k + di) * k + dj] * x[(c * h + ii) * w + jj];
            }
        CHECK(y[(o * h + i) * w + j] == doctest::Approx(acc).epsilon(1e-12));
      }
}

TEST_CASE("build_model is deterministic and shapes follow the config") {
  const auto cfg = testing::small_config();
  const NervModel a = build_model(cfg, 42), b = build_model(cfg, 42), c = build_model(cfg, 43);
  CHECK(a.params == b.params);
  CHECK(a.params != c.params);
  const auto shapes = parameter_shapes(cfg);
  REQUIRE(shapes.size() == a.params.size());
  for (const auto& [name, t] : a.params) CHECK(shapes.at(name) == t.shape);

  CHECK(a.params.at("stem.0.weight").shape == Shape{32, 16});
  CHECK(a.params.at("stem.1.weight").shape == Shape{8 * 4 * 4, 32});
  CHECK(a.params.at("blocks.0.conv.weight").shape == Shape{16 * 4, 8, 3, 3});
  CHECK(a.params.at("head.weight").shape == Shape{3, 4, 3, 3});
}

TEST_CASE("channel schedule halves per block") {
  NervConfig c;
  c.block_channels = 512;
  CHECK(c.block_out_channels(0) == 512);
  CHECK(c.block_out_channels(1) == 256);
  CHECK(c.block_out_channels(4) == 32);
  c.block_channels = 3;
  CHECK(c.block_out_channels(5) == 1);
}

TEST_CASE("stem size must divide the target resolution") {
  NervConfig c;
  c.upscale_factors = {5, 2, 2, 2, 2};
  c.height = 720;
  c.width = 1080;  // 1080 / 80 is not an integer
  CHECK_THROWS_AS(validate(c), InvalidConfig);
  CHECK_THROWS_AS(build_model(c, 0), InvalidConfig);
  c.width = 1280;
  CHECK_NOTHROW(validate(c));
  CHECK(c.stem_height() == 9);
  CHECK(c.stem_width() == 16);

  NervConfig d;  // 1080p defaults: 5,3,2,2,2 from a 9x16 stem
  CHECK(d.stem_height() == 9);
  CHECK(d.stem_width() == 16);
}

TEST_CASE("parameter counting") {
  CHECK(count_params(ParamMap{}) == 0);
  ParamMap conv;
  conv["conv.weight"] = Tensor({64, 64, 3, 3});
  conv["conv.bias"] = Tensor({64});
  CHECK(count_params(conv) == 36928);

  const auto cfg = testing::tiny_config();
  CHECK(count_params(cfg) == count_params(build_model(cfg, 0)));
  CHECK(count_params(cfg) < 1000);
}

TEST_CASE("full-size configurations hit the small and medium budgets") {
  // 720p layout (9x16 stem, factors 5,2,2,2,2) with a narrow stem; only the
  // block width is searched.
  NervConfig base;
  base.height = 720;
  base.width = 1280;
  base.upscale_factors = {5, 2, 2, 2, 2};
  base.stem_channels = 16;
  for (std::size_t target : {std::size_t{3'200'000}, std::size_t{6'300'000}}) {
    const NervConfig m = match_param_budget(base, target);
    const double n = static_cast<double>(count_params(m));
    INFO("target " << target << " C2 " << m.block_channels << " params " << n);
    CHECK(std::abs(n - target) / target < 0.05);
  }
}

TEST_CASE("forward is pure and frame-independent") {
  const auto model = build_model(testing::small_config(), 3);
  const Image a1 = forward(model, 0.25), b1 = forward(model, 0.75);
  const Image b2 = forward(model, 0.75), a2 = forward(model, 0.25);
  CHECK(a1 == a2);
  CHECK(b1 == b2);
  CHECK(a1 != b1);
  CHECK(a1.shape == Shape{3, 32, 32});

  const std::vector<double> ts{0.75, 0.25, 0.5};
  const auto batch = forward_batch(model, ts);
  REQUIRE(batch.size() == 3);
  CHECK(batch[0] == b1);
  CHECK(batch[1] == a1);
  CHECK(batch[2] == forward(model, 0.5));

  for (const auto& im : batch)
    for (float v : im.data) {
      CHECK(v >= 0.0f);
      CHECK(v <= 1.0f);
    }
  CHECK_THROWS_AS(forward(model, 0.0), DomainError);
  CHECK_THROWS_AS(forward(model, 1.01), DomainError);
  CHECK(decode_frame(model, 0) == forward(model, 0.25));
}


TEST_CASE("model gradients match central differences") {
  LossSpec smooth;
  smooth.terms = {LossTerm::l2, LossTerm::ssim};
  for (auto act : {Activation::relu, Activation::leaky_relu, Activation::swish, Activation::gelu})
    for (auto norm : {Norm::none, Norm::batch, Norm::instance})
      for (auto mode : {UpscaleMode::pixelshuffle, UpscaleMode::transpose_conv,
                        UpscaleMode::bilinear_conv}) {
        auto cfg = testing::tiny_config();
        cfg.activation = act;
        cfg.norm = norm;
        cfg.upscale_mode = mode;
        const double err = testing::model_gradient_error(cfg, smooth, 9);
        INFO(to_string(act) << " / " << to_string(norm) << " / " << to_string(mode) << " err " << err);
        CHECK(err < 1e-5);
      }
}

TEST_CASE("gradient of the default loss with the scalar-time input") {
  auto cfg = testing::tiny_config();
  cfg.embedding = Embedding::none;
  CHECK(testing::model_gradient_error(cfg, LossSpec{}, 4) < 1e-4);
}

TEST_CASE("gradient of the default loss") {
  for (std::uint64_t seed : {0, 1, 2})
    CHECK(testing::model_gradient_error(testing::tiny_config(), LossSpec{}, seed) < 1e-5);
}
