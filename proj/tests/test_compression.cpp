#include <algorithm>
#include <cmath>
#include <map>
#include <queue>
#include <sstream>

#include "doctest.h"
#include "nerv/bitstream.hpp"
#include "nerv/compression.hpp"
#include "nerv/decoder.hpp"
#include "nerv/error.hpp"
#include "nerv/huffman.hpp"
#include "nerv/random.hpp"
#include "nerv/train.hpp"
#include "test_support.hpp"

using namespace nerv;

namespace {

// Optimal prefix-code cost by repeated merging of the two lightest weights.
std::uint64_t optimal_cost(const std::vector<std::uint64_t>& freqs) {
  std::priority_queue<std::uint64_t, std::vector<std::uint64_t>, std::greater<>> pq;
  for (auto f : freqs)
    if (f > 0) pq.push(f);
  if (pq.size() == 1) return pq.top();  // one symbol, one bit each
  std::uint64_t cost = 0;
  while (pq.size() > 1) {
    const auto a = pq.top();
    pq.pop();
    const auto b = pq.top();
    pq.pop();
    cost += a + b;
    pq.push(a + b);
  }
  return cost;
}

bool prefix_free(const HuffmanCode& code) {
  const auto words = code.codewords();
  for (std::size_t i = 0; i < words.size(); ++i)
    for (std::size_t j = 0; j < words.size(); ++j) {
      if (i == j) continue;
      const int li = code.entries[i].second, lj = code.entries[j].second;
      if (li <= lj && (words[j] >> (lj - li)) == words[i]) return false;
    }
  return true;
}

NervModel toy_model(std::vector<float> weights) {
  NervModel m;
  m.config = testing::tiny_config();
  m.params["a.weight"] = Tensor({2, 2}, std::move(weights));
  m.params["a.bias"] = Tensor({2}, std::vector<float>{0.01f, -0.02f});
  return m;
}

}  // namespace

TEST_CASE("global pruning zeroes the smallest magnitudes") {
  const auto [pruned, mask] = prune_global(toy_model({0.5f, -0.05f, 0.2f, -0.9f}), 0.5);
  CHECK(pruned.params.at("a.weight").data == std::vector<float>{0.5f, 0.0f, 0.0f, -0.9f});
  CHECK(pruned.params.at("a.bias").data == std::vector<float>{0.01f, -0.02f});  // biases kept
  CHECK(mask.keep.at("a.weight") == std::vector<std::uint8_t>{1, 0, 0, 1});
  CHECK(mask.keep.count("a.bias") == 0);
  CHECK(mask.pruned_count() == 2);

  const auto [same, all] = prune_global(toy_model({0.5f, -0.05f, 0.2f, -0.9f}), 0.0);
  CHECK(same.params == toy_model({0.5f, -0.05f, 0.2f, -0.9f}).params);
  CHECK(all.pruned_count() == 0);

  CHECK_THROWS_AS(prune_global(toy_model({1, 2, 3, 4}), 1.0), InvalidConfig);
  CHECK_THROWS_AS(prune_global(toy_model({1, 2, 3, 4}), -0.1), InvalidConfig);
}

TEST_CASE("pruning count is exact, tie-broken and idempotent") {
  const NervModel m = build_model(testing::small_config(), 8);
  const std::size_t n = count_prunable(m);
  for (double q : {0.1, 0.2, 0.37, 0.9}) {
    const auto [p, mask] = prune_global(m, q);
    CHECK(mask.pruned_count() == static_cast<std::size_t>(std::floor(q * n)));
    const auto [p2, mask2] = prune_global(p, q);
    CHECK(p2.params == p.params);
  }
  // All-equal magnitudes: the earliest entries in name/index order go first.
  const auto [t, tmask] = prune_global(toy_model({0.3f, -0.3f, 0.3f, 0.3f}), 0.5);
  CHECK(t.params.at("a.weight").data == std::vector<float>{0.0f, 0.0f, 0.3f, 0.3f});
}

TEST_CASE("quantization example and degenerate cases") {
  const auto q = quantize_tensor(Tensor({3}, std::vector<float>{-1, 0, 1}), 1);
  CHECK(q.scale == 2.0f);
  CHECK(q.mu_min == -1.0f);
  CHECK(q.indices == std::vector<std::uint16_t>{0, 1, 1});
  CHECK(dequantize_tensor(q).data == std::vector<float>{-1, 1, 1});

  const Tensor c({5}, 0.37f);
  const auto qc = quantize_tensor(c, 4);
  CHECK(qc.scale == 0.0f);
  CHECK(std::all_of(qc.indices.begin(), qc.indices.end(), [](auto i) { return i == 0; }));
  CHECK(dequantize_tensor(qc) == c);

  QuantizedTensor zeros;
  zeros.shape = {3};
  zeros.bit = 8;
  zeros.scale = 0.5f;
  zeros.mu_min = -2.0f;
  zeros.indices = {0, 0, 0};
  CHECK(dequantize_tensor(zeros).data == std::vector<float>{-2, -2, -2});

  CHECK_THROWS_AS(quantize_tensor(Tensor({2}, std::vector<float>{0, NAN}), 8), DataError);
  CHECK_THROWS_AS(quantize_tensor(Tensor({2}), 0), InvalidConfig);
  CHECK_THROWS_AS(quantize_tensor(Tensor({2}), 17), InvalidConfig);
}

TEST_CASE("quantization error is at most half a step for every width") {
  Rng rng(99);
  for (int bit = 1; bit <= 16; ++bit) {
    Tensor x({257});
    const double spread = rng.uniform(0.01, 10.0);
    for (auto& v : x.data) v = static_cast<float>(rng.uniform(-spread, spread * 0.3));
    const auto q = quantize_tensor(x, bit);
    const Tensor back = dequantize_tensor(q);
    const std::uint32_t levels = (1u << bit) - 1;
    for (std::size_t i = 0; i < x.numel(); ++i) {
      CHECK(q.indices[i] <= levels);
      // Oracle: the nearest grid point, found by scanning its neighbourhood.
      const double t = (x.data[i] - double(q.mu_min)) / q.scale;
      double best = 1e300;
      for (long k = std::max(0L, long(t) - 2); k <= std::min<long>(levels, long(t) + 2); ++k)
        best = std::min(best, std::abs(x.data[i] - dequantized_value(q, k)));
      const double err = std::abs(x.data[i] - dequantized_value(q, q.indices[i]));
      CHECK(err <= q.scale / 2.0);
      CHECK(err == doctest::Approx(best).epsilon(1e-9).scale(1e-12));
      const double ulp = std::nextafter(std::abs(back.data[i]), INFINITY) - std::abs(back.data[i]);
      CHECK(std::abs(x.data[i] - double(back.data[i])) <= q.scale / 2.0 + ulp);
    }
  }
}

TEST_CASE("bit-32 bypass is lossless") {
  const Tensor x = testing::random_image(4, 5, 3, -3.0, 3.0);
  const auto q = quantize_tensor(x, kBypassBits);
  CHECK(q.indices.size() == 2 * x.numel());
  CHECK(dequantize_tensor(q) == x);
}

TEST_CASE("huffman code for a small skewed stream") {
  const std::vector<std::uint16_t> s{0, 0, 0, 0, 1, 2};
  const auto enc = huffman_encode(s);
  std::map<int, int> lengths;
  for (auto [sym, len] : enc.code.entries) lengths[sym] = len;
  CHECK(lengths == std::map<int, int>{{0, 1}, {1, 2}, {2, 2}});
  CHECK(enc.bit_count == 8);
  CHECK(enc.payload.size() == 1);
  CHECK(huffman_decode(enc.code, enc.payload, enc.bit_count, s.size()) == s);
}

TEST_CASE("huffman edge cases") {
  const std::vector<std::uint16_t> one(10, 7);
  const auto enc = huffman_encode(one);
  REQUIRE(enc.code.entries.size() == 1);
  CHECK(enc.code.entries[0].second == 1);
  CHECK(enc.bit_count == 10);
  CHECK(huffman_decode(enc.code, enc.payload, enc.bit_count, one.size()) == one);
  CHECK_THROWS_AS(huffman_encode(std::vector<std::uint16_t>{}), DataError);

  // Fibonacci weights would give a 45-deep tree without the length cap.
  std::vector<std::uint64_t> fib(46);
  fib[0] = fib[1] = 1;
  for (std::size_t i = 2; i < fib.size(); ++i) fib[i] = fib[i - 1] + fib[i - 2];
  const auto deep = build_huffman(fib);
  CHECK(deep.entries.size() == fib.size());
  CHECK(deep.max_length() <= kMaxCodeLength);
  CHECK(deep.kraft_sum() <= 1.0);
  CHECK(prefix_free(deep));
  std::vector<std::uint16_t> stream;
  for (std::uint16_t sym = 0; sym < fib.size(); ++sym) stream.insert(stream.end(), 3, sym);
  const auto enc2 = huffman_encode(stream, deep);
  CHECK(huffman_decode(deep, enc2.payload, enc2.bit_count, stream.size()) == stream);
}

TEST_CASE("huffman is optimal, prefix free and lossless on random streams") {
  Rng rng(1234);
  for (int trial = 0; trial < 25; ++trial) {
    const int alphabet = 1 + static_cast<int>(rng.below(300));
    const std::size_t n = 1 + rng.below(5000);
    std::vector<std::uint16_t> s(n);
    const double skew = rng.uniform(0.5, 4.0);
    for (auto& v : s) v = static_cast<std::uint16_t>(alphabet * std::pow(rng.uniform(), skew));
    const auto enc = huffman_encode(s);
    CHECK(enc.code.kraft_sum() <= 1.0);
    CHECK(prefix_free(enc.code));
    std::vector<std::uint64_t> freqs(65536, 0);
    for (auto v : s) ++freqs[v];
    CHECK(enc.bit_count == optimal_cost(freqs));
    CHECK(enc.bit_count <= n * enc.code.max_length());
    CHECK(huffman_decode(enc.code, enc.payload, enc.bit_count, n) == s);
  }
}

TEST_CASE("huffman decode rejects truncated and invalid input") {
  std::vector<std::uint16_t> s;
  for (int i = 0; i < 200; ++i) s.push_back(static_cast<std::uint16_t>(i % 5 == 0 ? 1 : i % 3));
  const auto enc = huffman_encode(s);
  auto cut = enc.payload;
  cut.resize(cut.size() / 2);
  CHECK_THROWS_AS(huffman_decode(enc.code, cut, enc.bit_count, s.size()), CorruptStream);
  CHECK_THROWS_AS(huffman_decode(enc.code, enc.payload, enc.bit_count - 3, s.size()), CorruptStream);
  CHECK_THROWS_AS(huffman_decode(enc.code, enc.payload, enc.bit_count, s.size() - 1), CorruptStream);

  // An incomplete code leaves some bit patterns without a symbol.
  const auto sparse = canonical_code({{0, 1}, {1, 3}});
  const std::vector<std::uint8_t> bad{0xFF};
  CHECK_THROWS_AS(huffman_decode(sparse, bad, 8, 2), CorruptStream);
  CHECK_THROWS_AS(canonical_code({{0, 1}, {1, 1}, {2, 1}}), DataError);  // Kraft > 1
  CHECK_THROWS_AS(canonical_code({{0, 1}, {0, 2}}), DataError);          // duplicate
  CHECK_THROWS_AS(canonical_code({{0, 0}}), DataError);
}

TEST_CASE("bits per pixel") {
  CHECK(bpp(0, 1, 1, 1) == 0.0);
  CHECK(bpp(8ull << 20, 132, 720, 1080) == doctest::Approx(8.0 * 1048576 / (132.0 * 720 * 1080)));
  CHECK(bpp(8ull << 20, 132, 720, 1080) == doctest::Approx(0.0817).epsilon(1e-3));
  CHECK_THROWS_AS(bpp(8, 0, 1, 1), DomainError);
}

TEST_CASE("compression pipeline on a small fitted model") {
  const auto video = synth_translating_gradient(4, 32, 32);
  NervModel m = build_model(testing::small_config(), 6);
  TrainConfig tc;
  tc.epochs = 40;
  tc.warmup_epochs = 8;
  tc.base_lr = 2e-3;
  tc.track_ms_ssim = false;
  train(m, video, tc);

  CompressOptions opt;
  opt.q = 0.3;
  opt.bit = 8;
  opt.finetune = finetune_config(0);
  opt.finetune.epochs = 10;
  opt.finetune.warmup_epochs = 2;
  opt.finetune.base_lr = 1e-3;
  opt.finetune.track_ms_ssim = false;
  const auto r = compress_model(m, opt, &video);

  const std::size_t zeros = static_cast<std::size_t>(std::floor(0.3 * count_prunable(m)));
  CHECK(r.mask.pruned_count() == zeros);
  std::size_t actual = 0;
  for (const auto& [name, keep] : r.mask.keep)
    for (std::size_t i = 0; i < keep.size(); ++i)
      if (!keep[i]) actual += r.pruned.params.at(name).data[i] == 0.0f;
  CHECK(actual == zeros);  // fine-tuning kept the pruned entries at zero
  CHECK(r.finetune_history.records.size() == 10);

  const auto [just_pruned, mask] = prune_global(m, 0.3);
  CHECK(evaluate(r.pruned, video, {}, false).psnr >= evaluate(just_pruned, video, {}, false).psnr - 0.05);

  const auto& s = r.sizes;
  std::size_t numel = 0;
  for (const auto& [k, t] : m.params) numel += t.numel();
  CHECK(s.raw_fp32 == 4 * numel);
  CHECK(s.raw_fp32 > s.quantized_fixed_width);
  CHECK(s.quantized_fixed_width > s.huffman_payload);
  CHECK(s.file_header + s.file_codebook + s.file_payload == s.file_total);
  const auto bytes = serialize(r.artifact);
  CHECK(bytes.size() == s.file_total);

  std::ostringstream csv;
  write_stage_csv(csv, s, 4, 32, 32);
  CHECK(csv.str().rfind("stage,bytes,bpp\nraw_fp32,", 0) == 0);

  const NervModel decoded = load_model(bytes);
  CHECK(decoded.params == dequantize_model(r.artifact).params);
  for (const auto& [name, q] : r.artifact.tensors) CHECK(decoded.params.at(name) == dequantize_tensor(q));
}

TEST_CASE("lossless settings reproduce the model bit for bit") {
  const NervModel m = build_model(testing::small_config(), 7);
  CompressOptions opt;
  opt.q = 0.0;
  opt.bit = kBypassBits;
  const auto r = compress_model(m, opt);
  const NervModel back = load_model(serialize(r.artifact));
  CHECK(back.config == m.config);
  CHECK(back.params == m.params);
}
