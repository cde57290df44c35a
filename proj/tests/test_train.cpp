#include <cmath>
#include <filesystem>
#include <limits>
#include <sstream>

#include "doctest.h"
#include "nerv/error.hpp"
#include "nerv/train.hpp"
#include "test_support.hpp"

using namespace nerv;

namespace {

TrainConfig short_run(int epochs) {
  TrainConfig c;
  c.epochs = epochs;
  c.warmup_epochs = epochs / 5;
  c.base_lr = 2e-3;
  c.seed = 17;
  c.track_ms_ssim = true;
  return c;
}

}  // namespace

TEST_CASE("training lowers the loss and is deterministic") {
  const auto video = synth_translating_gradient(4, 32, 32);
  NervModel a = build_model(testing::small_config(), 5);
  NervModel b = a;
  const auto ha = train(a, video, short_run(30));
  const auto hb = train(b, video, short_run(30));
  REQUIRE(ha.records.size() == 30);
  CHECK(ha.records.back().loss < ha.records.front().loss);
  CHECK(ha.records.back().psnr > ha.records.front().psnr);
  for (std::size_t i = 0; i < ha.records.size(); ++i) {
    CHECK(ha.records[i].epoch == static_cast<int>(i) + 1);
    CHECK(ha.records[i].loss == hb.records[i].loss);
    CHECK(ha.records[i].psnr == hb.records[i].psnr);
    CHECK(ha.records[i].ms_ssim == hb.records[i].ms_ssim);
  }
  CHECK(a.params == b.params);

  std::ostringstream sa, sb;
  write_history_csv(sa, ha, false);
  write_history_csv(sb, hb, false);
  CHECK(sa.str() == sb.str());
  CHECK(sa.str().rfind("epoch,loss,psnr,ms_ssim,seconds\n1,", 0) == 0);
}

TEST_CASE("training rejects mismatched videos and bad configs") {
  NervModel m = build_model(testing::small_config(), 0);
  CHECK_THROWS_AS(train(m, synth_translating_gradient(4, 16, 16), short_run(2)), InvalidConfig);
  CHECK_THROWS_AS(train(m, synth_translating_gradient(3, 32, 32), short_run(2)), InvalidConfig);

  TrainConfig bad = short_run(10);
  bad.warmup_epochs = 11;
  CHECK_THROWS_AS(validate(bad), InvalidConfig);
  bad = short_run(10);
  bad.batch_size = 0;
  CHECK_THROWS_AS(validate(bad), InvalidConfig);
  bad = short_run(10);
  bad.checkpoint_every = 2;
  CHECK_THROWS_AS(validate(bad), InvalidConfig);  // no directory
}

TEST_CASE("non-finite loss aborts training") {
  NervModel m = build_model(testing::small_config(), 0);
  m.params.at("head.bias").data[0] = std::numeric_limits<float>::quiet_NaN();
  CHECK_THROWS_AS(train(m, synth_translating_gradient(4, 32, 32), short_run(2)), TrainingError);
}

TEST_CASE("batched training covers every frame once per epoch") {
  const auto video = synth_translating_gradient(5, 32, 32);
  NervModel m = build_model(testing::small_config(5), 1);
  TrainConfig c = short_run(4);
  c.batch_size = 2;
  const auto h = train(m, video, c);
  CHECK(h.records.size() == 4);
  CHECK(std::isfinite(h.records.back().loss));
}

TEST_CASE("checkpoint encode and decode round-trip") {
  const auto video = synth_translating_gradient(4, 32, 32);
  NervModel m = build_model(testing::small_config(), 2);
  const auto dir = testing::temp_dir("ckpt");
  TrainConfig c = short_run(6);
  c.checkpoint_every = 3;
  c.checkpoint_dir = dir.string();
  train(m, video, c);
  CHECK(std::filesystem::exists(dir / "epoch_00003.ckpt"));
  CHECK(std::filesystem::exists(dir / "epoch_00006.ckpt"));

  const Checkpoint last = load_checkpoint((dir / "epoch_00006.ckpt").string());
  CHECK(last.epoch == 6);
  CHECK(last.model.config == m.config);
  CHECK(last.model.params == m.params);
  CHECK(last.optimizer.step == 24);

  const auto bytes = encode_checkpoint(last);
  const Checkpoint again = decode_checkpoint(bytes);
  CHECK(again.model.params == last.model.params);
  CHECK(again.optimizer.m == last.optimizer.m);
  CHECK(again.optimizer.v == last.optimizer.v);
  CHECK(again.metadata == last.metadata);
  CHECK(encode_checkpoint(again) == bytes);

  auto truncated = bytes;
  truncated.resize(bytes.size() / 2);
  CHECK_THROWS_AS(decode_checkpoint(truncated), Error);
  auto trailing = bytes;
  trailing.push_back(0);
  CHECK_THROWS_AS(decode_checkpoint(trailing), Error);
  auto wrong = bytes;
  wrong[0] = 'X';
  CHECK_THROWS_AS(decode_checkpoint(wrong), Error);
}

TEST_CASE("resuming from a checkpoint reproduces an uninterrupted run") {
  const auto video = synth_translating_gradient(4, 32, 32);
  const NervModel init = build_model(testing::small_config(), 3);
  const auto dir = testing::temp_dir("resume");

  NervModel straight = init;
  const auto full = train(straight, video, short_run(8));

  NervModel first = init;
  TrainConfig c = short_run(8);
  c.checkpoint_every = 4;
  c.checkpoint_dir = dir.string();
  bool stop = false;
  TrainHooks hooks;
  hooks.on_epoch = [&](const NervModel&, const EpochRecord& r) {
    if (r.epoch == 4) stop = true;
    if (stop) throw std::runtime_error("interrupt");
  };
  CHECK_THROWS(train(first, video, c, hooks));

  const Checkpoint ck = load_checkpoint((dir / "epoch_00004.ckpt").string());
  NervModel resumed = build_model(testing::small_config(), 99);  // overwritten by resume
  TrainHooks r;
  r.resume = &ck;
  const auto tail = train(resumed, video, short_run(8), r);
  REQUIRE(tail.records.size() == 4);
  CHECK(tail.records.front().epoch == 5);
  CHECK(tail.records.back().loss == full.records.back().loss);
  CHECK(resumed.params == straight.params);
}

TEST_CASE("frame subsets and evaluation") {
  const auto video = synth_translating_gradient(4, 32, 32);
  NervModel m = build_model(testing::small_config(), 4);
  TrainHooks hooks;
  hooks.frame_subset = {0, 2};
  train(m, video, short_run(5), hooks);
  const auto all = evaluate(m, video);
  REQUIRE(all.frame_psnr.size() == 4);
  const std::vector<int> sub{1, 3};
  const auto part = evaluate(m, video, sub);
  CHECK(part.frame_psnr[0] == all.frame_psnr[1]);
  CHECK(part.frame_psnr[1] == all.frame_psnr[3]);

  hooks.frame_subset = {7};
  CHECK_THROWS_AS(train(m, video, short_run(1), hooks), DomainError);
}
