// Command-line front end: fit, compress, decode and the evaluation suites.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "nerv/bitstream.hpp"
#include "nerv/compression.hpp"
#include "nerv/decoder.hpp"
#include "nerv/error.hpp"
#include "nerv/frames_io.hpp"
#include "nerv/kvconfig.hpp"
#include "nerv/logging.hpp"
#include "nerv/tasks.hpp"
#include "nerv/train.hpp"

namespace fs = std::filesystem;
using namespace nerv;

namespace {

bool deterministic_mode() {
  const char* v = std::getenv("NERV_DETERMINISTIC");
  return v != nullptr && std::string(v) != "0" && std::string(v) != "";
}

struct Common {
  std::string config;
  std::vector<std::string> overrides;
  std::string run_dir;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("-c,--config", c.config, "key = value configuration file")->check(CLI::ExistingFile);
  cmd->add_option("-s,--set", c.overrides, "override a configuration key (key=value)");
  cmd->add_option("--run-dir", c.run_dir, "directory for run artifacts");
}

KvConfig load_kv(const Common& c) {
  KvConfig kv = c.config.empty() ? KvConfig{} : KvConfig::load(c.config);
  for (const auto& o : c.overrides) kv.apply_override(o);
  return kv;
}

std::string make_run_dir(const Common& c, const std::string& command) {
  std::string dir = c.run_dir;
  if (dir.empty()) {
    char stamp[32];
    const std::time_t now = std::time(nullptr);
    std::strftime(stamp, sizeof stamp, "%Y%m%d-%H%M%S", std::gmtime(&now));
    dir = (fs::path("runs") / (command + "-" + stamp)).string();
  }
  fs::create_directories(dir);
  return dir;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw IoError("error writing '" + path.string() + "'");
}

/// Fills in the resolution from the video and applies a parameter budget.
RunSettings settings_for(const KvConfig& kv, const VideoTensor& video) {
  RunSettings s = resolve_settings(kv);
  s.model.height = video.height();
  s.model.width = video.width();
  s.model.frame_count = video.num_frames();
  validate(s.model);
  if (s.param_budget > 0) s.model = match_param_budget(s.model, s.param_budget);
  return s;
}

/// Resolved configuration plus what is needed to replay the run.
void write_run_state(const std::string& dir, const RunSettings& s, const std::string& command,
                     const std::vector<std::pair<std::string, std::string>>& extra) {
  write_text(fs::path(dir) / "config.txt", settings_snapshot(s).to_text());
  std::string run = "command = " + command + "\n";
  run += "model_seed = " + std::to_string(s.model_seed) + "\n";
  run += "train_seed = " + std::to_string(s.train.seed) + "\n";
  run += "noise_seed = " + std::to_string(s.noise.seed) + "\n";
  for (const auto& [k, v] : extra) run += k + " = " + v + "\n";
  write_text(fs::path(dir) / "run.txt", run);
}

std::string csv_text(const std::vector<EvalRecord>& records) {
  std::ostringstream os;
  write_eval_csv(os, records, !deterministic_mode());
  return os.str();
}

void emit_csv(const std::string& path, const std::string& dir, const std::string& name,
              const std::string& text) {
  write_text(fs::path(dir) / name, text);
  if (!path.empty()) write_text(path, text);
  std::cout << text;
}

std::vector<int> parse_index_list(const std::string& s) {
  std::vector<int> out;
  std::stringstream ss(s);
  for (std::string item; std::getline(ss, item, ',');) {
    try {
      std::size_t used = 0;
      out.push_back(std::stoi(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::logic_error&) {
      throw InvalidConfig("bad frame index '" + item + "'");
    }
  }
  return out;
}

std::string fingerprint_of(const VideoTensor& v) { return fingerprint_hex(v.fingerprint); }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Neural video representation: fit, compress and decode videos as networks"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "show help for every subcommand");
  bool quiet = false;
  app.add_flag("--quiet", quiet, "only log warnings and errors");

  // fit
  Common fit_c;
  std::string fit_video;
  auto* fit = app.add_subcommand("fit", "fit a network to a directory of PNG frames");
  add_common(fit, fit_c);
  fit->add_option("-v,--video", fit_video, "frame directory")->required();

  // compress
  Common cmp_c;
  std::string cmp_ckpt, cmp_out, cmp_video, cmp_stages;
  double cmp_q = -1.0;
  int cmp_bit = -1;
  auto* cmp = app.add_subcommand("compress", "prune, fine-tune, quantize and entropy code a checkpoint");
  add_common(cmp, cmp_c);
  cmp->add_option("--checkpoint", cmp_ckpt, "checkpoint written by fit")->required()->check(CLI::ExistingFile);
  cmp->add_option("-q,--prune", cmp_q, "pruning ratio q in [0, 1)");
  cmp->add_option("-b,--bits", cmp_bit, "quantization width (1..16, or 32 for lossless)");
  cmp->add_option("-o,--output", cmp_out, "output .nrv file")->required();
  cmp->add_option("-v,--video", cmp_video, "frame directory used for fine-tuning");
  cmp->add_option("--stages", cmp_stages, "write the stage-size CSV here as well");

  // decode
  std::string dec_in, dec_out, dec_frames;
  int dec_workers = 1;
  bool dec_half = false;
  auto* dec = app.add_subcommand("decode", "decode a .nrv file to PNG frames");
  dec->add_option("input", dec_in, ".nrv file")->required();
  dec->add_option("-o,--output", dec_out, "output directory")->required();
  dec->add_option("--frames", dec_frames, "comma-separated frame indices (default: all)");
  dec->add_option("-j,--workers", dec_workers, "decode threads")->check(CLI::PositiveNumber);
  dec->add_flag("--half", dec_half, "evaluate in half precision");

  // eval-rd
  Common rd_c;
  std::string rd_video, rd_out;
  std::vector<int> rd_sizes;
  auto* rd = app.add_subcommand("eval-rd", "rate-distortion sweep over model widths");
  add_common(rd, rd_c);
  rd->add_option("-v,--video", rd_video, "frame directory")->required();
  rd->add_option("--widths", rd_sizes, "block_channels values to sweep")->required()->delimiter(',');
  rd->add_option("-o,--output", rd_out, "CSV report");

  // eval-denoise
  Common dn_c;
  std::string dn_video, dn_out;
  auto* dn = app.add_subcommand("eval-denoise", "fit a noisy copy and compare with filters");
  add_common(dn, dn_c);
  dn->add_option("-v,--video", dn_video, "clean frame directory")->required();
  dn->add_option("-o,--output", dn_out, "CSV report");

  // eval-interp
  Common ip_c;
  std::string ip_video, ip_out;
  auto* ip = app.add_subcommand("eval-interp", "fit every k-th frame and score the rest");
  add_common(ip, ip_c);
  ip->add_option("-v,--video", ip_video, "frame directory")->required();
  ip->add_option("-o,--output", ip_out, "CSV report");

  // ablate
  Common ab_c;
  std::string ab_video, ab_out, ab_axis;
  auto* ab = app.add_subcommand("ablate", "architecture or loss ablation at a fixed budget");
  add_common(ab, ab_c);
  ab->add_option("-v,--video", ab_video, "frame directory")->required();
  ab->add_option("--axis", ab_axis, "embedding | upscale | norm | activation | loss")->required();
  ab->add_option("-o,--output", ab_out, "CSV report");

  // bench
  std::string bench_in;
  int bench_frames = 32;
  bool bench_half = false;
  auto* bench = app.add_subcommand("bench", "decode throughput of a .nrv file or checkpoint");
  bench->add_option("input", bench_in, ".nrv file or checkpoint")->required()->check(CLI::ExistingFile);
  bench->add_option("-n,--frames", bench_frames, "frames to decode")->check(CLI::PositiveNumber);
  bench->add_flag("--half", bench_half, "evaluate in half precision");

  // synth
  std::string syn_kind = "gradient", syn_out;
  int syn_t = 16, syn_h = 128, syn_w = 128;
  double syn_speed = 1.0;
  auto* syn = app.add_subcommand("synth", "write a synthetic test video as PNG frames");
  syn->add_option("--kind", syn_kind, "gradient | disc | static")
      ->check(CLI::IsMember({"gradient", "disc", "static"}));
  syn->add_option("-t,--frames", syn_t, "frame count")->check(CLI::PositiveNumber);
  syn->add_option("--height", syn_h, "frame height")->check(CLI::PositiveNumber);
  syn->add_option("--width", syn_w, "frame width")->check(CLI::PositiveNumber);
  syn->add_option("--speed", syn_speed, "disc motion in pixels per frame");
  syn->add_option("-o,--output", syn_out, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  if (quiet) set_log_level(LogLevel::warning);
  const bool det = deterministic_mode();

  try {
    if (*fit) {
      const auto video = load_frames(fit_video);
      RunSettings s = settings_for(load_kv(fit_c), video);
      const std::string dir = make_run_dir(fit_c, "fit");
      if (s.train.checkpoint_every > 0) s.train.checkpoint_dir = (fs::path(dir) / "checkpoints").string();
      write_run_state(dir, s, "fit",
                      {{"video", fit_video}, {"fingerprint", fingerprint_of(video)},
                       {"params", std::to_string(count_params(s.model))}});
      log_info("fitting " + std::to_string(count_params(s.model)) + " parameters to " +
               std::to_string(video.num_frames()) + " frames of " + std::to_string(video.height()) +
               "x" + std::to_string(video.width()));
      NervModel model = build_model(s.model, s.model_seed);
      TrainHooks hooks;
      const int every = std::max(1, s.train.epochs / 20);
      hooks.on_epoch = [&](const NervModel&, const EpochRecord& r) {
        if (r.epoch % every == 0 || r.epoch == s.train.epochs) {
          char line[128];
          std::snprintf(line, sizeof line, "epoch %d loss %.5f psnr %.2f", r.epoch, r.loss, r.psnr);
          log_info(line);
        }
      };
      const auto history = train(model, video, s.train, hooks);
      std::ostringstream csv;
      write_history_csv(csv, history, !det);
      write_text(fs::path(dir) / "history.csv", csv.str());
      Checkpoint ck{model, {}, s.train.epochs, {}};
      ck.metadata = {{"video", fs::absolute(fit_video).string()},
                     {"fingerprint", fingerprint_of(video)},
                     {"model_seed", std::to_string(s.model_seed)},
                     {"train_seed", std::to_string(s.train.seed)}};
      const auto ckpt_path = fs::path(dir) / "model.ckpt";
      save_checkpoint(ckpt_path.string(), ck);
      const auto q = evaluate(model, video);
      std::printf("checkpoint %s\npsnr %.4f\nms_ssim %.6f\n", ckpt_path.string().c_str(), q.psnr, q.ms_ssim);
      return 0;
    }

    if (*cmp) {
      const Checkpoint ck = load_checkpoint(cmp_ckpt);
      KvConfig kv = load_kv(cmp_c);
      if (cmp_q >= 0.0) kv.set("prune_q", format_double(cmp_q));
      if (cmp_bit >= 0) kv.set("quant_bit", std::to_string(cmp_bit));
      RunSettings s = resolve_settings(kv);
      s.model = ck.model.config;
      std::string video_dir = cmp_video;
      for (const auto& [k, v] : ck.metadata)
        if (video_dir.empty() && k == "video") video_dir = v;
      const std::string dir = make_run_dir(cmp_c, "compress");
      CompressOptions opts;
      opts.q = s.prune_q;
      opts.bit = s.quant_bit;
      opts.finetune = s.finetune;
      std::optional<VideoTensor> video;
      if (opts.q > 0.0) {
        if (!video_dir.empty() && fs::is_directory(video_dir)) {
          video = load_frames(video_dir);
        } else {
          log_warning("no video available; pruning without fine-tuning");
        }
      }
      const auto result = compress_model(ck.model, opts, video ? &*video : nullptr);
      const auto bytes = serialize(result.artifact);
      write_file(cmp_out, bytes);
      write_run_state(dir, s, "compress",
                      {{"checkpoint", cmp_ckpt},
                       {"output", cmp_out},
                       {"video", video ? video_dir : std::string("none")},
                       {"fingerprint", video ? fingerprint_of(*video) : std::string("none")}});
      const auto& c = result.artifact.config;
      std::ostringstream stages;
      write_stage_csv(stages, result.sizes, c.frame_count, c.height, c.width);
      write_text(fs::path(dir) / "stages.csv", stages.str());
      if (!cmp_stages.empty()) write_text(cmp_stages, stages.str());
      std::cout << stages.str();
      std::printf("wrote %s (%zu bytes, %.6f bpp)\n", cmp_out.c_str(), bytes.size(),
                  bpp(8 * bytes.size(), c.frame_count, c.height, c.width));
      return 0;
    }

    if (*dec) {
      const NervModel model = load_model_file(dec_in);
      std::vector<int> idx;
      if (dec_frames.empty()) {
        for (int i = 0; i < model.config.frame_count; ++i) idx.push_back(i);
      } else {
        idx = parse_index_list(dec_frames);
      }
      ForwardOptions opts;
      opts.half_precision = dec_half;
      const auto frames = decode_frames(model, idx, dec_workers, opts);
      if (dec_frames.empty()) {
        save_frames(frames, dec_out);
      } else {
        fs::create_directories(dec_out);
        for (std::size_t k = 0; k < idx.size(); ++k) {
          char name[64];
          std::snprintf(name, sizeof name, "frame_%05d.png", idx[k]);
          write_png((fs::path(dec_out) / name).string(), frames[k]);
        }
      }
      std::printf("decoded %zu frames to %s\n", frames.size(), dec_out.c_str());
      return 0;
    }

    if (*rd) {
      const auto video = load_frames(rd_video);
      RunSettings s = settings_for(load_kv(rd_c), video);
      const std::string dir = make_run_dir(rd_c, "eval-rd");
      write_run_state(dir, s, "eval-rd", {{"video", rd_video}, {"fingerprint", fingerprint_of(video)}});
      std::vector<NervConfig> configs;
      for (int w : rd_sizes) {
        NervConfig c = s.model;
        c.block_channels = w;
        configs.push_back(c);
      }
      const auto points = rd_report(video, configs, s.prune_q, s.quant_bit, s.train, s.finetune, s.model_seed);
      std::vector<EvalRecord> records;
      for (std::size_t i = 0; i < points.size(); ++i) {
        write_file((fs::path(dir) / ("model_" + std::to_string(i) + ".nrv")).string(), points[i].file);
        records.push_back(points[i].record);
      }
      emit_csv(rd_out, dir, "rd.csv", csv_text(records));
      return 0;
    }

    if (*dn) {
      const auto video = load_frames(dn_video);
      RunSettings s = settings_for(load_kv(dn_c), video);
      const std::string dir = make_run_dir(dn_c, "eval-denoise");
      write_run_state(dir, s, "eval-denoise", {{"video", dn_video}, {"fingerprint", fingerprint_of(video)}});
      const auto r = denoise_eval(video, s.noise, s.model, s.train, s.model_seed, s.filter_window);
      std::vector<EvalRecord> records{r.nerv};
      EvalRecord noisy;
      noisy.label = "noisy_input";
      noisy.psnr = r.noisy_psnr;
      records.push_back(noisy);
      for (const auto& [kind, p] : r.filter_psnr) {
        EvalRecord f;
        f.label = std::string(to_string(kind)) + "_filter";
        f.psnr = p;
        records.push_back(f);
      }
      emit_csv(dn_out, dir, "denoise.csv", csv_text(records));
      return 0;
    }

    if (*ip) {
      const auto video = load_frames(ip_video);
      RunSettings s = settings_for(load_kv(ip_c), video);
      const std::string dir = make_run_dir(ip_c, "eval-interp");
      write_run_state(dir, s, "eval-interp", {{"video", ip_video}, {"fingerprint", fingerprint_of(video)}});
      const auto r = interpolation_eval(video, s.interp_stride, s.model, s.train, s.model_seed);
      EvalRecord seen = r.heldout;
      seen.label = "train_frames";
      seen.psnr = r.train_psnr;
      seen.ms_ssim = 0.0;
      emit_csv(ip_out, dir, "interp.csv", csv_text({seen, r.heldout}));
      return 0;
    }

    if (*ab) {
      const auto video = load_frames(ab_video);
      const auto axis = parse_ablation_axis(ab_axis);
      RunSettings s = settings_for(load_kv(ab_c), video);
      const std::size_t budget = s.param_budget > 0 ? s.param_budget : count_params(s.model);
      const std::string dir = make_run_dir(ab_c, "ablate");
      write_run_state(dir, s, "ablate",
                      {{"video", ab_video}, {"fingerprint", fingerprint_of(video)}, {"axis", ab_axis},
                       {"budget", std::to_string(budget)}});
      const auto records = ablation_sweep(video, axis, s.model, s.train, budget, s.model_seed);
      emit_csv(ab_out, dir, "ablation_" + ab_axis + ".csv", csv_text(records));
      return 0;
    }

    if (*bench) {
      const auto bytes = read_file(bench_in);
      const bool is_nrv = bytes.size() >= 4 && std::equal(bytes.begin(), bytes.begin() + 4, kNrvMagic);
      const NervModel model = is_nrv ? load_model(bytes) : decode_checkpoint(bytes).model;
      const auto r = benchmark_fps(model, bench_frames, bench_half ? Precision::half : Precision::full);
      std::printf("precision %s\nframes %d\nseconds %.4f\nfps %.3f\nhardware %s\n",
                  bench_half ? "half" : "full", r.frames, r.seconds, r.fps, r.hardware.c_str());
      return 0;
    }

    if (*syn) {
      VideoTensor v;
      if (syn_kind == "gradient") {
        v = synth_translating_gradient(syn_t, syn_h, syn_w);
      } else if (syn_kind == "disc") {
        v = synth_moving_disc(syn_t, syn_h, syn_w, syn_speed);
      } else {
        v = synth_static(syn_t, syn_h, syn_w);
      }
      save_frames(v.frames, syn_out);
      std::printf("wrote %d frames to %s\n", v.num_frames(), syn_out.c_str());
      return 0;
    }
  } catch (const nerv::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
