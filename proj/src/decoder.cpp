#include "nerv/decoder.hpp"

#include <algorithm>
#include <chrono>
#include <exception>
#include <fstream>
#include <thread>

#include <Eigen/Core>

#include "nerv/bitstream.hpp"
#include "nerv/compression.hpp"
#include "nerv/error.hpp"

namespace nerv {

NervModel load_model(std::span<const std::uint8_t> bytes) {
  return dequantize_model(deserialize(bytes));
}

NervModel load_model_file(const std::string& path) { return load_model(read_file(path)); }

namespace {

Image decode_one(NervNetwork<float>& net, const NervModel& model, int index,
                 const ForwardOptions& options, std::vector<float>& buf) {
  const double t[1] = {frame_timestamp(index, model.config.frame_count)};
  net.forward(t, false, buf, nullptr, options);
  return Image({3, static_cast<std::size_t>(model.config.height),
                static_cast<std::size_t>(model.config.width)},
               buf);
}

}  // namespace

std::vector<Image> decode_frames(const NervModel& model, std::span<const int> indices, int workers,
                                 const ForwardOptions& options) {
  for (int i : indices) frame_timestamp(i, model.config.frame_count);  // range check
  if (workers < 1) throw InvalidConfig("workers must be >= 1");
  std::vector<Image> out(indices.size());
  workers = std::min<int>(workers, std::max<std::size_t>(indices.size(), 1));

  auto run = [&](int w) {
    NervNetwork<float> net(model.config, model.params);
    std::vector<float> buf;
    for (std::size_t k = w; k < indices.size(); k += workers) {
      out[k] = decode_one(net, model, indices[k], options, buf);
    }
  };
  if (workers == 1) {
    run(0);
    return out;
  }
  std::vector<std::exception_ptr> errors(workers);
  std::vector<std::thread> threads;
  for (int w = 0; w < workers; ++w) {
    threads.emplace_back([&, w] {
      try {
        run(w);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : threads) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

FpsReport benchmark_fps(const NervModel& model, int n_frames, Precision precision) {
  if (n_frames < 1) throw InvalidConfig("n_frames must be >= 1");
  ForwardOptions options;
  options.half_precision = precision == Precision::half;
  NervNetwork<float> net(model.config, model.params);
  std::vector<float> buf;
  const auto t0 = std::chrono::steady_clock::now();
  for (int i = 0; i < n_frames; ++i) {
    decode_one(net, model, i % model.config.frame_count, options, buf);
  }
  FpsReport r;
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  r.frames = n_frames;
  r.fps = n_frames / std::max(r.seconds, 1e-9);
  r.hardware = hardware_descriptor();
  return r;
}

std::string hardware_descriptor() {
  std::string cpu = "unknown cpu";
  std::ifstream info("/proc/cpuinfo");
  for (std::string line; std::getline(info, line);) {
    if (line.rfind("model name", 0) == 0) {
      const auto colon = line.find(':');
      if (colon != std::string::npos) cpu = line.substr(colon + 2);
      break;
    }
  }
  return cpu + ", " + std::to_string(std::thread::hardware_concurrency()) + " threads, " +
         Eigen::SimdInstructionSetsInUse();
}

}  // namespace nerv
