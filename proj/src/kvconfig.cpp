#include "nerv/kvconfig.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "nerv/compression.hpp"
#include "nerv/error.hpp"

namespace nerv {

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const char* want) {
  throw InvalidConfig("config key '" + key + "': expected " + want + ", got '" + value + "'");
}

template <typename T>
T parse_number(const std::string& key, const std::string& v, const char* want) {
  T out{};
  const auto* end = v.data() + v.size();
  const auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || ptr != end) bad_value(key, v, want);
  return out;
}

}  // namespace

KvConfig KvConfig::parse(std::string_view text, std::string_view source) {
  KvConfig kv;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    line = trim(line);
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    const auto key = eq == std::string_view::npos ? std::string_view{} : trim(line.substr(0, eq));
    if (key.empty()) {
      throw InvalidConfig(std::string(source) + ":" + std::to_string(line_no) +
                          ": expected 'key = value'");
    }
    kv.values_[std::string(key)] = std::string(trim(line.substr(eq + 1)));
  }
  return kv;
}

KvConfig KvConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), path);
}

void KvConfig::set(const std::string& key, const std::string& value) { values_[key] = value; }

void KvConfig::apply_override(std::string_view assignment) {
  const auto eq = assignment.find('=');
  const auto key = eq == std::string_view::npos ? std::string_view{} : trim(assignment.substr(0, eq));
  if (key.empty()) {
    throw InvalidConfig("override '" + std::string(assignment) + "' is not key=value");
  }
  values_[std::string(key)] = std::string(trim(assignment.substr(eq + 1)));
}

std::string KvConfig::get_string(const std::string& key, const std::string& fallback) const {
  auto it = values_.find(key);
  return it == values_.end() ? fallback : it->second;
}

long long KvConfig::get_int(const std::string& key, long long fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  return parse_number<long long>(key, it->second, "an integer");
}

double KvConfig::get_double(const std::string& key, double fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  return parse_number<double>(key, it->second, "a number");
}

bool KvConfig::get_bool(const std::string& key, bool fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  const auto& v = it->second;
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  bad_value(key, v, "a boolean");
}

std::vector<int> KvConfig::get_int_list(const std::string& key,
                                        const std::vector<int>& fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  std::vector<int> out;
  std::string_view rest = it->second;
  while (!rest.empty()) {
    const auto comma = rest.find(',');
    const std::string item(trim(rest.substr(0, comma)));
    out.push_back(parse_number<int>(key, item, "a comma-separated integer list"));
    rest = comma == std::string_view::npos ? std::string_view{} : rest.substr(comma + 1);
  }
  if (out.empty()) bad_value(key, it->second, "a non-empty integer list");
  return out;
}

std::string KvConfig::to_text() const {
  std::string out;
  for (const auto& [k, v] : values_) out += k + " = " + v + "\n";
  return out;
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace {

const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys{
      "embed_base", "embed_length", "embedding", "upscale_factors", "stem_channels",
      "block_channels", "mlp_hidden", "activation", "norm", "upscale_mode", "conv_kernel",
      "height", "width", "frame_count", "param_budget", "model_seed", "epochs",
      "warmup_epochs", "lr", "batch_size", "loss_alpha", "loss_terms", "train_seed",
      "checkpoint_every", "track_ms_ssim", "prune_q", "quant_bit", "finetune_epochs",
      "finetune_warmup_epochs", "finetune_lr", "noise_pattern", "noise_density", "noise_seed",
      "filter_window", "interp_stride", "workers"};
  return keys;
}

int to_int(long long v, const std::string& key) {
  if (v < INT32_MIN || v > INT32_MAX) throw InvalidConfig("config key '" + key + "' out of range");
  return static_cast<int>(v);
}

}  // namespace

RunSettings resolve_settings(const KvConfig& kv) {
  for (const auto& [k, v] : kv.values()) {
    if (!known_keys().count(k)) throw InvalidConfig("unknown config key '" + k + "'");
  }
  RunSettings s;
  auto& m = s.model;
  auto i = [&](const char* key, int fallback) { return to_int(kv.get_int(key, fallback), key); };
  m.embed_base = kv.get_double("embed_base", m.embed_base);
  m.embed_length = i("embed_length", m.embed_length);
  m.embedding = parse_embedding(kv.get_string("embedding", std::string(to_string(m.embedding))));
  m.upscale_factors = kv.get_int_list("upscale_factors", m.upscale_factors);
  m.stem_channels = i("stem_channels", m.stem_channels);
  m.block_channels = i("block_channels", m.block_channels);
  m.mlp_hidden = i("mlp_hidden", m.mlp_hidden);
  m.activation = parse_activation(kv.get_string("activation", std::string(to_string(m.activation))));
  m.norm = parse_norm(kv.get_string("norm", std::string(to_string(m.norm))));
  m.upscale_mode =
      parse_upscale_mode(kv.get_string("upscale_mode", std::string(to_string(m.upscale_mode))));
  m.conv_kernel = i("conv_kernel", m.conv_kernel);
  m.height = i("height", m.height);
  m.width = i("width", m.width);
  m.frame_count = i("frame_count", m.frame_count);
  const long long budget = kv.get_int("param_budget", 0);
  if (budget < 0) throw InvalidConfig("param_budget must be >= 0");
  s.param_budget = static_cast<std::size_t>(budget);
  s.model_seed = static_cast<std::uint64_t>(kv.get_int("model_seed", 0));

  auto& t = s.train;
  t.epochs = i("epochs", t.epochs);
  // Without an explicit warmup, warm up over the first fifth of training.
  t.warmup_epochs = i("warmup_epochs", t.epochs / 5);
  t.base_lr = kv.get_double("lr", t.base_lr);
  t.batch_size = i("batch_size", t.batch_size);
  t.loss.alpha = kv.get_double("loss_alpha", t.loss.alpha);
  t.loss.terms = parse_loss_terms(kv.get_string("loss_terms", to_string(t.loss.terms)));
  t.seed = static_cast<std::uint64_t>(kv.get_int("train_seed", 0));
  t.checkpoint_every = i("checkpoint_every", t.checkpoint_every);
  t.track_ms_ssim = kv.get_bool("track_ms_ssim", t.track_ms_ssim);
  // checkpoint_dir is supplied by the run directory, so skip that check here.
  TrainConfig check = t;
  check.checkpoint_every = 0;
  validate(check);
  if (t.checkpoint_every < 0) throw InvalidConfig("checkpoint_every must be >= 0");

  s.prune_q = kv.get_double("prune_q", s.prune_q);
  if (!(s.prune_q >= 0.0 && s.prune_q < 1.0)) throw InvalidConfig("prune_q must lie in [0, 1)");
  s.quant_bit = i("quant_bit", s.quant_bit);
  if (!((s.quant_bit >= 1 && s.quant_bit <= 16) || s.quant_bit == kBypassBits)) {
    throw InvalidConfig("quant_bit must be 1..16 or 32");
  }
  s.finetune = finetune_config(t.seed);
  s.finetune.loss = t.loss;
  s.finetune.batch_size = t.batch_size;
  s.finetune.track_ms_ssim = t.track_ms_ssim;
  s.finetune.epochs = i("finetune_epochs", s.finetune.epochs);
  s.finetune.warmup_epochs = i("finetune_warmup_epochs", s.finetune.epochs / 5);
  s.finetune.base_lr = kv.get_double("finetune_lr", s.finetune.base_lr);
  validate(s.finetune);

  s.noise.pattern =
      parse_noise_pattern(kv.get_string("noise_pattern", std::string(to_string(s.noise.pattern))));
  s.noise.density = kv.get_double("noise_density", s.noise.density);
  if (!(s.noise.density >= 0.0 && s.noise.density <= 1.0)) {
    throw InvalidConfig("noise_density must lie in [0, 1]");
  }
  s.noise.seed = static_cast<std::uint64_t>(kv.get_int("noise_seed", 0));
  s.filter_window = i("filter_window", s.filter_window);
  if (s.filter_window < 3 || s.filter_window % 2 == 0) {
    throw InvalidConfig("filter_window must be odd and >= 3");
  }
  s.interp_stride = i("interp_stride", s.interp_stride);
  if (s.interp_stride < 2) throw InvalidConfig("interp_stride must be >= 2");
  s.workers = i("workers", s.workers);
  if (s.workers < 1) throw InvalidConfig("workers must be >= 1");
  return s;
}

KvConfig settings_snapshot(const RunSettings& s) {
  KvConfig kv;
  const auto& m = s.model;
  std::string factors;
  for (std::size_t k = 0; k < m.upscale_factors.size(); ++k) {
    factors += (k ? "," : "") + std::to_string(m.upscale_factors[k]);
  }
  kv.set("embed_base", format_double(m.embed_base));
  kv.set("embed_length", std::to_string(m.embed_length));
  kv.set("embedding", std::string(to_string(m.embedding)));
  kv.set("upscale_factors", factors);
  kv.set("stem_channels", std::to_string(m.stem_channels));
  kv.set("block_channels", std::to_string(m.block_channels));
  kv.set("mlp_hidden", std::to_string(m.mlp_hidden));
  kv.set("activation", std::string(to_string(m.activation)));
  kv.set("norm", std::string(to_string(m.norm)));
  kv.set("upscale_mode", std::string(to_string(m.upscale_mode)));
  kv.set("conv_kernel", std::to_string(m.conv_kernel));
  kv.set("height", std::to_string(m.height));
  kv.set("width", std::to_string(m.width));
  kv.set("frame_count", std::to_string(m.frame_count));
  kv.set("param_budget", std::to_string(s.param_budget));
  kv.set("model_seed", std::to_string(s.model_seed));
  const auto& t = s.train;
  kv.set("epochs", std::to_string(t.epochs));
  kv.set("warmup_epochs", std::to_string(t.warmup_epochs));
  kv.set("lr", format_double(t.base_lr));
  kv.set("batch_size", std::to_string(t.batch_size));
  kv.set("loss_alpha", format_double(t.loss.alpha));
  kv.set("loss_terms", to_string(t.loss.terms));
  kv.set("train_seed", std::to_string(t.seed));
  kv.set("checkpoint_every", std::to_string(t.checkpoint_every));
  kv.set("track_ms_ssim", t.track_ms_ssim ? "true" : "false");
  kv.set("prune_q", format_double(s.prune_q));
  kv.set("quant_bit", std::to_string(s.quant_bit));
  kv.set("finetune_epochs", std::to_string(s.finetune.epochs));
  kv.set("finetune_warmup_epochs", std::to_string(s.finetune.warmup_epochs));
  kv.set("finetune_lr", format_double(s.finetune.base_lr));
  kv.set("noise_pattern", std::string(to_string(s.noise.pattern)));
  kv.set("noise_density", format_double(s.noise.density));
  kv.set("noise_seed", std::to_string(s.noise.seed));
  kv.set("filter_window", std::to_string(s.filter_window));
  kv.set("interp_stride", std::to_string(s.interp_stride));
  kv.set("workers", std::to_string(s.workers));
  return kv;
}

}  // namespace nerv
