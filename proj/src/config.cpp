#include "pwg/config.hpp"

#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>

#include "pwg/common.hpp"

namespace pwg {

void OptimizerConfig::validate() const {
  if (!(lr_g > 0.0) || !(lr_d > 0.0)) throw ConfigError("optimizer: learning rates must be > 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0))
    throw ConfigError("optimizer: betas must be in [0, 1)");
  if (!(eps > 0.0)) throw ConfigError("optimizer: eps must be > 0");
  if (decay_half_every == 0) throw ConfigError("optimizer: decay_half_every must be > 0");
}

void ScheduleConfig::validate() const {
  if (d_frozen_steps > total_steps)
    throw ConfigError("schedule: d_frozen_steps must not exceed total_steps");
  if (batch_size == 0) throw ConfigError("schedule: batch_size must be positive");
  if (clip_samples == 0) throw ConfigError("schedule: clip_samples must be positive");
  if (lambda_adv < 0.0) throw ConfigError("schedule: lambda_adv must be >= 0");
}

namespace {

std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

double parse_double(const std::string& key, const std::string& s) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config: invalid numeric value for " + key + ": '" + s + "'");
  }
}

std::uint64_t parse_u64(const std::string& key, const std::string& s) {
  try {
    std::size_t pos = 0;
    const unsigned long long v = std::stoull(s, &pos);
    if (pos != s.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config: invalid integer value for " + key + ": '" + s + "'");
  }
}

struct KeyEntry {
  const char* name;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&)> set;
};

#define PWG_KEY_U64(field)                                                         \
  KeyEntry {                                                                       \
    #field, [](const RunConfig& c) { return std::to_string(c.field); },            \
        [](RunConfig& c, const std::string& v) { c.field = parse_u64(#field, v); } \
  }
#define PWG_KEY_F64(field)                                                            \
  KeyEntry {                                                                          \
    #field, [](const RunConfig& c) { return fmt_double(c.field); },                   \
        [](RunConfig& c, const std::string& v) { c.field = parse_double(#field, v); } \
  }
#define PWG_KEY_STR(field)                                               \
  KeyEntry {                                                             \
    #field, [](const RunConfig& c) { return c.field; },                  \
        [](RunConfig& c, const std::string& v) { c.field = v; }          \
  }

const std::vector<KeyEntry>& key_table() {
  static const std::vector<KeyEntry> table = {
      PWG_KEY_U64(g_layers),
      PWG_KEY_U64(g_cycles),
      PWG_KEY_U64(g_residual_channels),
      PWG_KEY_U64(g_skip_channels),
      PWG_KEY_U64(g_kernel),
      PWG_KEY_U64(g_aux_channels),
      PWG_KEY_U64(hop),
      PWG_KEY_STR(upsample_factors),
      PWG_KEY_U64(d_layers),
      PWG_KEY_U64(d_channels),
      PWG_KEY_U64(d_kernel),
      PWG_KEY_F64(d_leaky_alpha),
      PWG_KEY_U64(n_mels),
      PWG_KEY_F64(f_min),
      PWG_KEY_F64(f_max),
      PWG_KEY_U64(mel_frame),
      PWG_KEY_U64(mel_fft),
      PWG_KEY_STR(stft_resolutions),
      PWG_KEY_F64(lambda_adv),
      PWG_KEY_F64(lr_g),
      PWG_KEY_F64(lr_d),
      PWG_KEY_F64(beta1),
      PWG_KEY_F64(beta2),
      PWG_KEY_F64(eps),
      PWG_KEY_U64(decay_half_every),
      PWG_KEY_U64(total_steps),
      PWG_KEY_U64(d_frozen_steps),
      PWG_KEY_U64(batch_size),
      PWG_KEY_U64(clip_samples),
      PWG_KEY_U64(seed),
      PWG_KEY_U64(checkpoint_interval),
  };
  return table;
}

#undef PWG_KEY_U64
#undef PWG_KEY_F64
#undef PWG_KEY_STR

const KeyEntry* find_key(const std::string& key) {
  for (const auto& e : key_table()) {
    if (key == e.name) return &e;
  }
  return nullptr;
}

std::vector<std::size_t> parse_size_list(const std::string& key, const std::string& s,
                                         char sep) {
  std::vector<std::size_t> out;
  std::string item;
  std::stringstream ss(s);
  while (std::getline(ss, item, sep)) {
    out.push_back(parse_u64(key, item));
  }
  return out;
}

}  // namespace

const std::vector<std::string>& RunConfig::keys() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> v;
    for (const auto& e : key_table()) v.push_back(e.name);
    return v;
  }();
  return names;
}

void RunConfig::set(const std::string& key, const std::string& value) {
  const KeyEntry* e = find_key(key);
  if (e == nullptr) throw ConfigError("config: unknown key '" + key + "'");
  e->set(*this, value);
}

std::string RunConfig::get(const std::string& key) const {
  const KeyEntry* e = find_key(key);
  if (e == nullptr) throw ConfigError("config: unknown key '" + key + "'");
  return e->get(*this);
}

std::string RunConfig::echo() const {
  std::string out;
  for (const auto& e : key_table()) {
    out += e.name;
    out += " = ";
    out += e.get(*this);
    out += '\n';
  }
  return out;
}

std::map<std::string, std::string> RunConfig::to_map() const {
  std::map<std::string, std::string> kv;
  for (const auto& e : key_table()) kv[e.name] = e.get(*this);
  return kv;
}

RunConfig RunConfig::from_map(const std::map<std::string, std::string>& kv) {
  RunConfig cfg;
  for (const auto& [k, v] : kv) cfg.set(k, v);
  return cfg;
}

GeneratorConfig RunConfig::generator() const {
  GeneratorConfig g;
  g.layers = g_layers;
  g.cycles = g_cycles;
  g.residual_channels = g_residual_channels;
  g.skip_channels = g_skip_channels;
  g.kernel = g_kernel;
  g.aux_channels = g_aux_channels;
  g.hop = hop;
  if (!upsample_factors.empty())
    g.upsample_factors = parse_size_list("upsample_factors", upsample_factors, ',');
  return g;
}

DiscriminatorConfig RunConfig::discriminator() const {
  DiscriminatorConfig d;
  d.layers = d_layers;
  d.channels = d_channels;
  d.kernel = d_kernel;
  d.leaky_alpha = d_leaky_alpha;
  return d;
}

MelConfig RunConfig::mel() const {
  MelConfig m;
  m.n_mels = n_mels;
  m.f_min = f_min;
  m.f_max = f_max;
  m.frame = mel_frame;
  m.hop = hop;
  m.fft_size = mel_fft;
  return m;
}

MultiResConfig RunConfig::multi_res() const {
  MultiResConfig mrc;
  std::string item;
  std::stringstream ss(stft_resolutions);
  while (std::getline(ss, item, ',')) {
    const auto parts = parse_size_list("stft_resolutions", item, ':');
    if (parts.size() != 3)
      throw ConfigError("config: stft_resolutions entries must be fft:win:hop");
    mrc.resolutions.push_back(StftConfig{parts[0], parts[1], parts[2]});
  }
  return mrc;
}

OptimizerConfig RunConfig::optimizer() const {
  OptimizerConfig oc;
  oc.eps = eps;
  oc.beta1 = beta1;
  oc.beta2 = beta2;
  oc.lr_g = lr_g;
  oc.lr_d = lr_d;
  oc.decay_half_every = decay_half_every;
  return oc;
}

ScheduleConfig RunConfig::schedule() const {
  ScheduleConfig sc;
  sc.total_steps = total_steps;
  sc.d_frozen_steps = d_frozen_steps;
  sc.batch_size = batch_size;
  sc.clip_samples = clip_samples;
  sc.lambda_adv = lambda_adv;
  sc.seed = seed;
  sc.checkpoint_interval = checkpoint_interval;
  return sc;
}

void RunConfig::validate() const {
  generator().validate();
  discriminator().validate();
  mel().validate();
  multi_res().validate();
  optimizer().validate();
  schedule().validate();
  if (g_aux_channels != n_mels)
    throw ConfigError("config: g_aux_channels must equal n_mels");
  if (clip_samples % hop != 0)
    throw ConfigError("config: clip_samples must be a multiple of hop");
}

std::map<std::string, std::string> parse_config_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw DataError("config: cannot open " + path);
  std::map<std::string, std::string> kv;
  std::string line;
  std::size_t lineno = 0;
  auto trim = [](std::string s) {
    const char* ws = " \t\r\n";
    const auto a = s.find_first_not_of(ws);
    if (a == std::string::npos) return std::string();
    const auto b = s.find_last_not_of(ws);
    return s.substr(a, b - a + 1);
  };
  while (std::getline(f, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config: missing '=' at " + path + ":" + std::to_string(lineno));
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty())
      throw ConfigError("config: empty key at " + path + ":" + std::to_string(lineno));
    kv[key] = value;
  }
  return kv;
}

void apply_config_file(RunConfig& cfg, const std::string& path) {
  for (const auto& [k, v] : parse_config_file(path)) cfg.set(k, v);
}

}  // namespace pwg
