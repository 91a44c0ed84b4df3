#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "pwg/dsp.hpp"
#include "pwg/losses.hpp"
#include "pwg/models.hpp"

namespace pwg {

struct OptimizerConfig {
  double eps = 1e-6;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double lr_g = 1e-4;
  double lr_d = 5e-5;
  std::uint64_t decay_half_every = 200000;

  void validate() const;
};

struct ScheduleConfig {
  std::uint64_t total_steps = 400000;
  std::uint64_t d_frozen_steps = 100000;
  std::size_t batch_size = 8;
  std::size_t clip_samples = 24000;
  double lambda_adv = 4.0;
  std::uint64_t seed = 42;
  std::uint64_t checkpoint_interval = 1000;

  void validate() const;
};

// Every tunable of the pipeline, one flat key=value namespace. The same keys
// appear in config files (one `key = value` per line, '#' comments) and as
// --key-with-dashes CLI flags; flags take precedence over file values.
struct RunConfig {
  // generator
  std::uint64_t g_layers = 30;
  std::uint64_t g_cycles = 3;
  std::uint64_t g_residual_channels = 64;
  std::uint64_t g_skip_channels = 64;
  std::uint64_t g_kernel = 3;
  std::uint64_t g_aux_channels = 80;
  std::uint64_t hop = 300;
  std::string upsample_factors;  // "" = derived from hop, else "5,5,4,3"
  // discriminator
  std::uint64_t d_layers = 10;
  std::uint64_t d_channels = 64;
  std::uint64_t d_kernel = 3;
  double d_leaky_alpha = 0.2;
  // conditioning features
  std::uint64_t n_mels = 80;
  double f_min = 70.0;
  double f_max = 8000.0;
  std::uint64_t mel_frame = 1200;
  std::uint64_t mel_fft = 2048;
  // losses: comma-separated fft:win:hop triples
  std::string stft_resolutions = "1024:600:120,2048:1200:240,512:240:50";
  double lambda_adv = 4.0;
  // optimizer
  double lr_g = 1e-4;
  double lr_d = 5e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-6;
  std::uint64_t decay_half_every = 200000;
  // schedule
  std::uint64_t total_steps = 400000;
  std::uint64_t d_frozen_steps = 100000;
  std::uint64_t batch_size = 8;
  std::uint64_t clip_samples = 24000;
  std::uint64_t seed = 42;
  std::uint64_t checkpoint_interval = 1000;

  static const std::vector<std::string>& keys();
  void set(const std::string& key, const std::string& value);  // rejects unknown keys
  std::string get(const std::string& key) const;
  // Ordered key=value lines, full echo.
  std::string echo() const;
  std::map<std::string, std::string> to_map() const;
  static RunConfig from_map(const std::map<std::string, std::string>& kv);

  GeneratorConfig generator() const;
  DiscriminatorConfig discriminator() const;
  MelConfig mel() const;
  MultiResConfig multi_res() const;
  OptimizerConfig optimizer() const;
  ScheduleConfig schedule() const;
  void validate() const;
};

// Parse `key = value` lines; '#' starts a comment, blank lines ignored.
std::map<std::string, std::string> parse_config_file(const std::string& path);

// Apply file values onto cfg (unknown keys rejected).
void apply_config_file(RunConfig& cfg, const std::string& path);

}  // namespace pwg
