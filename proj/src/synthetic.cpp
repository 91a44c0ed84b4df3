#include "pwg/synthetic.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "pwg/common.hpp"

namespace pwg {

AudioClip make_synthetic_clip(Rng& rng) {
  const double dur = rng.uniform(1.0, 3.0);
  const auto n = static_cast<std::size_t>(std::lround(dur * kSampleRate));
  const std::size_t tones = 1 + rng.uniform_index(4);

  struct Tone {
    double freq, phase, amp, decay;
  };
  std::vector<Tone> partials(tones);
  for (auto& t : partials) {
    t.freq = rng.uniform(80.0, 7000.0);
    t.phase = rng.uniform(0.0, 6.283185307179586476925287);
    t.amp = rng.uniform(0.1, 0.6);
    t.decay = rng.uniform(0.3, 2.0);  // envelope time constant, seconds
  }

  AudioClip clip;
  clip.samples.assign(n, 0.0);
  for (const auto& t : partials) {
    const double w = 6.283185307179586476925287 * t.freq / kSampleRate;
    const double k = 1.0 / (t.decay * kSampleRate);
    for (std::size_t i = 0; i < n; ++i) {
      clip.samples[i] += t.amp * std::exp(-static_cast<double>(i) * k) *
                         std::sin(w * static_cast<double>(i) + t.phase);
    }
  }
  constexpr double kNoiseLevel = 0.003;
  for (auto& s : clip.samples) s += kNoiseLevel * rng.gaussian();

  double peak = 0.0;
  for (double s : clip.samples) peak = std::max(peak, std::fabs(s));
  if (peak > 0.95) {
    const double scale = 0.95 / peak;
    for (auto& s : clip.samples) s *= scale;
  }
  return clip;
}

std::vector<std::string> generate_corpus(const std::string& out_dir, double minutes,
                                         std::uint64_t seed) {
  if (!(minutes > 0.0)) throw ConfigError("gen-corpus: minutes must be positive");
  std::filesystem::create_directories(out_dir);
  const auto target = static_cast<std::size_t>(minutes * 60.0 * kSampleRate);
  std::vector<std::string> paths;
  std::size_t total = 0;
  for (std::size_t i = 0; total < target; ++i) {
    Rng rng = Rng::derive(seed, i);
    const AudioClip clip = make_synthetic_clip(rng);
    char name[32];
    std::snprintf(name, sizeof(name), "clip_%04zu.wav", i);
    const std::string path = out_dir + "/" + name;
    write_wav(path, clip);
    total += clip.size();
    paths.push_back(path);
  }
  return paths;
}

}  // namespace pwg
