#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "pwg/tensor.hpp"

namespace pwg {

inline constexpr std::size_t kSampleRate = 24000;

// Floor added under the sqrt of |STFT| so the magnitude stays differentiable
// at zero; far below any audible signal energy.
inline constexpr double kMagnitudeEps = 1e-14;
// Floor inside the log of mel energies.
inline constexpr double kMelLogFloor = 1e-10;

// Mono waveform at the fixed 24 kHz project rate, amplitudes in [-1, 1].
struct AudioClip {
  std::vector<double> samples;
  std::size_t sample_rate_hz = kSampleRate;

  std::size_t size() const { return samples.size(); }
};

struct StftConfig {
  std::size_t fft_size = 1024;
  std::size_t win_size = 600;
  std::size_t hop = 120;

  void validate() const;  // win <= fft (power of two), hop <= win
};

struct MelConfig {
  std::size_t n_mels = 80;
  double f_min = 70.0;
  double f_max = 8000.0;
  std::size_t frame = 1200;  // 50 ms at 24 kHz
  std::size_t hop = 300;     // 12.5 ms
  std::size_t fft_size = 2048;

  void validate() const;
  StftConfig stft() const { return StftConfig{fft_size, frame, hop}; }
};

// Per-band normalization statistics over a training corpus.
struct FeatureStats {
  std::vector<double> mean;
  std::vector<double> stddev;
};

// RIFF PCM16 mono 24 kHz. Read maps samples as s/32768; write clamps to
// [-1, 1] and rounds half away from zero.
AudioClip read_wav(const std::string& path);
void write_wav(const std::string& path, const AudioClip& clip);

// Symmetric Hann window, w[n] = 0.5 (1 - cos(2 pi n / (N-1))).
std::vector<double> hann_window(std::size_t n);

// Hopped Hann-windowed frames zero-padded to fft_size.
// F = 1 + floor((len - win) / hop); frame f starts at sample f*hop.
Tensor frame_signal(const Tensor& x, const StftConfig& cfg);
Tensor frame_signal(const AudioClip& x, const StftConfig& cfg);

// |STFT| = sqrt(re^2 + im^2 + kMagnitudeEps), shape [F x (fft/2+1)].
// Differentiable end-to-end when x carries gradients.
Tensor stft_magnitude(const Tensor& x, const StftConfig& cfg);
Tensor stft_magnitude(const AudioClip& x, const StftConfig& cfg);

// Triangular mel filterbank, row-major [n_mels x (fft/2+1)].
// mel(f) = 2595 log10(1 + f/700); n_mels triangles spanning [f_min, f_max].
std::vector<double> mel_filterbank(const MelConfig& mc, std::size_t sample_rate = kSampleRate);
std::vector<double> mel_band_centers_hz(const MelConfig& mc);

// log(filterbank . |STFT| + kMelLogFloor), then per-band (v - mean)/stddev
// when stats are given. Shape [n_mels x F].
Tensor mel_spectrogram(const AudioClip& x, const MelConfig& mc,
                       const FeatureStats* stats = nullptr);

// Population mean/stddev per band over all frames of all clips. Bands with
// zero variance are flagged on stderr and floored at 1e-8.
FeatureStats compute_stats(const std::vector<AudioClip>& corpus, const MelConfig& mc);

// Flat binary: 8-byte magic "PWGSTAT1", 80 means then 80 stddevs, f64 LE.
void save_stats(const std::string& path, const FeatureStats& stats);
FeatureStats load_stats(const std::string& path);

// Mel feature file: 8-byte magic "PWGMEL01", u64 band count, u64 frame
// count, then band-major f64 LE data.
void save_mel(const std::string& path, const Tensor& mel);
Tensor load_mel(const std::string& path);

}  // namespace pwg
