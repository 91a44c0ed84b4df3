#include "pwg/dsp.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>

#include "pwg/common.hpp"
#include "fft.hpp"
#include "fastmath.hpp"
#include "reduce.hpp"
#include "tensor_impl.hpp"

namespace pwg {

void StftConfig::validate() const {
  if (!detail::is_pow2(fft_size)) throw ConfigError("stft: fft_size must be a power of two");
  if (win_size == 0 || win_size > fft_size)
    throw ConfigError("stft: need 0 < win_size <= fft_size");
  if (hop == 0 || hop > win_size) throw ConfigError("stft: need 0 < hop <= win_size");
}

void MelConfig::validate() const {
  stft().validate();
  if (n_mels == 0) throw ConfigError("mel: n_mels must be positive");
  if (!(f_min < f_max)) throw ConfigError("mel: need f_min < f_max");
  if (f_max > static_cast<double>(kSampleRate) / 2.0)
    throw ConfigError("mel: f_max above Nyquist");
}

// ---------------------------------------------------------------------------
// WAV I/O

namespace {

std::uint32_t rd_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}
std::uint16_t rd_u16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}
void wr_u32(std::vector<unsigned char>& v, std::uint32_t x) {
  v.push_back(static_cast<unsigned char>(x & 0xff));
  v.push_back(static_cast<unsigned char>((x >> 8) & 0xff));
  v.push_back(static_cast<unsigned char>((x >> 16) & 0xff));
  v.push_back(static_cast<unsigned char>((x >> 24) & 0xff));
}
void wr_u16(std::vector<unsigned char>& v, std::uint16_t x) {
  v.push_back(static_cast<unsigned char>(x & 0xff));
  v.push_back(static_cast<unsigned char>((x >> 8) & 0xff));
}

}  // namespace

AudioClip read_wav(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("wav: cannot open " + path);
  std::vector<unsigned char> buf((std::istreambuf_iterator<char>(f)),
                                 std::istreambuf_iterator<char>());
  if (buf.size() < 12 || std::memcmp(buf.data(), "RIFF", 4) != 0 ||
      std::memcmp(buf.data() + 8, "WAVE", 4) != 0) {
    throw DataError("wav: not a RIFF/WAVE file: " + path);
  }
  bool have_fmt = false;
  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  const unsigned char* data = nullptr;
  std::uint32_t data_len = 0;
  std::size_t pos = 12;
  while (pos + 8 <= buf.size()) {
    const char* id = reinterpret_cast<const char*>(buf.data() + pos);
    const std::uint32_t len = rd_u32(buf.data() + pos + 4);
    pos += 8;
    if (pos + len > buf.size()) throw DataError("wav: truncated chunk in " + path);
    if (std::memcmp(id, "fmt ", 4) == 0) {
      if (len < 16) throw DataError("wav: malformed fmt chunk in " + path);
      format = rd_u16(buf.data() + pos);
      channels = rd_u16(buf.data() + pos + 2);
      rate = rd_u32(buf.data() + pos + 4);
      bits = rd_u16(buf.data() + pos + 14);
      have_fmt = true;
    } else if (std::memcmp(id, "data", 4) == 0) {
      data = buf.data() + pos;
      data_len = len;
    }
    pos += len + (len & 1);  // chunks are word-aligned
  }
  if (!have_fmt || data == nullptr) throw DataError("wav: missing fmt/data chunk in " + path);
  if (format != 1 || bits != 16)
    throw DataError("wav: expected PCM16, got format " + std::to_string(format) + "/" +
                    std::to_string(bits) + " bits in " + path);
  if (channels != 1)
    throw DataError("wav: expected 1 channel, got " + std::to_string(channels) + " in " + path);
  if (rate != kSampleRate)
    throw DataError("wav: expected " + std::to_string(kSampleRate) + " Hz, got " +
                    std::to_string(rate) + " in " + path);
  AudioClip clip;
  const std::size_t n = data_len / 2;
  clip.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto u = static_cast<std::uint16_t>(data[2 * i] | (data[2 * i + 1] << 8));
    const auto s = static_cast<std::int16_t>(u);
    clip.samples[i] = static_cast<double>(s) / 32768.0;
  }
  return clip;
}

void write_wav(const std::string& path, const AudioClip& clip) {
  if (clip.sample_rate_hz != kSampleRate)
    throw DataError("wav: clip sample rate must be 24000");
  const std::size_t n = clip.size();
  std::vector<unsigned char> out;
  out.reserve(44 + 2 * n);
  out.insert(out.end(), {'R', 'I', 'F', 'F'});
  wr_u32(out, static_cast<std::uint32_t>(36 + 2 * n));
  out.insert(out.end(), {'W', 'A', 'V', 'E', 'f', 'm', 't', ' '});
  wr_u32(out, 16);
  wr_u16(out, 1);  // PCM
  wr_u16(out, 1);  // mono
  wr_u32(out, kSampleRate);
  wr_u32(out, kSampleRate * 2);  // byte rate
  wr_u16(out, 2);                // block align
  wr_u16(out, 16);               // bits
  out.insert(out.end(), {'d', 'a', 't', 'a'});
  wr_u32(out, static_cast<std::uint32_t>(2 * n));
  for (std::size_t i = 0; i < n; ++i) {
    double v = clip.samples[i];
    v = std::min(1.0, std::max(-1.0, v));
    // round half away from zero, then clamp 32768 -> 32767
    long q = std::lround(v * 32768.0);
    q = std::min<long>(32767, std::max<long>(-32768, q));
    wr_u16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(q)));
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw DataError("wav: cannot write " + path);
  f.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
  if (!f) throw DataError("wav: short write to " + path);
}

// ---------------------------------------------------------------------------
// Framing and spectra

std::vector<double> hann_window(std::size_t n) {
  if (n < 2) throw ConfigError("hann_window: need n >= 2");
  std::vector<double> w(n);
  const double denom = static_cast<double>(n - 1);
  for (std::size_t i = 0; i < n; ++i) {
    w[i] = 0.5 * (1.0 - std::cos(6.283185307179586476925287 * static_cast<double>(i) / denom));
  }
  return w;
}

Tensor frame_signal(const Tensor& x, const StftConfig& cfg) {
  cfg.validate();
  if (x.dim() != 1) throw std::invalid_argument("frame_signal: signal must be 1-D");
  if (x.numel() < cfg.win_size)
    throw std::invalid_argument("frame_signal: signal shorter than one window");
  return frame_windowed(x, cfg.win_size, cfg.hop, cfg.fft_size, hann_window(cfg.win_size));
}

Tensor frame_signal(const AudioClip& x, const StftConfig& cfg) {
  NoGradGuard ng;
  return frame_signal(Tensor::from_data({x.size()}, x.samples), cfg);
}

Tensor stft_magnitude(const Tensor& x, const StftConfig& cfg) {
  Tensor frames = frame_signal(x, cfg);
  RdftOutput spec = rdft(frames);
  return sqrt(add_scalar(add(square(spec.re), square(spec.im)), kMagnitudeEps));
}

Tensor stft_magnitude(const AudioClip& x, const StftConfig& cfg) {
  NoGradGuard ng;
  return stft_magnitude(Tensor::from_data({x.size()}, x.samples), cfg);
}

// ---------------------------------------------------------------------------
// Mel features

namespace {
double hz_to_mel(double f) { return 2595.0 * std::log10(1.0 + f / 700.0); }
}  // namespace

std::vector<double> mel_band_centers_hz(const MelConfig& mc) {
  mc.validate();
  const double lo = hz_to_mel(mc.f_min), hi = hz_to_mel(mc.f_max);
  std::vector<double> centers(mc.n_mels);
  for (std::size_t m = 1; m <= mc.n_mels; ++m) {
    const double mel = lo + (hi - lo) * static_cast<double>(m) /
                                static_cast<double>(mc.n_mels + 1);
    centers[m - 1] = 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0);
  }
  return centers;
}

std::vector<double> mel_filterbank(const MelConfig& mc, std::size_t sample_rate) {
  mc.validate();
  const std::size_t bins = mc.fft_size / 2 + 1;
  const double lo = hz_to_mel(mc.f_min), hi = hz_to_mel(mc.f_max);
  std::vector<double> pts(mc.n_mels + 2);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    pts[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(mc.n_mels + 1);
  }
  std::vector<double> fb(mc.n_mels * bins, 0.0);
  for (std::size_t k = 0; k < bins; ++k) {
    const double f = static_cast<double>(k) * static_cast<double>(sample_rate) /
                     static_cast<double>(mc.fft_size);
    const double mel = hz_to_mel(f);
    for (std::size_t m = 0; m < mc.n_mels; ++m) {
      const double l = pts[m], c = pts[m + 1], r = pts[m + 2];
      double w = std::min((mel - l) / (c - l), (r - mel) / (r - c));
      w = std::max(0.0, w);
      fb[m * bins + k] = w;
    }
  }
  for (std::size_t m = 0; m < mc.n_mels; ++m) {
    bool any = false;
    for (std::size_t k = 0; k < bins; ++k) any |= fb[m * bins + k] > 0.0;
    if (!any)
      throw ConfigError("mel_filterbank: band " + std::to_string(m) +
                        " has no positive weight; increase fft_size");
  }
  return fb;
}

Tensor mel_spectrogram(const AudioClip& x, const MelConfig& mc, const FeatureStats* stats) {
  mc.validate();
  if (x.size() < mc.frame)
    throw std::invalid_argument("mel_spectrogram: clip shorter than one frame");
  if (stats != nullptr) {
    if (stats->mean.size() != mc.n_mels || stats->stddev.size() != mc.n_mels)
      throw std::invalid_argument("mel_spectrogram: stats band count mismatch");
    for (double s : stats->stddev)
      if (!(s > 0.0)) throw NumericError("mel_spectrogram: stats stddev must be positive");
  }
  NoGradGuard ng;
  Tensor mag = stft_magnitude(x, mc.stft());  // [F x bins]
  const std::size_t frames = mag.extent(0), bins = mag.extent(1);
  const std::vector<double> fb = mel_filterbank(mc);
  std::vector<double> out(mc.n_mels * frames);
  const double* mg = mag.data().data();
  for (std::size_t m = 0; m < mc.n_mels; ++m) {
    const double* fbrow = fb.data() + m * bins;
    for (std::size_t f = 0; f < frames; ++f) {
      const double e = detail::det_dot(fbrow, mg + f * bins, bins);
      double v = detail::fast_log(e + kMelLogFloor);
      if (stats != nullptr) v = (v - stats->mean[m]) / stats->stddev[m];
      out[m * frames + f] = v;
    }
  }
  return Tensor::from_data({mc.n_mels, frames}, std::move(out));
}

FeatureStats compute_stats(const std::vector<AudioClip>& corpus, const MelConfig& mc) {
  if (corpus.empty()) throw DataError("compute_stats: empty corpus");
  mc.validate();
  std::vector<double> sum(mc.n_mels, 0.0), sumsq(mc.n_mels, 0.0);
  std::size_t count = 0;
  for (const auto& clip : corpus) {
    Tensor mel = mel_spectrogram(clip, mc);
    const std::size_t frames = mel.extent(1);
    const double* d = mel.data().data();
    for (std::size_t m = 0; m < mc.n_mels; ++m) {
      for (std::size_t f = 0; f < frames; ++f) {
        const double v = d[m * frames + f];
        sum[m] += v;
        sumsq[m] += v * v;
      }
    }
    count += frames;
  }
  FeatureStats st;
  st.mean.resize(mc.n_mels);
  st.stddev.resize(mc.n_mels);
  const double n = static_cast<double>(count);
  for (std::size_t m = 0; m < mc.n_mels; ++m) {
    const double mean = sum[m] / n;
    double var = sumsq[m] / n - mean * mean;
    var = std::max(0.0, var);
    double sd = std::sqrt(var);
    if (sd < 1e-8) {
      std::fprintf(stderr, "compute_stats: band %zu has near-zero variance; flooring std\n", m);
      sd = 1e-8;
    }
    st.mean[m] = mean;
    st.stddev[m] = sd;
  }
  return st;
}

// ---------------------------------------------------------------------------
// Stats persistence: "PWGSTAT1" + 80 means + 80 stddevs, f64 LE.

namespace {
constexpr char kStatsMagic[8] = {'P', 'W', 'G', 'S', 'T', 'A', 'T', '1'};
constexpr std::size_t kStatsBands = 80;
}  // namespace

void save_stats(const std::string& path, const FeatureStats& stats) {
  if (stats.mean.size() != kStatsBands || stats.stddev.size() != kStatsBands)
    throw DataError("save_stats: format holds exactly 80 bands");
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw DataError("save_stats: cannot write " + path);
  f.write(kStatsMagic, 8);
  f.write(reinterpret_cast<const char*>(stats.mean.data()), 80 * sizeof(double));
  f.write(reinterpret_cast<const char*>(stats.stddev.data()), 80 * sizeof(double));
  if (!f) throw DataError("save_stats: short write to " + path);
}

FeatureStats load_stats(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("load_stats: cannot open " + path);
  char magic[8];
  f.read(magic, 8);
  if (!f || std::memcmp(magic, kStatsMagic, 8) != 0)
    throw DataError("load_stats: bad magic in " + path);
  FeatureStats st;
  st.mean.resize(kStatsBands);
  st.stddev.resize(kStatsBands);
  f.read(reinterpret_cast<char*>(st.mean.data()), 80 * sizeof(double));
  f.read(reinterpret_cast<char*>(st.stddev.data()), 80 * sizeof(double));
  if (!f) throw DataError("load_stats: truncated file " + path);
  for (double s : st.stddev)
    if (!(s > 0.0)) throw DataError("load_stats: non-positive stddev in " + path);
  return st;
}

namespace {
constexpr char kMelMagic[8] = {'P', 'W', 'G', 'M', 'E', 'L', '0', '1'};
}  // namespace

void save_mel(const std::string& path, const Tensor& mel) {
  if (mel.dim() != 2) throw DataError("save_mel: tensor must be [bands x frames]");
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw DataError("save_mel: cannot write " + path);
  f.write(kMelMagic, 8);
  const std::uint64_t bands = mel.extent(0), frames = mel.extent(1);
  f.write(reinterpret_cast<const char*>(&bands), 8);
  f.write(reinterpret_cast<const char*>(&frames), 8);
  f.write(reinterpret_cast<const char*>(mel.data().data()),
          static_cast<std::streamsize>(mel.numel() * sizeof(double)));
  if (!f) throw DataError("save_mel: short write to " + path);
}

Tensor load_mel(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("load_mel: cannot open " + path);
  char magic[8];
  f.read(magic, 8);
  if (!f || std::memcmp(magic, kMelMagic, 8) != 0)
    throw DataError("load_mel: bad magic in " + path);
  std::uint64_t bands = 0, frames = 0;
  f.read(reinterpret_cast<char*>(&bands), 8);
  f.read(reinterpret_cast<char*>(&frames), 8);
  if (!f || bands == 0 || frames == 0) throw DataError("load_mel: malformed header in " + path);
  std::vector<double> data(bands * frames);
  f.read(reinterpret_cast<char*>(data.data()),
         static_cast<std::streamsize>(data.size() * sizeof(double)));
  if (!f) throw DataError("load_mel: truncated file " + path);
  return Tensor::from_data({bands, frames}, std::move(data));
}

}  // namespace pwg
