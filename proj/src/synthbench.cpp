#include "pwg/synthbench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>

#include "pwg/common.hpp"
#include "pwg/threading.hpp"

namespace pwg {

ModelBundle::ModelBundle(const RunConfig& c)
    : cfg(c), generator([&] {
        Rng r = Rng::derive(c.seed, 1);
        return Generator(c.generator(), r);
      }()) {}

ModelBundle load_model(const std::string& ckpt_path) {
  Checkpoint ckpt = load_checkpoint(ckpt_path);
  ModelBundle bundle(RunConfig::from_map(ckpt.config));
  bundle.stats = ckpt.stats;
  for (auto& p : bundle.generator.parameters()) {
    const CheckpointTensor* t = ckpt.find(p.name);
    if (t == nullptr) throw DataError("checkpoint: missing generator tensor " + p.name);
    if (t->data.size() != p.tensor.numel())
      throw DataError("checkpoint: tensor size mismatch for " + p.name);
    p.tensor.mutable_data() = t->data;
  }
  return bundle;
}

namespace {
AudioClip to_clip(const Tensor& wave) {
  AudioClip clip;
  const auto& d = wave.data();
  clip.samples.resize(d.size());
  for (std::size_t i = 0; i < d.size(); ++i) {
    clip.samples[i] = std::min(1.0, std::max(-1.0, d[i]));
  }
  return clip;
}
}  // namespace

AudioClip synthesize(Generator& gen, const Tensor& mel, std::uint64_t seed) {
  if (mel.dim() != 2 || mel.extent(1) == 0)
    throw std::invalid_argument("synthesize: mel must be [bands x F], F >= 1");
  NoGradGuard ng;
  Rng zr(seed);
  Tensor z = Tensor::randn({1, mel.extent(1) * gen.config().hop}, zr);
  return to_clip(gen.forward(z, mel));
}

AudioClip synthesize_chunked(Generator& gen, const Tensor& mel, std::uint64_t seed,
                             std::size_t chunk_samples, std::size_t overlap) {
  if (chunk_samples == 0) throw std::invalid_argument("synthesize_chunked: empty chunk");
  NoGradGuard ng;
  Rng zr(seed);
  const std::size_t t_total = mel.extent(1) * gen.config().hop;
  Tensor z = Tensor::randn({1, t_total}, zr);  // same stream as the whole pass
  Tensor aux = gen.upsample(mel);
  const auto& zd = z.data();
  const auto& ad = aux.data();
  const std::size_t bands = aux.extent(0);

  AudioClip out;
  out.samples.resize(t_total);
  for (std::size_t core = 0; core < t_total; core += chunk_samples) {
    const std::size_t core_end = std::min(core + chunk_samples, t_total);
    const std::size_t lo = core > overlap ? core - overlap : 0;
    const std::size_t hi = std::min(core_end + overlap, t_total);
    const std::size_t w = hi - lo;
    Tensor zc = Tensor::from_data({1, w}, std::vector<double>(zd.begin() + lo, zd.begin() + hi));
    std::vector<double> ac(bands * w);
    for (std::size_t m = 0; m < bands; ++m) {
      std::memcpy(ac.data() + m * w, ad.data() + m * t_total + lo, w * sizeof(double));
    }
    Tensor auxc = Tensor::from_data({bands, w}, std::move(ac));
    Tensor y = gen.forward_with_aux(zc, auxc);
    const auto& yd = y.data();
    for (std::size_t t = core; t < core_end; ++t) {
      out.samples[t] = std::min(1.0, std::max(-1.0, yd[t - lo]));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Benchmark

namespace {
double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double time_synthesis(Generator& gen, const Tensor& mel, std::uint64_t seed, int trials) {
  using Clock = std::chrono::steady_clock;
  synthesize(gen, mel, seed);  // warm-up, excluded from timing
  std::vector<double> times;
  times.reserve(static_cast<std::size_t>(trials));
  for (int i = 0; i < trials; ++i) {
    const auto t0 = Clock::now();
    synthesize(gen, mel, seed);
    times.push_back(std::chrono::duration<double>(Clock::now() - t0).count());
  }
  return median_of(std::move(times));
}
}  // namespace

BenchReport benchmark(Generator& gen, double seconds, int trials, std::uint64_t seed) {
  if (seconds < 1.0) throw std::invalid_argument("benchmark: need seconds >= 1");
  if (trials < 1) throw std::invalid_argument("benchmark: need trials >= 1");
  const std::size_t hop = gen.config().hop;
  const auto frames = static_cast<std::size_t>(
      std::ceil(seconds * static_cast<double>(kSampleRate) / static_cast<double>(hop)));
  Rng mr = Rng::derive(seed, 11);
  Tensor mel = Tensor::randn({gen.config().aux_channels, frames}, mr);
  Tensor mel2 = Tensor::randn({gen.config().aux_channels, 2 * frames}, mr);

  BenchReport rep;
  rep.trials = trials;
  rep.audio_seconds_generated =
      static_cast<double>(frames * hop) / static_cast<double>(kSampleRate);
  rep.wall_seconds = time_synthesis(gen, mel, seed, trials);
  rep.rtf = rep.audio_seconds_generated / rep.wall_seconds;
  const double t2 = time_synthesis(gen, mel2, seed, std::min(trials, 3));
  rep.linearity_ratio = t2 / rep.wall_seconds;
  rep.param_count_generator = param_count(gen.parameters_without_upsampler());
  rep.param_count_with_upsampler = param_count(gen.parameters());
  rep.threads_used = kernel_threads();
  return rep;
}

std::string BenchReport::to_kv() const {
  char buf[1024];
  std::snprintf(buf, sizeof(buf),
                "audio_seconds_generated=%.17g\n"
                "wall_seconds=%.17g\n"
                "rtf=%.17g\n"
                "linearity_ratio=%.17g\n"
                "param_count_generator=%zu\n"
                "param_count_with_upsampler=%zu\n"
                "threads_used=%d\n"
                "trials=%d\n",
                audio_seconds_generated, wall_seconds, rtf, linearity_ratio,
                param_count_generator, param_count_with_upsampler, threads_used, trials);
  return buf;
}

std::string BenchReport::to_record() const {
  char buf[1024];
  std::snprintf(buf, sizeof(buf),
                "bench audio_seconds_generated=%.17g wall_seconds=%.17g rtf=%.17g "
                "linearity_ratio=%.17g param_count_generator=%zu "
                "param_count_with_upsampler=%zu threads_used=%d trials=%d",
                audio_seconds_generated, wall_seconds, rtf, linearity_ratio,
                param_count_generator, param_count_with_upsampler, threads_used, trials);
  return buf;
}

// ---------------------------------------------------------------------------
// Evaluation

EvalReport evaluate(Generator& gen, const FeatureStats& stats,
                    const std::vector<std::string>& wav_paths, const MultiResConfig& mrc,
                    const MelConfig& mc, std::uint64_t seed) {
  if (wav_paths.empty()) throw DataError("evaluate: empty corpus");
  mrc.validate();
  NoGradGuard ng;
  EvalReport rep;
  rep.aggregate.name = "aggregate";
  rep.aggregate.l_sc.assign(mrc.resolutions.size(), 0.0);
  rep.aggregate.l_mag.assign(mrc.resolutions.size(), 0.0);

  for (std::size_t i = 0; i < wav_paths.size(); ++i) {
    const AudioClip clip = read_wav(wav_paths[i]);
    Tensor mel = mel_spectrogram(clip, mc, &stats);
    const std::size_t t_len = mel.extent(1) * gen.config().hop;
    AudioClip synth = synthesize(gen, mel, Rng::derive(seed, 100 + i).next_u64());
    const std::size_t n = std::min({t_len, clip.size(), synth.size()});
    Tensor x = Tensor::from_data(
        {n}, std::vector<double>(clip.samples.begin(), clip.samples.begin() + n));
    Tensor xh = Tensor::from_data(
        {n}, std::vector<double>(synth.samples.begin(), synth.samples.begin() + n));
    MultiResLossParts parts = multi_res_stft_loss_parts(x, xh, mrc);

    EvalRow row;
    row.name = wav_paths[i];
    row.l_aux = parts.total.value();
    for (const auto& p : parts.parts) {
      row.l_sc.push_back(p.sc.value());
      row.l_mag.push_back(p.mag.value());
    }
    rep.aggregate.l_aux += row.l_aux;
    for (std::size_t m = 0; m < row.l_sc.size(); ++m) {
      rep.aggregate.l_sc[m] += row.l_sc[m];
      rep.aggregate.l_mag[m] += row.l_mag[m];
    }
    rep.rows.push_back(std::move(row));
  }
  const double inv = 1.0 / static_cast<double>(rep.rows.size());
  rep.aggregate.l_aux *= inv;
  for (auto& v : rep.aggregate.l_sc) v *= inv;
  for (auto& v : rep.aggregate.l_mag) v *= inv;
  return rep;
}

namespace {
void append_row(std::string& out, const EvalRow& row, const char* label, std::size_t idx,
                bool with_index) {
  char buf[128];
  if (with_index) {
    std::snprintf(buf, sizeof(buf), "%s=%zu file=", label, idx);
    out += buf;
    out += row.name;
  } else {
    out += label;
  }
  std::snprintf(buf, sizeof(buf), " l_aux=%.17g", row.l_aux);
  out += buf;
  for (std::size_t m = 0; m < row.l_sc.size(); ++m) {
    std::snprintf(buf, sizeof(buf), " l_sc_%zu=%.17g l_mag_%zu=%.17g", m, row.l_sc[m], m,
                  row.l_mag[m]);
    out += buf;
  }
  out += '\n';
}
}  // namespace

std::string EvalReport::to_metrics() const {
  std::string out;
  for (std::size_t i = 0; i < rows.size(); ++i) append_row(out, rows[i], "clip", i, true);
  append_row(out, aggregate, "aggregate", 0, false);
  return out;
}

}  // namespace pwg
