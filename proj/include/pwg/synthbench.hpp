#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pwg/checkpoint.hpp"
#include "pwg/config.hpp"
#include "pwg/losses.hpp"
#include "pwg/models.hpp"

namespace pwg {

// A generator restored from a checkpoint together with its config and
// normalization statistics.
struct ModelBundle {
  RunConfig cfg;
  FeatureStats stats;
  Generator generator;

  explicit ModelBundle(const RunConfig& c);
};

ModelBundle load_model(const std::string& ckpt_path);

// z ~ N(0,1) of length F*hop drawn from `seed`, one parallel generator pass,
// output clamped to [-1, 1].
AudioClip synthesize(Generator& gen, const Tensor& mel, std::uint64_t seed);

// Same result, computed in overlapping chunks: the conditioning is upsampled
// once, z and the upsampled features are chunked with `overlap` samples of
// context per side (>= the receptive half-width for bit-identical output)
// and only each chunk's core is kept.
AudioClip synthesize_chunked(Generator& gen, const Tensor& mel, std::uint64_t seed,
                             std::size_t chunk_samples, std::size_t overlap);

struct BenchReport {
  double audio_seconds_generated = 0;
  double wall_seconds = 0;
  double rtf = 0;  // audio seconds per wall second
  double linearity_ratio = 0;  // time(2T) / time(T)
  std::size_t param_count_generator = 0;
  std::size_t param_count_with_upsampler = 0;
  int threads_used = 0;
  int trials = 0;

  std::string to_kv() const;      // one key=value per line
  std::string to_record() const;  // single-line machine-readable record
};

// Median wall time over `trials` synthesis passes of `seconds` of audio from
// seeded random conditioning, after one warm-up pass. Also probes
// time(2T)/time(T).
BenchReport benchmark(Generator& gen, double seconds, int trials, std::uint64_t seed);

struct EvalRow {
  std::string name;
  double l_aux = 0;
  std::vector<double> l_sc, l_mag;
};

struct EvalReport {
  std::vector<EvalRow> rows;
  EvalRow aggregate;  // mean over clips

  std::string to_metrics() const;  // key=value lines, one per clip + aggregate
};

// Analysis-synthesis loss over a held-out corpus: per clip, extract mel with
// the model's stats, synthesize with a per-clip seed derived from `seed`,
// and report the multi-resolution STFT loss against the original.
EvalReport evaluate(Generator& gen, const FeatureStats& stats,
                    const std::vector<std::string>& wav_paths, const MultiResConfig& mrc,
                    const MelConfig& mc, std::uint64_t seed);

}  // namespace pwg
