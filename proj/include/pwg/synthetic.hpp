#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pwg/dsp.hpp"
#include "pwg/rng.hpp"

namespace pwg {

// One synthetic clip: 1-4 sinusoids (80-7000 Hz) with exponential amplitude
// envelopes plus low-level noise, 1-3 s at 24 kHz, peak-limited to 0.95.
AudioClip make_synthetic_clip(Rng& rng);

// Deterministic corpus of at least `minutes` minutes of audio under
// out_dir/clip_NNNN.wav. Returns the written paths in order.
std::vector<std::string> generate_corpus(const std::string& out_dir, double minutes,
                                         std::uint64_t seed);

}  // namespace pwg
