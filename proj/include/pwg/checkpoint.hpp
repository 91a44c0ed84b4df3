#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "pwg/dsp.hpp"

namespace pwg {

struct CheckpointTensor {
  std::string name;
  std::vector<std::size_t> shape;
  std::vector<double> data;
};

// Container: 8-byte magic "PWGCKPT1", u64 LE manifest length, JSON manifest
// (tensor names/shapes/offsets, config echo, RNG states, counters), then the
// raw little-endian f64 payload. Round-trips bit-exactly.
struct Checkpoint {
  std::uint64_t step = 0;
  std::map<std::string, std::string> config;  // full key=value echo
  std::map<std::string, std::uint64_t> counters;
  std::map<std::string, std::array<std::uint64_t, 4>> rng_states;
  std::vector<CheckpointTensor> tensors;
  FeatureStats stats;

  const CheckpointTensor* find(const std::string& name) const;
};

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace pwg
