#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "pwg/rng.hpp"
#include "pwg/tensor.hpp"

namespace pwg {

struct GeneratorConfig {
  std::size_t layers = 30;
  std::size_t cycles = 3;
  std::size_t residual_channels = 64;
  std::size_t skip_channels = 64;
  std::size_t kernel = 3;
  std::size_t aux_channels = 80;
  std::size_t hop = 300;
  // Nearest-neighbor stage factors; empty derives them from hop
  // (300 -> 5,5,4,3).
  std::vector<std::size_t> upsample_factors;

  void validate() const;
  std::vector<std::size_t> effective_upsample_factors() const;
  std::size_t layers_per_cycle() const { return layers / cycles; }
  std::size_t dilation_of_layer(std::size_t i) const {
    return std::size_t{1} << (i % layers_per_cycle());
  }
  // Samples of input influencing one output sample: 1 + (K-1) * sum(dilations).
  std::size_t receptive_field() const;
  std::size_t receptive_half_width() const { return (receptive_field() - 1) / 2; }
};

struct DiscriminatorConfig {
  std::size_t layers = 10;
  std::size_t channels = 64;
  std::size_t kernel = 3;
  double leaky_alpha = 0.2;
  // Empty derives [1, 1, 2, ..., layers-2, 1]: linearly increasing dilations
  // except for the first and last layers.
  std::vector<std::size_t> dilations;

  void validate() const;
  std::vector<std::size_t> effective_dilations() const;
  std::size_t receptive_field() const;
  std::size_t receptive_half_width() const { return (receptive_field() - 1) / 2; }
};

struct NamedParam {
  std::string name;
  Tensor tensor;
};
using ParamList = std::vector<NamedParam>;

// Number of trainable scalars (weight-norm direction + magnitude + biases).
std::size_t param_count(const ParamList& params);

// Weight-normalized 1-D convolution layer: w = g * v / ||v||.
struct WnConv1d {
  Tensor v;  // [out x in x k]
  Tensor g;  // [out]
  Tensor b;  // [out]
  std::size_t dilation = 1;
  Padding padding = Padding::kSame;

  static WnConv1d init(std::size_t in_c, std::size_t out_c, std::size_t k, std::size_t dilation,
                       Rng& rng);
  Tensor forward(const Tensor& x) const;
  void collect(const std::string& prefix, ParamList& out);
  void set_trainable(bool trainable);
};

struct WnConv2d {
  Tensor v;  // [out x in x kh x kw]
  Tensor g;  // [out]
  Tensor b;  // [out]

  static WnConv2d init(std::size_t in_c, std::size_t out_c, std::size_t kh, std::size_t kw,
                       Rng& rng);
  Tensor forward(const Tensor& x) const;
  void collect(const std::string& prefix, ParamList& out);
  void set_trainable(bool trainable);
};

// Frame-rate conditioning -> sample-rate: per stage, nearest-neighbor repeat
// by r then a single-channel weight-normalized 2-D conv over (band, time)
// with kernel (3, 2r+1), same padding.
class MelUpsampler {
 public:
  MelUpsampler(const GeneratorConfig& cfg, Rng& rng);
  Tensor forward(const Tensor& mel) const;  // [80 x F] -> [80 x F*hop]
  void collect(const std::string& prefix, ParamList& out);
  void set_trainable(bool trainable);
  const std::vector<std::size_t>& factors() const { return factors_; }
  std::vector<WnConv2d>& stages() { return convs_; }

 private:
  std::vector<std::size_t> factors_;
  std::vector<WnConv2d> convs_;
};

// Non-autoregressive WaveNet generator: noise + upsampled mel -> waveform in
// a single parallel pass.
class Generator {
 public:
  Generator(const GeneratorConfig& cfg, Rng& rng);

  // z [1 x T], mel [80 x F] with T == F * hop.
  Tensor forward(const Tensor& z, const Tensor& mel) const;
  // Conditioning path alone (the 2-D-conv upsampler).
  Tensor upsample(const Tensor& mel) const;
  // Residual stack + head on an already-upsampled conditioning tensor.
  Tensor forward_with_aux(const Tensor& z, const Tensor& aux) const;

  ParamList parameters();                   // includes the upsampler
  ParamList parameters_without_upsampler();
  void zero_grad();
  void set_trainable(bool trainable);
  const GeneratorConfig& config() const { return cfg_; }
  MelUpsampler& upsampler() { return upsampler_; }

 private:
  struct Block {
    WnConv1d dilated;   // C -> 2C, kernel K, dilation 2^(i mod layers/cycle)
    WnConv1d aux;       // 80 -> 2C, 1x1
    WnConv1d res;       // C -> C, 1x1
    WnConv1d skip;      // C -> skip, 1x1
  };
  GeneratorConfig cfg_;
  WnConv1d input_conv_;  // 1 -> C, 1x1
  std::vector<Block> blocks_;
  WnConv1d head1_;  // skip -> skip, 1x1
  WnConv1d head2_;  // skip -> 1, 1x1
  MelUpsampler upsampler_;
};

// Per-time-step discriminator: stacked non-causal dilated convs with leaky
// ReLU between layers, no conditioning input.
class Discriminator {
 public:
  Discriminator(const DiscriminatorConfig& cfg, Rng& rng);

  Tensor forward(const Tensor& x) const;  // [1 x T] -> [T]
  ParamList parameters();
  void zero_grad();
  void set_trainable(bool trainable);
  const DiscriminatorConfig& config() const { return cfg_; }

 private:
  DiscriminatorConfig cfg_;
  std::vector<WnConv1d> layers_;
};

}  // namespace pwg
