#include "pwg/models.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "pwg/common.hpp"

namespace pwg {

void GeneratorConfig::validate() const {
  if (layers == 0 || cycles == 0) throw ConfigError("generator: layers and cycles must be positive");
  if (layers % cycles != 0) throw ConfigError("generator: layers must be divisible by cycles");
  if (kernel % 2 == 0) throw ConfigError("generator: kernel must be odd");
  if (residual_channels == 0 || skip_channels == 0 || aux_channels == 0)
    throw ConfigError("generator: channel counts must be positive");
  if (hop == 0) throw ConfigError("generator: hop must be positive");
  const auto f = effective_upsample_factors();
  std::size_t prod = 1;
  for (auto v : f) prod *= v;
  if (prod != hop)
    throw ConfigError("generator: upsample factors must multiply to hop");
}

std::vector<std::size_t> GeneratorConfig::effective_upsample_factors() const {
  if (!upsample_factors.empty()) return upsample_factors;
  // Prime factors merged pairwise (smallest first) down to at most four
  // stages, largest stage first. 300 -> (5,5,4,3); 256 -> (4,4,4,4).
  std::vector<std::size_t> fac;
  std::size_t n = hop;
  for (std::size_t p = 2; p * p <= n; ++p) {
    while (n % p == 0) {
      fac.push_back(p);
      n /= p;
    }
  }
  if (n > 1) fac.push_back(n);
  if (fac.empty()) fac.push_back(1);
  std::sort(fac.begin(), fac.end());
  while (fac.size() > 4) {
    const std::size_t merged = fac[0] * fac[1];
    fac.erase(fac.begin(), fac.begin() + 2);
    fac.insert(std::lower_bound(fac.begin(), fac.end(), merged), merged);
  }
  std::sort(fac.rbegin(), fac.rend());
  return fac;
}

std::size_t GeneratorConfig::receptive_field() const {
  std::size_t sum_dil = 0;
  for (std::size_t i = 0; i < layers; ++i) sum_dil += dilation_of_layer(i);
  return 1 + (kernel - 1) * sum_dil;
}

void DiscriminatorConfig::validate() const {
  if (layers < 2) throw ConfigError("discriminator: need at least two layers");
  if (kernel % 2 == 0) throw ConfigError("discriminator: kernel must be odd");
  if (channels == 0) throw ConfigError("discriminator: channels must be positive");
  const auto d = effective_dilations();
  if (d.size() != layers) throw ConfigError("discriminator: dilation count must equal layers");
  if (d.front() != 1 || d.back() != 1)
    throw ConfigError("discriminator: first and last dilations must be 1");
  for (std::size_t i = 2; i + 1 < layers; ++i) {
    if (d[i] != d[i - 1] + 1)
      throw ConfigError("discriminator: middle dilations must increase linearly");
  }
}

std::vector<std::size_t> DiscriminatorConfig::effective_dilations() const {
  if (!dilations.empty()) return dilations;
  std::vector<std::size_t> d(layers, 1);
  for (std::size_t i = 1; i + 1 < layers; ++i) d[i] = i;  // 1, 2, ..., layers-2
  return d;
}

std::size_t DiscriminatorConfig::receptive_field() const {
  std::size_t sum_dil = 0;
  for (auto v : effective_dilations()) sum_dil += v;
  return 1 + (kernel - 1) * sum_dil;
}

std::size_t param_count(const ParamList& params) {
  std::size_t n = 0;
  for (const auto& p : params) n += p.tensor.numel();
  return n;
}

// ---------------------------------------------------------------------------
// Layers

namespace {
// Direction from N(0, 1/(fan_in)), magnitude set to ||v|| per channel so the
// initial effective weight equals v; zero biases.
Tensor init_direction(std::vector<std::size_t> shape, std::size_t fan_in, Rng& rng) {
  return Tensor::randn(std::move(shape), rng, std::sqrt(1.0 / static_cast<double>(fan_in)),
                       true);
}

Tensor init_magnitude(const Tensor& v) {
  const std::size_t out_c = v.extent(0);
  const std::size_t per = v.numel() / out_c;
  std::vector<double> g(out_c);
  const auto& d = v.data();
  for (std::size_t c = 0; c < out_c; ++c) {
    double s = 0.0;
    for (std::size_t i = 0; i < per; ++i) s += d[c * per + i] * d[c * per + i];
    g[c] = std::sqrt(s);
  }
  return Tensor::from_data({out_c}, std::move(g), true);
}
}  // namespace

WnConv1d WnConv1d::init(std::size_t in_c, std::size_t out_c, std::size_t k, std::size_t dilation,
                        Rng& rng) {
  WnConv1d layer;
  layer.v = init_direction({out_c, in_c, k}, in_c * k, rng);
  layer.g = init_magnitude(layer.v);
  layer.b = Tensor::zeros({out_c}, true);
  layer.dilation = dilation;
  return layer;
}

Tensor WnConv1d::forward(const Tensor& x) const {
  return conv1d(x, weight_norm_apply(v, g), b, dilation, padding);
}

void WnConv1d::collect(const std::string& prefix, ParamList& out) {
  out.push_back({prefix + "/v", v});
  out.push_back({prefix + "/g", g});
  out.push_back({prefix + "/b", b});
}

void WnConv1d::set_trainable(bool trainable) {
  v.set_requires_grad(trainable);
  g.set_requires_grad(trainable);
  b.set_requires_grad(trainable);
}

WnConv2d WnConv2d::init(std::size_t in_c, std::size_t out_c, std::size_t kh, std::size_t kw,
                        Rng& rng) {
  WnConv2d layer;
  layer.v = init_direction({out_c, in_c, kh, kw}, in_c * kh * kw, rng);
  layer.g = init_magnitude(layer.v);
  layer.b = Tensor::zeros({out_c}, true);
  return layer;
}

Tensor WnConv2d::forward(const Tensor& x) const {
  return conv2d(x, weight_norm_apply(v, g), b);
}

void WnConv2d::collect(const std::string& prefix, ParamList& out) {
  out.push_back({prefix + "/v", v});
  out.push_back({prefix + "/g", g});
  out.push_back({prefix + "/b", b});
}

void WnConv2d::set_trainable(bool trainable) {
  v.set_requires_grad(trainable);
  g.set_requires_grad(trainable);
  b.set_requires_grad(trainable);
}

// ---------------------------------------------------------------------------
// Conditioning upsampler

MelUpsampler::MelUpsampler(const GeneratorConfig& cfg, Rng& rng)
    : factors_(cfg.effective_upsample_factors()) {
  convs_.reserve(factors_.size());
  for (const std::size_t r : factors_) {
    convs_.push_back(WnConv2d::init(1, 1, 3, 2 * r + 1, rng));
  }
}

Tensor MelUpsampler::forward(const Tensor& mel) const {
  if (mel.dim() != 2) throw std::invalid_argument("upsample_mel: mel must be [bands x frames]");
  Tensor cur = mel;
  const std::size_t bands = mel.extent(0);
  for (std::size_t s = 0; s < factors_.size(); ++s) {
    cur = repeat_cols(cur, factors_[s]);
    cur = reshape(cur, {1, bands, cur.extent(1)});
    cur = convs_[s].forward(cur);
    cur = reshape(cur, {bands, cur.extent(2)});
  }
  return cur;
}

void MelUpsampler::collect(const std::string& prefix, ParamList& out) {
  for (std::size_t s = 0; s < convs_.size(); ++s) {
    convs_[s].collect(prefix + "/stage" + std::to_string(s), out);
  }
}

void MelUpsampler::set_trainable(bool trainable) {
  for (auto& c : convs_) c.set_trainable(trainable);
}

// ---------------------------------------------------------------------------
// Generator

Generator::Generator(const GeneratorConfig& cfg, Rng& rng) : cfg_(cfg), upsampler_(cfg, rng) {
  cfg_.validate();
  const std::size_t c = cfg_.residual_channels;
  input_conv_ = WnConv1d::init(1, c, 1, 1, rng);
  blocks_.reserve(cfg_.layers);
  for (std::size_t i = 0; i < cfg_.layers; ++i) {
    Block blk;
    blk.dilated = WnConv1d::init(c, 2 * c, cfg_.kernel, cfg_.dilation_of_layer(i), rng);
    blk.aux = WnConv1d::init(cfg_.aux_channels, 2 * c, 1, 1, rng);
    blk.res = WnConv1d::init(c, c, 1, 1, rng);
    blk.skip = WnConv1d::init(c, cfg_.skip_channels, 1, 1, rng);
    blocks_.push_back(std::move(blk));
  }
  head1_ = WnConv1d::init(cfg_.skip_channels, cfg_.skip_channels, 1, 1, rng);
  head2_ = WnConv1d::init(cfg_.skip_channels, 1, 1, 1, rng);
}

Tensor Generator::upsample(const Tensor& mel) const { return upsampler_.forward(mel); }

Tensor Generator::forward(const Tensor& z, const Tensor& mel) const {
  if (z.dim() != 2 || z.extent(0) != 1)
    throw std::invalid_argument("generator: z must be [1 x T]");
  if (mel.dim() != 2 || mel.extent(0) != cfg_.aux_channels)
    throw std::invalid_argument("generator: mel band count mismatch");
  if (z.extent(1) != mel.extent(1) * cfg_.hop)
    throw std::invalid_argument("generator: need T == F * hop");
  return forward_with_aux(z, upsample(mel));
}

Tensor Generator::forward_with_aux(const Tensor& z, const Tensor& aux) const {
  if (z.dim() != 2 || z.extent(0) != 1)
    throw std::invalid_argument("generator: z must be [1 x T]");
  if (aux.dim() != 2 || aux.extent(0) != cfg_.aux_channels ||
      aux.extent(1) != z.extent(1))
    throw std::invalid_argument("generator: aux shape mismatch");
  const std::size_t c = cfg_.residual_channels;
  Tensor h = input_conv_.forward(z);
  Tensor skip_acc;
  for (const auto& blk : blocks_) {
    Tensor pre = add(blk.dilated.forward(h), blk.aux.forward(aux));
    Tensor gate = mul(tanh(slice_rows(pre, 0, c)), sigmoid(slice_rows(pre, c, 2 * c)));
    h = add(h, blk.res.forward(gate));
    Tensor s = blk.skip.forward(gate);
    skip_acc = skip_acc.defined() ? add(skip_acc, s) : s;
  }
  Tensor out = head2_.forward(relu(head1_.forward(relu(skip_acc))));
  return tanh(out);
}

ParamList Generator::parameters() {
  ParamList out = parameters_without_upsampler();
  upsampler_.collect("g/up", out);
  return out;
}

ParamList Generator::parameters_without_upsampler() {
  ParamList out;
  input_conv_.collect("g/in", out);
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "g/block%02zu", i);
    blocks_[i].dilated.collect(std::string(name) + "/dil", out);
    blocks_[i].aux.collect(std::string(name) + "/aux", out);
    blocks_[i].res.collect(std::string(name) + "/res", out);
    blocks_[i].skip.collect(std::string(name) + "/skip", out);
  }
  head1_.collect("g/head1", out);
  head2_.collect("g/head2", out);
  return out;
}

void Generator::zero_grad() {
  for (auto& p : parameters()) p.tensor.zero_grad();
}

void Generator::set_trainable(bool trainable) {
  input_conv_.set_trainable(trainable);
  for (auto& blk : blocks_) {
    blk.dilated.set_trainable(trainable);
    blk.aux.set_trainable(trainable);
    blk.res.set_trainable(trainable);
    blk.skip.set_trainable(trainable);
  }
  head1_.set_trainable(trainable);
  head2_.set_trainable(trainable);
  upsampler_.set_trainable(trainable);
}

// ---------------------------------------------------------------------------
// Discriminator

Discriminator::Discriminator(const DiscriminatorConfig& cfg, Rng& rng) : cfg_(cfg) {
  cfg_.validate();
  const auto dil = cfg_.effective_dilations();
  layers_.reserve(cfg_.layers);
  for (std::size_t i = 0; i < cfg_.layers; ++i) {
    const std::size_t in_c = i == 0 ? 1 : cfg_.channels;
    const std::size_t out_c = i + 1 == cfg_.layers ? 1 : cfg_.channels;
    layers_.push_back(WnConv1d::init(in_c, out_c, cfg_.kernel, dil[i], rng));
  }
}

Tensor Discriminator::forward(const Tensor& x) const {
  if (x.dim() != 2 || x.extent(0) != 1)
    throw std::invalid_argument("discriminator: input must be [1 x T]");
  if (x.extent(1) == 0) throw std::invalid_argument("discriminator: empty input");
  Tensor h = x;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    h = layers_[i].forward(h);
    if (i + 1 < layers_.size()) h = leaky_relu(h, cfg_.leaky_alpha);
  }
  return reshape(h, {h.extent(1)});
}

ParamList Discriminator::parameters() {
  ParamList out;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "d/layer%02zu", i);
    layers_[i].collect(name, out);
  }
  return out;
}

void Discriminator::zero_grad() {
  for (auto& p : parameters()) p.tensor.zero_grad();
}

void Discriminator::set_trainable(bool trainable) {
  for (auto& l : layers_) l.set_trainable(trainable);
}

}  // namespace pwg
