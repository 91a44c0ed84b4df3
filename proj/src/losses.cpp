#include "pwg/losses.hpp"

#include <stdexcept>

#include "pwg/common.hpp"

namespace pwg {

MultiResConfig MultiResConfig::defaults() {
  return MultiResConfig{{StftConfig{1024, 600, 120}, StftConfig{2048, 1200, 240},
                         StftConfig{512, 240, 50}}};
}

void MultiResConfig::validate() const {
  if (resolutions.empty()) throw ConfigError("multi-res loss: need at least one resolution");
  for (const auto& r : resolutions) r.validate();
}

std::size_t MultiResConfig::largest_window() const {
  std::size_t w = 0;
  for (const auto& r : resolutions) w = std::max(w, r.win_size);
  return w;
}

namespace {
void check_pair(const Tensor& x, const Tensor& xhat, const StftConfig& cfg, const char* op) {
  if (!x.defined() || !xhat.defined()) throw std::invalid_argument(std::string(op) + ": empty tensor");
  if (x.dim() != 1 || xhat.dim() != 1)
    throw std::invalid_argument(std::string(op) + ": signals must be 1-D");
  if (x.numel() != xhat.numel())
    throw std::invalid_argument(std::string(op) + ": signal lengths differ");
  if (x.numel() < cfg.win_size)
    throw std::invalid_argument(std::string(op) + ": signal shorter than the analysis window");
}
}  // namespace

Tensor spectral_convergence(const Tensor& x, const Tensor& xhat, const StftConfig& cfg) {
  check_pair(x, xhat, cfg, "spectral_convergence");
  Tensor mag_x = stft_magnitude(x, cfg);
  Tensor mag_xh = stft_magnitude(xhat, cfg);
  Tensor den = frobenius_norm(mag_x);
  if (den.value() < 1e-10)
    throw NumericError("spectral_convergence: degenerate reference (|STFT| norm < 1e-10)");
  Tensor num = frobenius_norm(sub(mag_x, mag_xh));
  return div(num, den);
}

Tensor log_stft_magnitude_loss(const Tensor& x, const Tensor& xhat, const StftConfig& cfg) {
  check_pair(x, xhat, cfg, "log_stft_magnitude");
  Tensor lx = log(stft_magnitude(x, cfg));
  Tensor lxh = log(stft_magnitude(xhat, cfg));
  const double n = static_cast<double>(lx.numel());
  return scale(l1_norm(sub(lx, lxh)), 1.0 / n);
}

StftLossParts stft_loss_parts(const Tensor& x, const Tensor& xhat, const StftConfig& cfg) {
  return StftLossParts{spectral_convergence(x, xhat, cfg),
                       log_stft_magnitude_loss(x, xhat, cfg)};
}

Tensor stft_loss(const Tensor& x, const Tensor& xhat, const StftConfig& cfg) {
  StftLossParts parts = stft_loss_parts(x, xhat, cfg);
  return add(parts.sc, parts.mag);
}

MultiResLossParts multi_res_stft_loss_parts(const Tensor& x, const Tensor& xhat,
                                            const MultiResConfig& cfg) {
  cfg.validate();
  MultiResLossParts out;
  Tensor acc;
  for (const auto& res : cfg.resolutions) {
    StftLossParts parts = stft_loss_parts(x, xhat, res);
    Tensor s = add(parts.sc, parts.mag);
    acc = acc.defined() ? add(acc, s) : s;
    out.parts.push_back(std::move(parts));
  }
  out.total = scale(acc, 1.0 / static_cast<double>(cfg.resolutions.size()));
  return out;
}

Tensor multi_res_stft_loss(const Tensor& x, const Tensor& xhat, const MultiResConfig& cfg) {
  return multi_res_stft_loss_parts(x, xhat, cfg).total;
}

Tensor adv_loss_generator(const Tensor& d_out) {
  if (!d_out.defined() || d_out.numel() == 0)
    throw std::invalid_argument("adv_loss_generator: empty discriminator output");
  return mean(square(add_scalar(scale(d_out, -1.0), 1.0)));
}

Tensor loss_discriminator(const Tensor& d_real, const Tensor& d_fake) {
  if (!d_real.defined() || !d_fake.defined() || d_real.numel() == 0 || d_fake.numel() == 0)
    throw std::invalid_argument("loss_discriminator: empty discriminator output");
  Tensor real_term = mean(square(add_scalar(scale(d_real, -1.0), 1.0)));
  Tensor fake_term = mean(square(d_fake));
  return add(real_term, fake_term);
}

Tensor loss_generator_total(const Tensor& l_aux, const Tensor& l_adv, const LossWeights& w) {
  if (w.lambda_adv < 0.0) throw ConfigError("loss_generator_total: lambda_adv must be >= 0");
  if (l_aux.numel() != 1 || l_adv.numel() != 1)
    throw std::invalid_argument("loss_generator_total: losses must be scalar");
  return add(l_aux, scale(l_adv, w.lambda_adv));
}

}  // namespace pwg
