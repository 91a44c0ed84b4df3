#pragma once

#include <vector>

#include "pwg/dsp.hpp"
#include "pwg/tensor.hpp"

namespace pwg {

// Analysis settings for the multi-resolution STFT loss.
struct MultiResConfig {
  std::vector<StftConfig> resolutions;

  // The three standard resolutions: (fft, win, hop) =
  // (1024, 600, 120), (2048, 1200, 240), (512, 240, 50).
  static MultiResConfig defaults();
  void validate() const;  // at least one resolution
  std::size_t largest_window() const;
};

struct LossWeights {
  double lambda_adv = 4.0;
};

// ||  |STFT(x)| - |STFT(xhat)|  ||_F / ||  |STFT(x)|  ||_F
// Errors when the reference magnitude norm falls below 1e-10.
Tensor spectral_convergence(const Tensor& x, const Tensor& xhat, const StftConfig& cfg);

// (1/N) || log|STFT(x)| - log|STFT(xhat)| ||_1, N the magnitude element count.
Tensor log_stft_magnitude_loss(const Tensor& x, const Tensor& xhat, const StftConfig& cfg);

struct StftLossParts {
  Tensor sc;
  Tensor mag;
};

StftLossParts stft_loss_parts(const Tensor& x, const Tensor& xhat, const StftConfig& cfg);

// spectral_convergence + log_stft_magnitude_loss
Tensor stft_loss(const Tensor& x, const Tensor& xhat, const StftConfig& cfg);

struct MultiResLossParts {
  Tensor total;  // (1/M) sum of per-resolution stft losses
  std::vector<StftLossParts> parts;
};

MultiResLossParts multi_res_stft_loss_parts(const Tensor& x, const Tensor& xhat,
                                            const MultiResConfig& cfg);
Tensor multi_res_stft_loss(const Tensor& x, const Tensor& xhat, const MultiResConfig& cfg);

// Least-squares adversarial objectives over per-time-step discriminator
// outputs: mean_t (1 - d)^2 for the generator; mean_t (1 - d_real)^2 +
// mean_t d_fake^2 for the discriminator.
Tensor adv_loss_generator(const Tensor& d_out);
Tensor loss_discriminator(const Tensor& d_real, const Tensor& d_fake);

// l_aux + lambda_adv * l_adv
Tensor loss_generator_total(const Tensor& l_aux, const Tensor& l_adv, const LossWeights& w);

}  // namespace pwg
