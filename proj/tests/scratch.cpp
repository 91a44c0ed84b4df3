#include <chrono>
#include <cstdio>
#include <vector>
#include "pwg/rng.hpp"
#include "pwg/tensor.hpp"
using namespace pwg;
using Clock = std::chrono::steady_clock;

template <class F> double time_it(F&& f, int iters) {
  f();
  auto t0 = Clock::now();
  for (int i = 0; i < iters; ++i) f();
  return std::chrono::duration<double>(Clock::now() - t0).count() / iters;
}

int main() {
  Rng rng(7);
  size_t cin = 16, cout = 32, k = 3, d = 64, T = 24000;
  double macs = double(cin) * cout * k * T;

  Tensor x = Tensor::randn({cin, T}, rng);
  Tensor w = Tensor::randn({cout, cin, k}, rng, 0.1);
  Tensor b = Tensor::zeros({cout});

  // forward only, no grad
  double tf = time_it([&]{ NoGradGuard ng; Tensor y = conv1d(x, w, b, d, Padding::kSame); }, 30);
  std::printf("fwd nograd:        %7.2f ms  %6.1f GF/s\n", tf*1e3, 2*macs/tf*1e-9);

  // full fwd+bwd with all grads
  x.set_requires_grad(true); w.set_requires_grad(true); b.set_requires_grad(true);
  double tfb = time_it([&]{ Tensor y = conv1d(x, w, b, d, Padding::kSame); backward(sum(y)); }, 15);
  std::printf("fwd+bwd all:       %7.2f ms  %6.1f GF/s (3x macs)\n", tfb*1e3, 6*macs/tfb*1e-9);

  // weight-grad only
  x.set_requires_grad(false);
  double tw = time_it([&]{ Tensor y = conv1d(x, w, b, d, Padding::kSame); backward(sum(y)); }, 15);
  std::printf("fwd+bwdW:          %7.2f ms  %6.1f GF/s (2x macs)\n", tw*1e3, 4*macs/tw*1e-9);

  // input-grad only
  x.set_requires_grad(true); w.set_requires_grad(false); b.set_requires_grad(false);
  double ti = time_it([&]{ Tensor y = conv1d(x, w, b, d, Padding::kSame); backward(sum(y)); }, 15);
  std::printf("fwd+bwdX:          %7.2f ms  %6.1f GF/s (2x macs)\n", ti*1e3, 4*macs/ti*1e-9);

  // pure elementwise cost reference: tanh of 32xT
  Tensor big = Tensor::randn({cout, T}, rng);
  double tt = time_it([&]{ NoGradGuard ng; Tensor y2 = tanh(big); }, 30);
  std::printf("tanh 32xT nograd:  %7.2f ms  (%5.2f ns/el)\n", tt*1e3, tt/double(cout*T)*1e9);
  return 0;
}
