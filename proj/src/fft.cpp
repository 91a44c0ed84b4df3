#include "fft.hpp"

#include <cmath>
#include <map>
#include <mutex>
#include <stdexcept>
#include <vector>

#include "pwg/tensor.hpp"
#include "pwg/threading.hpp"
#include "tensor_impl.hpp"

namespace pwg {

namespace detail {

namespace {

struct Twiddles {
  std::vector<double> cos_tab;  // cos(2 pi j / n), j < n/2
  std::vector<double> sin_tab;  // sin(2 pi j / n)
};

const Twiddles& twiddles_for(std::size_t n) {
  static std::map<std::size_t, Twiddles> cache;
  static std::mutex mu;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(n);
  if (it == cache.end()) {
    Twiddles t;
    t.cos_tab.resize(n / 2);
    t.sin_tab.resize(n / 2);
    const double step = 6.283185307179586476925287 / static_cast<double>(n);
    for (std::size_t j = 0; j < n / 2; ++j) {
      t.cos_tab[j] = std::cos(step * static_cast<double>(j));
      t.sin_tab[j] = std::sin(step * static_cast<double>(j));
    }
    it = cache.emplace(n, std::move(t)).first;
  }
  return it->second;
}

}  // namespace

void fft_complex(double* re, double* im, std::size_t n, int sign) {
  if (!is_pow2(n)) throw std::invalid_argument("fft: length must be a power of two");
  if (n == 1) return;
  // Bit-reversal permutation.
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) {
      std::swap(re[i], re[j]);
      std::swap(im[i], im[j]);
    }
  }
  const Twiddles& tw = twiddles_for(n);
  const double s = sign < 0 ? -1.0 : 1.0;
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const std::size_t half = len >> 1;
    const std::size_t step = n / len;
    for (std::size_t start = 0; start < n; start += len) {
      for (std::size_t j = 0; j < half; ++j) {
        const double wr = tw.cos_tab[j * step];
        const double wi = s * tw.sin_tab[j * step];
        const std::size_t a = start + j;
        const std::size_t b = a + half;
        const double tr = re[b] * wr - im[b] * wi;
        const double ti = re[b] * wi + im[b] * wr;
        re[b] = re[a] - tr;
        im[b] = im[a] - ti;
        re[a] += tr;
        im[a] += ti;
      }
    }
  }
}

}  // namespace detail

RdftOutput rdft(const Tensor& frames) {
  using detail::attach_node;
  using detail::make_raw;
  using detail::Node;
  if (!frames.defined()) throw std::invalid_argument("rdft: empty tensor");
  if (frames.dim() != 2) throw std::invalid_argument("rdft: frames must be [F x W]");
  const std::size_t f = frames.extent(0), w = frames.extent(1);
  if (!detail::is_pow2(w)) throw std::invalid_argument("rdft: frame length must be a power of two");
  const std::size_t bins = w / 2 + 1;

  std::vector<double> out_re(f * bins), out_im(f * bins);
  const double* x = frames.data().data();
  const int nt = kernel_threads();
#pragma omp parallel for schedule(static) num_threads(nt) if (f > 8)
  for (std::ptrdiff_t fr = 0; fr < static_cast<std::ptrdiff_t>(f); ++fr) {
    std::vector<double> re(x + fr * w, x + (fr + 1) * w);
    std::vector<double> im(w, 0.0);
    detail::fft_complex(re.data(), im.data(), w, -1);
    double* orr = out_re.data() + fr * bins;
    double* ori = out_im.data() + fr * bins;
    for (std::size_t k = 0; k < bins; ++k) {
      orr[k] = re[k];
      ori[k] = im[k];
    }
  }

  RdftOutput out{make_raw({f, bins}, std::move(out_re)), make_raw({f, bins}, std::move(out_im))};
  attach_node("rdft", {frames}, {out.re, out.im}, {0}, false, [f, w, bins](Node& n) {
    const auto* gre = n.output_grad(0);
    const auto* gim = n.output_grad(1);
    if (!gre && !gim) return;
    auto& in = *n.inputs[0];
    if (!in.tracked()) return;
    std::vector<double> gx(f * w);
    const int nt2 = kernel_threads();
#pragma omp parallel for schedule(static) num_threads(nt2) if (f > 8)
    for (std::ptrdiff_t fr = 0; fr < static_cast<std::ptrdiff_t>(f); ++fr) {
      std::vector<double> re(w, 0.0), im(w, 0.0);
      for (std::size_t k = 0; k < bins; ++k) {
        if (gre) re[k] = (*gre)[fr * bins + k];
        if (gim) im[k] = (*gim)[fr * bins + k];
      }
      detail::fft_complex(re.data(), im.data(), w, +1);
      double* gr = gx.data() + fr * w;
      for (std::size_t j = 0; j < w; ++j) gr[j] = re[j];
    }
    detail::accumulate_grad(in, gx.data(), gx.size());
  });
  return out;
}

}  // namespace pwg
