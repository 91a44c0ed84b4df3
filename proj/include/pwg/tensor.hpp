#pragma once

#include <cstddef>
#include <memory>
#include <vector>

#include "pwg/rng.hpp"

namespace pwg {

namespace detail {
struct TensorImpl;
struct Node;
}  // namespace detail

enum class Padding { kSame, kNone };

// Dense row-major tensor of f64 with reverse-mode automatic differentiation.
// A Tensor is a shared handle: copies alias the same storage and graph node.
// Leaves created with requires_grad=true accumulate gradients across all
// uses; intermediate results carry a reference to the operation that
// produced them so that backward() can replay the graph in reverse
// topological order.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(std::vector<std::size_t> shape, bool requires_grad = false);
  static Tensor full(std::vector<std::size_t> shape, double value, bool requires_grad = false);
  static Tensor from_data(std::vector<std::size_t> shape, std::vector<double> data,
                          bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);
  static Tensor randn(std::vector<std::size_t> shape, Rng& rng, double stddev = 1.0,
                      bool requires_grad = false);

  bool defined() const { return impl_ != nullptr; }
  const std::vector<std::size_t>& shape() const;
  std::size_t numel() const;
  std::size_t dim() const;
  std::size_t extent(std::size_t axis) const;

  const std::vector<double>& data() const;
  // Direct mutation is only meaningful for leaves (parameters, buffers);
  // mutating a graph intermediate invalidates recorded gradients.
  std::vector<double>& mutable_data();
  double value() const;  // scalar tensors only

  bool requires_grad() const;
  void set_requires_grad(bool v);
  bool tracked() const;  // participates in the current graph
  bool has_grad() const;
  const std::vector<double>& grad() const;
  void zero_grad();

  // Value copy detached from any graph.
  Tensor detach() const;

  std::shared_ptr<detail::TensorImpl> impl() const { return impl_; }
  explicit Tensor(std::shared_ptr<detail::TensorImpl> impl) : impl_(std::move(impl)) {}

 private:
  std::shared_ptr<detail::TensorImpl> impl_;
};

struct RdftOutput {
  Tensor re;
  Tensor im;
};

// Elementwise. Operands must agree in shape; a scalar (numel==1) operand
// broadcasts against any shape.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);
Tensor add_scalar(const Tensor& a, double c);
Tensor scale(const Tensor& a, double c);
Tensor tanh(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor leaky_relu(const Tensor& a, double alpha);
Tensor relu(const Tensor& a);
Tensor log(const Tensor& a);   // rejects non-positive entries
Tensor sqrt(const Tensor& a);  // rejects negative entries
Tensor square(const Tensor& a);
Tensor abs(const Tensor& a);

// Reductions over all elements; result is a scalar tensor of shape {1}.
Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
Tensor frobenius_norm(const Tensor& a);
Tensor l1_norm(const Tensor& a);

// Structure.
Tensor reshape(const Tensor& a, std::vector<std::size_t> new_shape);
Tensor slice_rows(const Tensor& a, std::size_t row_begin, std::size_t row_end);
// Nearest-neighbor repetition of each column of a 2-D tensor.
Tensor repeat_cols(const Tensor& a, std::size_t factor);
// Slice a 1-D signal into hopped windows, multiply by `window` and zero-pad
// each frame to fft_size columns. Frame f starts at f*hop.
Tensor frame_windowed(const Tensor& x, std::size_t win_size, std::size_t hop,
                      std::size_t fft_size, const std::vector<double>& window);

// Non-causal dilated 1-D convolution.
//   input  [C_in x T], weight [C_out x C_in x K], bias [C_out]
// Same padding requires odd K and pads dilation*(K-1)/2 zeros per side.
Tensor conv1d(const Tensor& input, const Tensor& weight, const Tensor& bias,
              std::size_t dilation, Padding padding);

// 2-D convolution with same padding (odd kernel extents).
//   input [C_in x H x W], weight [C_out x C_in x Kh x Kw], bias [C_out]
Tensor conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias);

// Real DFT of each row: frames [F x W] -> re/im [F x (W/2+1)], W a power of
// two. X[k] = sum_n x[n] exp(-2*pi*i*k*n/W); linear, so the gradient is the
// adjoint transform.
RdftOutput rdft(const Tensor& frames);

// Weight normalization: w[c] = g[c] * v[c] / ||v[c]||_2, the norm taken over
// all non-leading (non-output-channel) dimensions of v.
Tensor weight_norm_apply(const Tensor& v, const Tensor& g);

// Reverse-mode differentiation from a scalar loss. Populates grad on every
// requires_grad leaf reachable from `loss`. Each graph may be traversed
// once; rebuilding the forward pass is required for another backward.
// With trim_values=true, intermediate value buffers that the traversal does
// not need are released first (forward values of linear ops and the like).
void backward(const Tensor& loss, bool trim_values = false);

// Scoped suppression of graph recording (inference mode).
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool prev_;
};

bool grad_enabled();

}  // namespace pwg
