#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "pwg/common.hpp"
#include "pwg/tensor.hpp"
#include "fastmath.hpp"
#include "reduce.hpp"
#include "tensor_impl.hpp"

namespace pwg {

using detail::accumulate_grad;
using detail::accumulate_grad_scaled;
using detail::attach_node;
using detail::make_raw;
using detail::Node;

namespace {

void check_defined(const Tensor& t, const char* op) {
  if (!t.defined()) throw std::invalid_argument(std::string(op) + ": empty tensor");
}

// Shape agreement for binary elementwise ops: identical shapes, or one side
// scalar (numel == 1).
enum class BinMode { kElementwise, kScalarLeft, kScalarRight };

BinMode binary_mode(const Tensor& a, const Tensor& b, const char* op) {
  check_defined(a, op);
  check_defined(b, op);
  if (a.shape() == b.shape()) return BinMode::kElementwise;
  if (a.numel() == 1) return BinMode::kScalarLeft;
  if (b.numel() == 1) return BinMode::kScalarRight;
  throw std::invalid_argument(std::string(op) + ": shape mismatch (broadcast limited to scalars)");
}

const std::vector<std::size_t>& result_shape(BinMode m, const Tensor& a, const Tensor& b) {
  return m == BinMode::kScalarLeft ? b.shape() : a.shape();
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  const BinMode m = binary_mode(a, b, "add");
  const auto& xa = a.data();
  const auto& xb = b.data();
  std::vector<double> out;
  if (m == BinMode::kElementwise) {
    out.resize(xa.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = xa[i] + xb[i];
  } else if (m == BinMode::kScalarLeft) {
    const double s = xa[0];
    out.resize(xb.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = s + xb[i];
  } else {
    const double s = xb[0];
    out.resize(xa.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = xa[i] + s;
  }
  Tensor r = make_raw(result_shape(m, a, b), std::move(out));
  attach_node("add", {a, b}, {r}, {0, 0}, false, [m](Node& n) {
    const auto* g = n.output_grad(0);
    if (!g) return;
    auto& ia = *n.inputs[0];
    auto& ib = *n.inputs[1];
    if (m == BinMode::kScalarLeft) {
      const double s = detail::det_sum(g->data(), g->size());
      accumulate_grad(ia, &s, 1);
      accumulate_grad(ib, g->data(), g->size());
    } else if (m == BinMode::kScalarRight) {
      accumulate_grad(ia, g->data(), g->size());
      const double s = detail::det_sum(g->data(), g->size());
      accumulate_grad(ib, &s, 1);
    } else {
      accumulate_grad(ia, g->data(), g->size());
      accumulate_grad(ib, g->data(), g->size());
    }
  });
  return r;
}

Tensor sub(const Tensor& a, const Tensor& b) {
  const BinMode m = binary_mode(a, b, "sub");
  const auto& xa = a.data();
  const auto& xb = b.data();
  std::vector<double> out;
  if (m == BinMode::kElementwise) {
    out.resize(xa.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = xa[i] - xb[i];
  } else if (m == BinMode::kScalarLeft) {
    const double s = xa[0];
    out.resize(xb.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = s - xb[i];
  } else {
    const double s = xb[0];
    out.resize(xa.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = xa[i] - s;
  }
  Tensor r = make_raw(result_shape(m, a, b), std::move(out));
  attach_node("sub", {a, b}, {r}, {0, 0}, false, [m](Node& n) {
    const auto* g = n.output_grad(0);
    if (!g) return;
    auto& ia = *n.inputs[0];
    auto& ib = *n.inputs[1];
    if (m == BinMode::kScalarLeft) {
      const double s = detail::det_sum(g->data(), g->size());
      accumulate_grad(ia, &s, 1);
      accumulate_grad_scaled(ib, g->data(), g->size(), -1.0);
    } else if (m == BinMode::kScalarRight) {
      accumulate_grad(ia, g->data(), g->size());
      const double s = -detail::det_sum(g->data(), g->size());
      accumulate_grad(ib, &s, 1);
    } else {
      accumulate_grad(ia, g->data(), g->size());
      accumulate_grad_scaled(ib, g->data(), g->size(), -1.0);
    }
  });
  return r;
}

Tensor mul(const Tensor& a, const Tensor& b) {
  const BinMode m = binary_mode(a, b, "mul");
  const auto& xa = a.data();
  const auto& xb = b.data();
  std::vector<double> out;
  if (m == BinMode::kElementwise) {
    out.resize(xa.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = xa[i] * xb[i];
  } else if (m == BinMode::kScalarLeft) {
    const double s = xa[0];
    out.resize(xb.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = s * xb[i];
  } else {
    const double s = xb[0];
    out.resize(xa.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = xa[i] * s;
  }
  Tensor r = make_raw(result_shape(m, a, b), std::move(out));
  attach_node("mul", {a, b}, {r}, {1, 1}, false, [m](Node& n) {
    const auto* g = n.output_grad(0);
    if (!g) return;
    auto& ia = *n.inputs[0];
    auto& ib = *n.inputs[1];
    const auto& va = ia.data;
    const auto& vb = ib.data;
    if (m == BinMode::kScalarLeft) {
      const double s = detail::det_dot(g->data(), vb.data(), g->size());
      accumulate_grad(ia, &s, 1);
      accumulate_grad_scaled(ib, g->data(), g->size(), va[0]);
    } else if (m == BinMode::kScalarRight) {
      accumulate_grad_scaled(ia, g->data(), g->size(), vb[0]);
      const double s = detail::det_dot(g->data(), va.data(), g->size());
      accumulate_grad(ib, &s, 1);
    } else {
      if (ia.tracked()) {
        std::vector<double> ga(g->size());
        for (std::size_t i = 0; i < ga.size(); ++i) ga[i] = (*g)[i] * vb[i];
        detail::accumulate_grad_take(ia, std::move(ga));
      }
      if (ib.tracked()) {
        std::vector<double> gb(g->size());
        for (std::size_t i = 0; i < gb.size(); ++i) gb[i] = (*g)[i] * va[i];
        detail::accumulate_grad_take(ib, std::move(gb));
      }
    }
  });
  return r;
}

Tensor div(const Tensor& a, const Tensor& b) {
  const BinMode m = binary_mode(a, b, "div");
  const auto& xa = a.data();
  const auto& xb = b.data();
  std::vector<double> out;
  if (m == BinMode::kElementwise) {
    out.resize(xa.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = xa[i] / xb[i];
  } else if (m == BinMode::kScalarLeft) {
    const double s = xa[0];
    out.resize(xb.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = s / xb[i];
  } else {
    const double inv = 1.0 / xb[0];
    out.resize(xa.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = xa[i] * inv;
  }
  Tensor r = make_raw(result_shape(m, a, b), std::move(out));
  attach_node("div", {a, b}, {r}, {0, 1}, true, [m](Node& n) {
    const auto* g = n.output_grad(0);
    if (!g) return;
    auto out_impl = n.output_impl(0);
    const auto& vout = out_impl->data;
    auto& ia = *n.inputs[0];
    auto& ib = *n.inputs[1];
    const auto& vb = ib.data;
    if (m == BinMode::kScalarLeft) {
      if (ia.tracked()) {
        double s = 0.0;
        for (std::size_t i = 0; i < g->size(); ++i) s += (*g)[i] / vb[i];
        accumulate_grad(ia, &s, 1);
      }
      if (ib.tracked()) {
        std::vector<double> gb(g->size());
        for (std::size_t i = 0; i < gb.size(); ++i) gb[i] = -(*g)[i] * vout[i] / vb[i];
        detail::accumulate_grad_take(ib, std::move(gb));
      }
    } else if (m == BinMode::kScalarRight) {
      accumulate_grad_scaled(ia, g->data(), g->size(), 1.0 / vb[0]);
      if (ib.tracked()) {
        const double s = -detail::det_dot(g->data(), vout.data(), g->size()) / vb[0];
        accumulate_grad(ib, &s, 1);
      }
    } else {
      if (ia.tracked()) {
        std::vector<double> ga(g->size());
        for (std::size_t i = 0; i < ga.size(); ++i) ga[i] = (*g)[i] / vb[i];
        detail::accumulate_grad_take(ia, std::move(ga));
      }
      if (ib.tracked()) {
        std::vector<double> gb(g->size());
        for (std::size_t i = 0; i < gb.size(); ++i) gb[i] = -(*g)[i] * vout[i] / vb[i];
        detail::accumulate_grad_take(ib, std::move(gb));
      }
    }
  });
  return r;
}

Tensor add_scalar(const Tensor& a, double c) {
  check_defined(a, "add_scalar");
  std::vector<double> out(a.numel());
  const auto& x = a.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] + c;
  Tensor r = make_raw(a.shape(), std::move(out));
  attach_node("add_scalar", {a}, {r}, {0}, false, [](Node& n) {
    if (const auto* g = n.output_grad(0)) accumulate_grad(*n.inputs[0], g->data(), g->size());
  });
  return r;
}

Tensor scale(const Tensor& a, double c) {
  check_defined(a, "scale");
  std::vector<double> out(a.numel());
  const auto& x = a.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] * c;
  Tensor r = make_raw(a.shape(), std::move(out));
  attach_node("scale", {a}, {r}, {0}, false, [c](Node& n) {
    if (const auto* g = n.output_grad(0))
      accumulate_grad_scaled(*n.inputs[0], g->data(), g->size(), c);
  });
  return r;
}

Tensor tanh(const Tensor& a) {
  check_defined(a, "tanh");
  std::vector<double> out(a.numel());
  const auto& x = a.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = detail::fast_tanh(x[i]);
  Tensor r = make_raw(a.shape(), std::move(out));
  attach_node("tanh", {a}, {r}, {0}, true, [](Node& n) {
    const auto* g = n.output_grad(0);
    if (!g) return;
    auto& in = *n.inputs[0];
    if (!in.tracked()) return;
    const auto& y = n.output_impl(0)->data;
    std::vector<double> gx(g->size());
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] = (*g)[i] * (1.0 - y[i] * y[i]);
    detail::accumulate_grad_take(in, std::move(gx));
  });
  return r;
}

Tensor sigmoid(const Tensor& a) {
  check_defined(a, "sigmoid");
  std::vector<double> out(a.numel());
  const auto& x = a.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = detail::fast_sigmoid(x[i]);
  Tensor r = make_raw(a.shape(), std::move(out));
  attach_node("sigmoid", {a}, {r}, {0}, true, [](Node& n) {
    const auto* g = n.output_grad(0);
    if (!g) return;
    auto& in = *n.inputs[0];
    if (!in.tracked()) return;
    const auto& y = n.output_impl(0)->data;
    std::vector<double> gx(g->size());
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] = (*g)[i] * y[i] * (1.0 - y[i]);
    detail::accumulate_grad_take(in, std::move(gx));
  });
  return r;
}

Tensor leaky_relu(const Tensor& a, double alpha) {
  check_defined(a, "leaky_relu");
  std::vector<double> out(a.numel());
  const auto& x = a.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] >= 0.0 ? x[i] : alpha * x[i];
  Tensor r = make_raw(a.shape(), std::move(out));
  attach_node("leaky_relu", {a}, {r}, {1}, false, [alpha](Node& n) {
    const auto* g = n.output_grad(0);
    if (!g) return;
    auto& in = *n.inputs[0];
    if (!in.tracked()) return;
    const auto& x = in.data;
    std::vector<double> gx(g->size());
    for (std::size_t i = 0; i < gx.size(); ++i)
      gx[i] = x[i] >= 0.0 ? (*g)[i] : alpha * (*g)[i];
    detail::accumulate_grad_take(in, std::move(gx));
  });
  return r;
}

Tensor relu(const Tensor& a) { return leaky_relu(a, 0.0); }

Tensor log(const Tensor& a) {
  check_defined(a, "log");
  const auto& x = a.data();
  bool bad = false;
  for (std::size_t i = 0; i < x.size(); ++i) bad |= !(x[i] > 0.0);
  if (bad) throw NumericError("log: non-positive input");
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = detail::fast_log(x[i]);
  Tensor r = make_raw(a.shape(), std::move(out));
  attach_node("log", {a}, {r}, {1}, false, [](Node& n) {
    const auto* g = n.output_grad(0);
    if (!g) return;
    auto& in = *n.inputs[0];
    if (!in.tracked()) return;
    const auto& x = in.data;
    std::vector<double> gx(g->size());
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] = (*g)[i] / x[i];
    detail::accumulate_grad_take(in, std::move(gx));
  });
  return r;
}

Tensor sqrt(const Tensor& a) {
  check_defined(a, "sqrt");
  const auto& x = a.data();
  bool bad = false;
  for (std::size_t i = 0; i < x.size(); ++i) bad |= x[i] < 0.0;
  if (bad) throw NumericError("sqrt: negative input");
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::sqrt(x[i]);
  Tensor r = make_raw(a.shape(), std::move(out));
  attach_node("sqrt", {a}, {r}, {0}, true, [](Node& n) {
    const auto* g = n.output_grad(0);
    if (!g) return;
    auto& in = *n.inputs[0];
    if (!in.tracked()) return;
    const auto& y = n.output_impl(0)->data;
    std::vector<double> gx(g->size());
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] = (*g)[i] / (2.0 * y[i]);
    detail::accumulate_grad_take(in, std::move(gx));
  });
  return r;
}

Tensor square(const Tensor& a) {
  check_defined(a, "square");
  const auto& x = a.data();
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] * x[i];
  Tensor r = make_raw(a.shape(), std::move(out));
  attach_node("square", {a}, {r}, {1}, false, [](Node& n) {
    const auto* g = n.output_grad(0);
    if (!g) return;
    auto& in = *n.inputs[0];
    if (!in.tracked()) return;
    const auto& x = in.data;
    std::vector<double> gx(g->size());
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] = 2.0 * x[i] * (*g)[i];
    detail::accumulate_grad_take(in, std::move(gx));
  });
  return r;
}

Tensor abs(const Tensor& a) {
  check_defined(a, "abs");
  const auto& x = a.data();
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::fabs(x[i]);
  Tensor r = make_raw(a.shape(), std::move(out));
  attach_node("abs", {a}, {r}, {1}, false, [](Node& n) {
    const auto* g = n.output_grad(0);
    if (!g) return;
    auto& in = *n.inputs[0];
    if (!in.tracked()) return;
    const auto& x = in.data;
    std::vector<double> gx(g->size());
    for (std::size_t i = 0; i < gx.size(); ++i)
      gx[i] = x[i] > 0.0 ? (*g)[i] : (x[i] < 0.0 ? -(*g)[i] : 0.0);
    detail::accumulate_grad_take(in, std::move(gx));
  });
  return r;
}

namespace {
void check_nonempty(const Tensor& a, const char* op) {
  check_defined(a, op);
  if (a.numel() == 0) throw std::invalid_argument(std::string(op) + ": empty tensor");
}
}  // namespace

Tensor sum(const Tensor& a) {
  check_nonempty(a, "sum");
  Tensor r = make_raw({1}, {detail::det_sum(a.data().data(), a.numel())});
  attach_node("sum", {a}, {r}, {0}, false, [](Node& n) {
    const auto* g = n.output_grad(0);
    if (!g) return;
    auto& in = *n.inputs[0];
    if (!in.tracked()) return;
    detail::accumulate_grad_const(in, (*g)[0]);
  });
  return r;
}

Tensor mean(const Tensor& a) {
  check_nonempty(a, "mean");
  const double n_inv = 1.0 / static_cast<double>(a.numel());
  Tensor r = make_raw({1}, {detail::det_sum(a.data().data(), a.numel()) * n_inv});
  attach_node("mean", {a}, {r}, {0}, false, [n_inv](Node& n) {
    const auto* g = n.output_grad(0);
    if (!g) return;
    auto& in = *n.inputs[0];
    if (!in.tracked()) return;
    detail::accumulate_grad_const(in, (*g)[0] * n_inv);
  });
  return r;
}

Tensor frobenius_norm(const Tensor& a) {
  check_nonempty(a, "frobenius_norm");
  Tensor r = make_raw({1}, {std::sqrt(detail::det_sumsq(a.data().data(), a.numel()))});
  attach_node("frobenius_norm", {a}, {r}, {1}, true, [](Node& n) {
    const auto* g = n.output_grad(0);
    if (!g) return;
    auto& in = *n.inputs[0];
    if (!in.tracked()) return;
    const double norm = n.output_impl(0)->data[0];
    if (norm == 0.0) return;  // gradient of ||x|| at x = 0 taken as 0
    const double s = (*g)[0] / norm;
    accumulate_grad_scaled(in, in.data.data(), in.numel(), s);
  });
  return r;
}

Tensor l1_norm(const Tensor& a) {
  check_nonempty(a, "l1_norm");
  Tensor r = make_raw({1}, {detail::det_sum_abs(a.data().data(), a.numel())});
  attach_node("l1_norm", {a}, {r}, {1}, false, [](Node& n) {
    const auto* g = n.output_grad(0);
    if (!g) return;
    auto& in = *n.inputs[0];
    if (!in.tracked()) return;
    const auto& x = in.data;
    std::vector<double> gx(x.size());
    for (std::size_t i = 0; i < gx.size(); ++i)
      gx[i] = x[i] > 0.0 ? (*g)[0] : (x[i] < 0.0 ? -(*g)[0] : 0.0);
    detail::accumulate_grad_take(in, std::move(gx));
  });
  return r;
}

Tensor reshape(const Tensor& a, std::vector<std::size_t> new_shape) {
  check_defined(a, "reshape");
  std::size_t n = 1;
  for (auto e : new_shape) n *= e;
  if (n != a.numel()) throw std::invalid_argument("reshape: element count mismatch");
  Tensor r = make_raw(std::move(new_shape), a.data());
  attach_node("reshape", {a}, {r}, {0}, false, [](Node& n2) {
    if (const auto* g = n2.output_grad(0)) accumulate_grad(*n2.inputs[0], g->data(), g->size());
  });
  return r;
}

Tensor slice_rows(const Tensor& a, std::size_t row_begin, std::size_t row_end) {
  check_defined(a, "slice_rows");
  if (a.dim() != 2) throw std::invalid_argument("slice_rows: tensor must be 2-D");
  const std::size_t rows = a.extent(0), cols = a.extent(1);
  if (row_begin >= row_end || row_end > rows)
    throw std::invalid_argument("slice_rows: row range out of bounds");
  const auto& x = a.data();
  std::vector<double> out((row_end - row_begin) * cols);
  std::copy(x.begin() + static_cast<std::ptrdiff_t>(row_begin * cols),
            x.begin() + static_cast<std::ptrdiff_t>(row_end * cols), out.begin());
  Tensor r = make_raw({row_end - row_begin, cols}, std::move(out));
  attach_node("slice_rows", {a}, {r}, {0}, false, [row_begin, cols](Node& n) {
    const auto* g = n.output_grad(0);
    if (!g) return;
    auto& in = *n.inputs[0];
    if (!in.tracked()) return;
    if (in.grad.empty()) in.grad.assign(in.numel(), 0.0);
    double* dst = in.grad.data() + row_begin * cols;
    for (std::size_t i = 0; i < g->size(); ++i) dst[i] += (*g)[i];
  });
  return r;
}

Tensor repeat_cols(const Tensor& a, std::size_t factor) {
  check_defined(a, "repeat_cols");
  if (a.dim() != 2) throw std::invalid_argument("repeat_cols: tensor must be 2-D");
  if (factor == 0) throw std::invalid_argument("repeat_cols: factor must be positive");
  const std::size_t rows = a.extent(0), cols = a.extent(1);
  const auto& x = a.data();
  std::vector<double> out(rows * cols * factor);
  for (std::size_t h = 0; h < rows; ++h) {
    const double* src = x.data() + h * cols;
    double* dst = out.data() + h * cols * factor;
    for (std::size_t w = 0; w < cols; ++w) {
      const double v = src[w];
      for (std::size_t j = 0; j < factor; ++j) dst[w * factor + j] = v;
    }
  }
  Tensor r = make_raw({rows, cols * factor}, std::move(out));
  attach_node("repeat_cols", {a}, {r}, {0}, false, [rows, cols, factor](Node& n) {
    const auto* g = n.output_grad(0);
    if (!g) return;
    auto& in = *n.inputs[0];
    if (!in.tracked()) return;
    std::vector<double> gx(rows * cols);
    for (std::size_t h = 0; h < rows; ++h) {
      const double* gs = g->data() + h * cols * factor;
      double* gd = gx.data() + h * cols;
      for (std::size_t w = 0; w < cols; ++w) {
        double acc = 0.0;
        for (std::size_t j = 0; j < factor; ++j) acc += gs[w * factor + j];
        gd[w] = acc;
      }
    }
    detail::accumulate_grad_take(in, std::move(gx));
  });
  return r;
}

Tensor frame_windowed(const Tensor& x, std::size_t win_size, std::size_t hop,
                      std::size_t fft_size, const std::vector<double>& window) {
  check_defined(x, "frame_windowed");
  if (x.dim() != 1) throw std::invalid_argument("frame_windowed: signal must be 1-D");
  if (win_size == 0 || hop == 0) throw std::invalid_argument("frame_windowed: zero window/hop");
  if (win_size > fft_size) throw std::invalid_argument("frame_windowed: win_size > fft_size");
  if (window.size() != win_size)
    throw std::invalid_argument("frame_windowed: window length mismatch");
  const std::size_t n = x.numel();
  if (n < win_size) throw std::invalid_argument("frame_windowed: signal shorter than one window");
  const std::size_t frames = 1 + (n - win_size) / hop;
  const auto& xs = x.data();
  std::vector<double> out(frames * fft_size, 0.0);
  for (std::size_t f = 0; f < frames; ++f) {
    const double* src = xs.data() + f * hop;
    double* dst = out.data() + f * fft_size;
    for (std::size_t i = 0; i < win_size; ++i) dst[i] = src[i] * window[i];
  }
  Tensor r = make_raw({frames, fft_size}, std::move(out));
  attach_node("frame_windowed", {x}, {r}, {0}, false,
              [frames, win_size, hop, fft_size, window](Node& n2) {
                const auto* g = n2.output_grad(0);
                if (!g) return;
                auto& in = *n2.inputs[0];
                if (!in.tracked()) return;
                std::vector<double> gx(in.numel(), 0.0);
                for (std::size_t f = 0; f < frames; ++f) {
                  const double* gs = g->data() + f * fft_size;
                  double* gd = gx.data() + f * hop;
                  for (std::size_t i = 0; i < win_size; ++i)
                    gd[i] = std::fma(gs[i], window[i], gd[i]);
                }
                detail::accumulate_grad_take(in, std::move(gx));
              });
  return r;
}

Tensor weight_norm_apply(const Tensor& v, const Tensor& g) {
  check_defined(v, "weight_norm_apply");
  check_defined(g, "weight_norm_apply");
  if (v.dim() < 2) throw std::invalid_argument("weight_norm_apply: v must have dim >= 2");
  const std::size_t out_channels = v.extent(0);
  if (g.numel() != out_channels)
    throw std::invalid_argument("weight_norm_apply: g must have one entry per output channel");
  const std::size_t per = v.numel() / out_channels;
  const auto& vv = v.data();
  const auto& vg = g.data();
  std::vector<double> norms(out_channels);
  std::vector<double> out(v.numel());
  for (std::size_t c = 0; c < out_channels; ++c) {
    const double* vc = vv.data() + c * per;
    const double norm = std::sqrt(detail::det_sumsq(vc, per));
    if (!(norm > 1e-12)) throw NumericError("weight_norm_apply: zero-norm direction");
    norms[c] = norm;
    const double s = vg[c] / norm;
    double* oc = out.data() + c * per;
    for (std::size_t i = 0; i < per; ++i) oc[i] = s * vc[i];
  }
  Tensor r = make_raw(v.shape(), std::move(out));
  attach_node("weight_norm_apply", {v, g}, {r}, {1, 1}, false,
              [out_channels, per, norms](Node& n) {
                const auto* gr = n.output_grad(0);
                if (!gr) return;
                auto& iv = *n.inputs[0];
                auto& ig = *n.inputs[1];
                const auto& vv = iv.data;
                const auto& vg = ig.data;
                std::vector<double> gvbuf(iv.tracked() ? vv.size() : 0);
                std::vector<double> ggbuf(ig.tracked() ? out_channels : 0);
                for (std::size_t c = 0; c < out_channels; ++c) {
                  const double* vc = vv.data() + c * per;
                  const double* gc = gr->data() + c * per;
                  const double norm = norms[c];
                  const double dot_vg = detail::det_dot(vc, gc, per);  // v_c . gout_c
                  if (!ggbuf.empty()) ggbuf[c] = dot_vg / norm;
                  if (!gvbuf.empty()) {
                    const double s = vg[c] / norm;
                    const double t = dot_vg / (norm * norm);
                    double* gv = gvbuf.data() + c * per;
                    for (std::size_t i = 0; i < per; ++i) gv[i] = s * (gc[i] - vc[i] * t);
                  }
                }
                if (!gvbuf.empty()) detail::accumulate_grad_take(iv, std::move(gvbuf));
                if (!ggbuf.empty()) detail::accumulate_grad_take(ig, std::move(ggbuf));
              });
  return r;
}

}  // namespace pwg
