#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "pwg/tensor.hpp"

namespace pwg::detail {

struct Node;

struct TensorImpl {
  std::vector<std::size_t> shape;
  std::vector<double> data;
  bool requires_grad = false;
  std::vector<double> grad;  // empty until first accumulation / zero_grad
  std::shared_ptr<Node> producer;

  std::size_t numel() const {
    std::size_t n = 1;
    for (auto e : shape) n *= e;
    return n;
  }
  bool tracked() const { return requires_grad || producer != nullptr; }
};

// One recorded operation. Inputs are owned (keeps upstream alive), outputs
// are weak: an output nobody consumes contributes zero gradient.
struct Node {
  const char* name = "";
  std::vector<std::shared_ptr<TensorImpl>> inputs;
  std::vector<std::weak_ptr<TensorImpl>> outputs;
  // Which input/output VALUE buffers the backward pass reads. Used both for
  // correctness (trim keeps them) and memory trimming.
  std::vector<std::uint8_t> needs_input_value;
  bool needs_output_value = false;
  bool grad_done = false;
  std::function<void(Node&)> backward_fn;

  // Gradient of output `idx`, or nullptr when absent (treated as zero).
  const std::vector<double>* output_grad(std::size_t idx) const {
    if (idx >= outputs.size()) return nullptr;
    auto impl = outputs[idx].lock();
    if (!impl || impl->grad.empty()) return nullptr;
    return &impl->grad;
  }
  std::shared_ptr<TensorImpl> output_impl(std::size_t idx) const {
    return idx < outputs.size() ? outputs[idx].lock() : nullptr;
  }
};

// Accumulate g into t's grad buffer if t participates in the graph.
void accumulate_grad(TensorImpl& t, const double* g, std::size_t n);
// Same, but with a scale factor applied.
void accumulate_grad_scaled(TensorImpl& t, const double* g, std::size_t n, double scale);
// Moves g in when no gradient has been accumulated yet (the common
// single-consumer case), otherwise adds.
void accumulate_grad_take(TensorImpl& t, std::vector<double>&& g);
// Accumulate a constant into every gradient element.
void accumulate_grad_const(TensorImpl& t, double c);

Tensor make_raw(std::vector<std::size_t> shape, std::vector<double> data);

// Attach a single-output node. Returns out for chaining.
void attach_node(const char* name, std::vector<Tensor> inputs, const std::vector<Tensor>& outputs,
                 std::vector<std::uint8_t> needs_input_value, bool needs_output_value,
                 std::function<void(Node&)> backward_fn);

bool any_tracked(const std::vector<Tensor>& ts);

}  // namespace pwg::detail
