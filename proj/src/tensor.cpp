#include "pwg/tensor.hpp"

#include <algorithm>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

#include "pwg/common.hpp"
#include "tensor_impl.hpp"

namespace pwg {

namespace {
thread_local bool g_grad_enabled = true;

std::size_t shape_numel(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (auto e : shape) n *= e;
  return n;
}
}  // namespace

NoGradGuard::NoGradGuard() : prev_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = prev_; }
bool grad_enabled() { return g_grad_enabled; }

Tensor Tensor::zeros(std::vector<std::size_t> shape, bool requires_grad) {
  auto impl = std::make_shared<detail::TensorImpl>();
  impl->data.assign(shape_numel(shape), 0.0);
  impl->shape = std::move(shape);
  impl->requires_grad = requires_grad;
  return Tensor(std::move(impl));
}

Tensor Tensor::full(std::vector<std::size_t> shape, double value, bool requires_grad) {
  Tensor t = zeros(std::move(shape), requires_grad);
  std::fill(t.impl()->data.begin(), t.impl()->data.end(), value);
  return t;
}

Tensor Tensor::from_data(std::vector<std::size_t> shape, std::vector<double> data,
                         bool requires_grad) {
  if (shape_numel(shape) != data.size()) {
    throw std::invalid_argument("Tensor::from_data: shape does not match data length");
  }
  auto impl = std::make_shared<detail::TensorImpl>();
  impl->shape = std::move(shape);
  impl->data = std::move(data);
  impl->requires_grad = requires_grad;
  return Tensor(std::move(impl));
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return from_data({1}, {value}, requires_grad);
}

Tensor Tensor::randn(std::vector<std::size_t> shape, Rng& rng, double stddev,
                     bool requires_grad) {
  Tensor t = zeros(std::move(shape), requires_grad);
  for (auto& v : t.impl()->data) v = stddev * rng.gaussian();
  return t;
}

const std::vector<std::size_t>& Tensor::shape() const {
  if (!impl_) throw std::logic_error("Tensor: empty handle");
  return impl_->shape;
}

std::size_t Tensor::numel() const { return impl_ ? impl_->numel() : 0; }
std::size_t Tensor::dim() const { return shape().size(); }

std::size_t Tensor::extent(std::size_t axis) const {
  const auto& s = shape();
  if (axis >= s.size()) throw std::invalid_argument("Tensor::extent: axis out of range");
  return s[axis];
}

const std::vector<double>& Tensor::data() const {
  if (!impl_) throw std::logic_error("Tensor: empty handle");
  return impl_->data;
}

std::vector<double>& Tensor::mutable_data() {
  if (!impl_) throw std::logic_error("Tensor: empty handle");
  return impl_->data;
}

double Tensor::value() const {
  if (numel() != 1) throw std::invalid_argument("Tensor::value: tensor is not scalar");
  return impl_->data[0];
}

bool Tensor::requires_grad() const { return impl_ && impl_->requires_grad; }

void Tensor::set_requires_grad(bool v) {
  if (!impl_) throw std::logic_error("Tensor: empty handle");
  impl_->requires_grad = v;
}

bool Tensor::tracked() const { return impl_ && impl_->tracked(); }

bool Tensor::has_grad() const { return impl_ && !impl_->grad.empty(); }

const std::vector<double>& Tensor::grad() const {
  if (!has_grad()) throw std::logic_error("Tensor::grad: no gradient present");
  return impl_->grad;
}

void Tensor::zero_grad() {
  if (!impl_) return;
  impl_->grad.assign(impl_->numel(), 0.0);
}

Tensor Tensor::detach() const {
  if (!impl_) return Tensor();
  auto impl = std::make_shared<detail::TensorImpl>();
  impl->shape = impl_->shape;
  impl->data = impl_->data;
  return Tensor(std::move(impl));
}

namespace detail {

Tensor make_raw(std::vector<std::size_t> shape, std::vector<double> data) {
  auto impl = std::make_shared<TensorImpl>();
  impl->shape = std::move(shape);
  impl->data = std::move(data);
  return Tensor(std::move(impl));
}

bool any_tracked(const std::vector<Tensor>& ts) {
  for (const auto& t : ts)
    if (t.defined() && t.tracked()) return true;
  return false;
}

void accumulate_grad(TensorImpl& t, const double* g, std::size_t n) {
  if (!t.tracked()) return;
  if (t.grad.empty()) t.grad.assign(t.numel(), 0.0);
  double* dst = t.grad.data();
  for (std::size_t i = 0; i < n; ++i) dst[i] += g[i];
}

void accumulate_grad_scaled(TensorImpl& t, const double* g, std::size_t n, double scale) {
  if (!t.tracked()) return;
  if (t.grad.empty()) t.grad.assign(t.numel(), 0.0);
  double* dst = t.grad.data();
  for (std::size_t i = 0; i < n; ++i) dst[i] += scale * g[i];
}

void accumulate_grad_take(TensorImpl& t, std::vector<double>&& g) {
  if (!t.tracked()) return;
  if (t.grad.empty()) {
    t.grad = std::move(g);
    return;
  }
  double* dst = t.grad.data();
  for (std::size_t i = 0; i < g.size(); ++i) dst[i] += g[i];
}

void accumulate_grad_const(TensorImpl& t, double c) {
  if (!t.tracked()) return;
  if (t.grad.empty()) {
    t.grad.assign(t.numel(), c);
    return;
  }
  for (auto& v : t.grad) v += c;
}

void attach_node(const char* name, std::vector<Tensor> inputs, const std::vector<Tensor>& outputs,
                 std::vector<std::uint8_t> needs_input_value, bool needs_output_value,
                 std::function<void(Node&)> backward_fn) {
  if (!g_grad_enabled) return;
  std::vector<Tensor> in_vec = std::move(inputs);
  if (!any_tracked(in_vec)) return;
  auto node = std::make_shared<Node>();
  node->name = name;
  node->inputs.reserve(in_vec.size());
  for (auto& t : in_vec) node->inputs.push_back(t.impl());
  node->outputs.reserve(outputs.size());
  for (const auto& t : outputs) node->outputs.push_back(t.impl());
  node->needs_input_value = std::move(needs_input_value);
  if (node->needs_input_value.empty()) node->needs_input_value.assign(node->inputs.size(), 0);
  node->needs_output_value = needs_output_value;
  node->backward_fn = std::move(backward_fn);
  for (const auto& t : outputs) t.impl()->producer = node;
}

namespace {

std::vector<Node*> topo_order_from(Node* root) {
  // Iterative postorder DFS: producers come before consumers in `order`.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack;
  visited.insert(root);
  stack.emplace_back(root, 0);
  while (!stack.empty()) {
    auto& [node, idx] = stack.back();
    if (idx < node->inputs.size()) {
      Node* child = node->inputs[idx]->producer.get();
      ++idx;
      if (child != nullptr && visited.insert(child).second) {
        stack.emplace_back(child, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  return order;
}

void trim_values(const std::vector<Node*>& order, TensorImpl* root) {
  std::unordered_set<TensorImpl*> keep;
  for (Node* node : order) {
    for (std::size_t i = 0; i < node->inputs.size(); ++i) {
      if (i < node->needs_input_value.size() && node->needs_input_value[i]) {
        keep.insert(node->inputs[i].get());
      }
    }
    if (node->needs_output_value) {
      for (auto& w : node->outputs) {
        if (auto impl = w.lock()) keep.insert(impl.get());
      }
    }
  }
  for (Node* node : order) {
    for (auto& w : node->outputs) {
      auto impl = w.lock();
      if (!impl) continue;
      TensorImpl* p = impl.get();
      // Only graph-owned intermediates may be dropped; leaves and external
      // constants keep their storage.
      if (p == root || p->requires_grad || keep.count(p)) continue;
      p->data.clear();
      p->data.shrink_to_fit();
    }
  }
}

}  // namespace
}  // namespace detail

void backward(const Tensor& loss, bool trim) {
  using detail::Node;
  if (!loss.defined()) throw std::invalid_argument("backward: empty tensor");
  if (loss.numel() != 1) throw std::invalid_argument("backward: loss must be scalar");
  auto impl = loss.impl();
  if (!impl->producer) {
    throw std::logic_error("backward: loss is detached from any recorded graph");
  }
  std::vector<Node*> order = detail::topo_order_from(impl->producer.get());
  for (Node* node : order) {
    if (node->grad_done) {
      throw std::logic_error("backward: graph already traversed; rebuild the forward pass");
    }
  }
  if (trim) detail::trim_values(order, impl.get());

  impl->grad.assign(1, 1.0);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* node = *it;
    node->backward_fn(*node);
    node->grad_done = true;
    // Output gradients are complete and consumed; release them.
    for (auto& w : node->outputs) {
      if (auto out = w.lock(); out && !out->requires_grad) {
        out->grad.clear();
        out->grad.shrink_to_fit();
      }
    }
  }
}

}  // namespace pwg
