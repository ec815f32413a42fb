#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "ctl/errors.hpp"
#include "ctl/shape.hpp"

namespace ctl {

template <typename T>
struct TensorNode {
  Shape shape;
  std::vector<T> data;
  std::vector<T> grad;  // empty until something is accumulated
  bool requires_grad = false;

  std::span<T> ensure_grad() {
    if (grad.empty()) grad.assign(data.size(), T(0));
    return grad;
  }
};

template <typename T>
using NodePtr = std::shared_ptr<TensorNode<T>>;

// Handle to a dense row-major array. Copies share storage; forward values are
// never modified once an op has consumed them, only leaf parameters are updated
// in place by the optimizer.
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;
  Tensor(Shape shape, std::vector<T> data, bool requires_grad = false)
      : node_(std::make_shared<TensorNode<T>>()) {
    if (shape.numel() != data.size()) {
      throw DimensionError("tensor data length " + std::to_string(data.size()) +
                           " does not match shape " + shape.str());
    }
    node_->shape = std::move(shape);
    node_->data = std::move(data);
    node_->requires_grad = requires_grad;
  }

  static Tensor zeros(Shape shape, bool requires_grad = false) {
    const auto n = shape.numel();
    return Tensor(std::move(shape), std::vector<T>(n, T(0)), requires_grad);
  }
  static Tensor full(Shape shape, T value, bool requires_grad = false) {
    const auto n = shape.numel();
    return Tensor(std::move(shape), std::vector<T>(n, value), requires_grad);
  }
  static Tensor scalar(T value) { return Tensor(Shape{1}, {value}); }
  static Tensor identity(std::size_t n) {
    auto t = zeros(Shape{n, n});
    for (std::size_t i = 0; i < n; ++i) t.node_->data[i * n + i] = T(1);
    return t;
  }

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  std::size_t rank() const { return node_->shape.rank(); }
  std::size_t dim(int axis) const { return node_->shape.dim(axis); }
  std::size_t numel() const { return node_->data.size(); }

  std::span<const T> data() const { return node_->data; }
  std::span<T> mutable_data() { return node_->data; }
  T item() const {
    if (numel() != 1) throw DimensionError("item() on tensor of shape " + shape().str());
    return node_->data[0];
  }
  T at(std::initializer_list<std::size_t> index) const {
    const auto strides = shape().strides();
    if (index.size() != strides.size()) throw DimensionError("at(): wrong index rank");
    std::size_t off = 0, i = 0;
    for (auto v : index) off += v * strides[i++];
    return node_->data.at(off);
  }

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool value) { node_->requires_grad = value; }
  bool has_grad() const { return !node_->grad.empty(); }
  std::span<const T> grad() const { return node_->grad; }
  void zero_grad() { node_->grad.clear(); }

  // Same values, fresh storage, no gradient tracking.
  Tensor detach() const { return Tensor(shape(), node_->data); }

  template <typename U>
  Tensor<U> cast() const {
    return Tensor<U>(shape(), std::vector<U>(node_->data.begin(), node_->data.end()),
                     requires_grad());
  }

  const NodePtr<T>& node() const { return node_; }

 private:
  NodePtr<T> node_;
};

using Tensorf = Tensor<float>;
using Tensord = Tensor<double>;

template <typename T>
bool all_finite(std::span<const T> values) {
  return std::all_of(values.begin(), values.end(), [](T v) { return std::isfinite(v); });
}

// Ordered record of differentiable operations. Backward replays the records in
// reverse, so every tensor reachable from the loss that requires a gradient
// receives one. A tape is confined to the thread that activated it.
template <typename T>
class GradTape {
 public:
  using BackwardFn = std::function<void(std::span<const T> grad_output, std::span<const T> output)>;

  GradTape() = default;
  GradTape(const GradTape&) = delete;
  GradTape& operator=(const GradTape&) = delete;

  void record(std::vector<NodePtr<T>> inputs, NodePtr<T> output, BackwardFn fn) {
    entries_.push_back({std::move(inputs), std::move(output), std::move(fn)});
  }

  void backward(const Tensor<T>& loss) {
    if (loss.numel() != 1) throw DimensionError("backward() needs a scalar loss, got " + loss.shape().str());
    if (!loss.requires_grad()) throw std::logic_error("backward(): loss does not depend on any parameter");
    loss.node()->ensure_grad()[0] = T(1);
    for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) {
      if (it->output->grad.empty()) continue;
      it->backward(it->output->grad, it->output->data);
    }
    for (const auto& e : entries_) {
      for (const auto& in : e.inputs) {
        if (in->requires_grad && !all_finite<T>(in->grad)) {
          throw NumericError("non-finite gradient for tensor of shape " + in->shape.str());
        }
      }
    }
  }

  std::size_t size() const { return entries_.size(); }
  void clear() { entries_.clear(); }

  static GradTape* active() { return active_; }

 private:
  template <typename U>
  friend class TapeScope;

  struct Entry {
    std::vector<NodePtr<T>> inputs;
    NodePtr<T> output;
    BackwardFn backward;
  };
  std::vector<Entry> entries_;
  static thread_local GradTape* active_;
};

template <typename T>
thread_local GradTape<T>* GradTape<T>::active_ = nullptr;

// Activates a tape for the current thread for the lifetime of the scope.
// Without an active tape, operations run forward only.
template <typename T>
class TapeScope {
 public:
  explicit TapeScope(GradTape<T>& tape) : previous_(GradTape<T>::active_) { GradTape<T>::active_ = &tape; }
  ~TapeScope() { GradTape<T>::active_ = previous_; }
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;

 private:
  GradTape<T>* previous_;
};

// Builds the output of an operation and, when a tape is active and any input
// requires a gradient, records `backward` for it. `backward` receives the
// output gradient and the output values and must accumulate into the inputs'
// grad buffers.
template <typename T>
Tensor<T> record_op(Shape shape, std::vector<T> data, std::initializer_list<Tensor<T>> inputs,
                    typename GradTape<T>::BackwardFn backward) {
  Tensor<T> out(std::move(shape), std::move(data));
  auto* tape = GradTape<T>::active();
  if (tape == nullptr) return out;
  bool needs = false;
  std::vector<NodePtr<T>> nodes;
  nodes.reserve(inputs.size());
  for (const auto& in : inputs) {
    needs = needs || in.requires_grad();
    nodes.push_back(in.node());
  }
  if (!needs) return out;
  out.set_requires_grad(true);
  tape->record(std::move(nodes), out.node(), std::move(backward));
  return out;
}

// Grad buffer of `t` if it participates in differentiation, else empty.
template <typename T>
std::span<T> grad_sink(const Tensor<T>& t) {
  if (!t.requires_grad()) return {};
  return t.node()->ensure_grad();
}

}  // namespace ctl
