#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "ctl/ops.hpp"

namespace ctl {

template <typename T>
using NamedTensors = std::vector<std::pair<std::string, Tensor<T>>>;

// A 1x1 convolution over a node/feature grid is a per-position affine map.
template <typename T>
struct Linear {
  Tensor<T> weight;  // [in, out]
  std::optional<Tensor<T>> bias;

  Tensor<T> operator()(const Tensor<T>& x) const { return linear(x, weight, bias); }
  std::size_t in_features() const { return weight.shape()[0]; }
  std::size_t out_features() const { return weight.shape()[1]; }
  void collect(const std::string& prefix, NamedTensors<T>& out) const;
};

// Uniform(-1/sqrt(in), 1/sqrt(in)) for weight and bias.
template <typename T>
Linear<T> make_linear(std::size_t in, std::size_t out, bool with_bias, std::mt19937_64& rng);

// Batch normalization over the last axis; statistics are taken across every
// other position.
template <typename T>
struct BatchNorm {
  Tensor<T> gamma;  // learnable scale [C]
  Tensor<T> beta;   // learnable shift [C]
  Tensor<T> running_mean;
  Tensor<T> running_var;
  T momentum = T(0.1);
  T eps = T(1e-5);

  explicit BatchNorm(std::size_t channels = 1);
  std::size_t channels() const { return gamma.numel(); }
  void collect(const std::string& prefix, NamedTensors<T>& params) const;
  void collect_buffers(const std::string& prefix, NamedTensors<T>& buffers) const;
};

// Training mode normalizes with batch statistics and updates the running
// estimates; eval mode uses the running estimates.
template <typename T>
Tensor<T> batchnorm(const Tensor<T>& x, BatchNorm<T>& bn, bool training);

// Linear -> BatchNorm -> ReLU, the "fully connected layer with BN and ReLU"
// embedding unit.
template <typename T>
struct Embedding {
  Linear<T> fc;
  BatchNorm<T> bn;

  Tensor<T> forward(const Tensor<T>& x, bool training) { return relu(batchnorm(fc(x), bn, training)); }
  void collect(const std::string& prefix, NamedTensors<T>& params) const;
  void collect_buffers(const std::string& prefix, NamedTensors<T>& buffers) const;
};

template <typename T>
Embedding<T> make_embedding(std::size_t in, std::size_t out, std::mt19937_64& rng);

}  // namespace ctl
