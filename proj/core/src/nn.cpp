#include "ctl/nn.hpp"

#include <cmath>

namespace ctl {

template <typename T>
void Linear<T>::collect(const std::string& prefix, NamedTensors<T>& out) const {
  out.emplace_back(prefix + ".weight", weight);
  if (bias) out.emplace_back(prefix + ".bias", *bias);
}

template <typename T>
Linear<T> make_linear(std::size_t in, std::size_t out, bool with_bias, std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  std::vector<T> w(in * out);
  for (auto& v : w) v = static_cast<T>(dist(rng));
  Linear<T> layer{Tensor<T>(Shape{in, out}, std::move(w), true), std::nullopt};
  if (with_bias) {
    std::vector<T> b(out);
    for (auto& v : b) v = static_cast<T>(dist(rng));
    layer.bias = Tensor<T>(Shape{out}, std::move(b), true);
  }
  return layer;
}

template <typename T>
BatchNorm<T>::BatchNorm(std::size_t channels)
    : gamma(Tensor<T>::full(Shape{channels}, T(1), true)),
      beta(Tensor<T>::zeros(Shape{channels}, true)),
      running_mean(Tensor<T>::zeros(Shape{channels})),
      running_var(Tensor<T>::full(Shape{channels}, T(1))) {}

template <typename T>
void BatchNorm<T>::collect(const std::string& prefix, NamedTensors<T>& params) const {
  params.emplace_back(prefix + ".gamma", gamma);
  params.emplace_back(prefix + ".beta", beta);
}

template <typename T>
void BatchNorm<T>::collect_buffers(const std::string& prefix, NamedTensors<T>& buffers) const {
  buffers.emplace_back(prefix + ".running_mean", running_mean);
  buffers.emplace_back(prefix + ".running_var", running_var);
}

template <typename T>
Tensor<T> batchnorm(const Tensor<T>& x, BatchNorm<T>& bn, bool training) {
  const std::size_t c = bn.channels();
  if (x.shape().dim(-1) != c) {
    throw DimensionError("batchnorm expects " + std::to_string(c) + " channels, got " + x.shape().str());
  }
  const std::size_t n = x.numel() / c;
  const auto in = x.data();
  const auto gamma = bn.gamma.data(), beta = bn.beta.data();
  std::vector<T> mean(c, T(0)), inv_std(c), xhat(in.size()), out(in.size());

  if (training) {
    if (n < 2) throw DimensionError("batchnorm in training mode needs more than one position per channel");
    std::vector<T> var(c, T(0));
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < c; ++j) mean[j] += in[i * c + j];
    for (auto& m : mean) m /= static_cast<T>(n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < c; ++j) {
        const T d = in[i * c + j] - mean[j];
        var[j] += d * d;
      }
    auto rm = bn.running_mean.mutable_data();
    auto rv = bn.running_var.mutable_data();
    for (std::size_t j = 0; j < c; ++j) {
      const T biased = var[j] / static_cast<T>(n);
      inv_std[j] = T(1) / std::sqrt(biased + bn.eps);
      rm[j] = (T(1) - bn.momentum) * rm[j] + bn.momentum * mean[j];
      rv[j] = (T(1) - bn.momentum) * rv[j] + bn.momentum * var[j] / static_cast<T>(n - 1);
    }
  } else {
    const auto rm = bn.running_mean.data(), rv = bn.running_var.data();
    for (std::size_t j = 0; j < c; ++j) {
      mean[j] = rm[j];
      inv_std[j] = T(1) / std::sqrt(rv[j] + bn.eps);
    }
  }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < c; ++j) {
      const auto e = i * c + j;
      xhat[e] = (in[e] - mean[j]) * inv_std[j];
      out[e] = gamma[j] * xhat[e] + beta[j];
    }

  return record_op<T>(
      x.shape(), std::move(out), {x, bn.gamma, bn.beta},
      [x, g_t = bn.gamma, b_t = bn.beta, xhat = std::move(xhat), inv_std = std::move(inv_std), n, c,
       training](std::span<const T> g, std::span<const T>) {
        auto gx = grad_sink(x);
        auto gg = grad_sink(g_t);
        auto gb = grad_sink(b_t);
        const auto gamma = g_t.data();
        std::vector<T> sum_g(c, T(0)), sum_gx(c, T(0));
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t j = 0; j < c; ++j) {
            sum_g[j] += g[i * c + j];
            sum_gx[j] += g[i * c + j] * xhat[i * c + j];
          }
        if (!gg.empty())
          for (std::size_t j = 0; j < c; ++j) gg[j] += sum_gx[j];
        if (!gb.empty())
          for (std::size_t j = 0; j < c; ++j) gb[j] += sum_g[j];
        if (gx.empty()) return;
        const T inv_n = T(1) / static_cast<T>(n);
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t j = 0; j < c; ++j) {
            const auto e = i * c + j;
            if (training) {
              gx[e] += gamma[j] * inv_std[j] * (g[e] - inv_n * sum_g[j] - xhat[e] * inv_n * sum_gx[j]);
            } else {
              gx[e] += gamma[j] * inv_std[j] * g[e];
            }
          }
      });
}

template <typename T>
void Embedding<T>::collect(const std::string& prefix, NamedTensors<T>& params) const {
  fc.collect(prefix + ".fc", params);
  bn.collect(prefix + ".bn", params);
}

template <typename T>
void Embedding<T>::collect_buffers(const std::string& prefix, NamedTensors<T>& buffers) const {
  bn.collect_buffers(prefix + ".bn", buffers);
}

template <typename T>
Embedding<T> make_embedding(std::size_t in, std::size_t out, std::mt19937_64& rng) {
  return Embedding<T>{make_linear<T>(in, out, true, rng), BatchNorm<T>(out)};
}

#define CTL_INSTANTIATE_NN(T)                                                                  \
  template struct Linear<T>;                                                                   \
  template Linear<T> make_linear<T>(std::size_t, std::size_t, bool, std::mt19937_64&);         \
  template struct BatchNorm<T>;                                                                \
  template Tensor<T> batchnorm<T>(const Tensor<T>&, BatchNorm<T>&, bool);                      \
  template struct Embedding<T>;                                                                \
  template Embedding<T> make_embedding<T>(std::size_t, std::size_t, std::mt19937_64&);

CTL_INSTANTIATE_NN(float)
CTL_INSTANTIATE_NN(double)

}  // namespace ctl
