#include "ctl/gcl3d.hpp"

#include <cmath>
#include <string>

namespace ctl {

template <typename T>
Tensor<T> slide_windows(const Tensor<T>& x, std::size_t tau) {
  if (tau == 0 || tau % 2 == 0) throw ConfigError("window size tau must be odd and positive, got " + std::to_string(tau));
  if (x.rank() != 3 && x.rank() != 4) throw DimensionError("slide_windows expects [B,T,N,C], got " + x.shape().str());
  const bool batched = x.rank() == 4;
  const auto& s = x.shape();
  const std::size_t b = batched ? s[0] : 1, t = s.dim(-3), n = s.dim(-2), c = s.dim(-1);
  const std::size_t half = tau / 2;
  const std::size_t frame = n * c, window = tau * frame;
  // src[o] is the flat input index feeding output o, or npos for padding.
  constexpr std::size_t npos = static_cast<std::size_t>(-1);
  std::vector<std::size_t> src(b * t * window, npos);
  for (std::size_t bi = 0; bi < b; ++bi)
    for (std::size_t ti = 0; ti < t; ++ti)
      for (std::size_t k = 0; k < tau; ++k) {
        const long f = static_cast<long>(ti + k) - static_cast<long>(half);
        if (f < 0 || f >= static_cast<long>(t)) continue;
        const std::size_t out_base = (bi * t + ti) * window + k * frame;
        const std::size_t in_base = (bi * t + static_cast<std::size_t>(f)) * frame;
        for (std::size_t e = 0; e < frame; ++e) src[out_base + e] = in_base + e;
      }
  const auto in = x.data();
  std::vector<T> out(src.size(), T(0));
  for (std::size_t o = 0; o < src.size(); ++o)
    if (src[o] != npos) out[o] = in[src[o]];
  Shape shape = batched ? Shape{b, t, tau * n, c} : Shape{t, tau * n, c};
  return record_op<T>(std::move(shape), std::move(out), {x},
                      [x, src = std::move(src)](std::span<const T> g, std::span<const T>) {
                        auto gx = grad_sink(x);
                        for (std::size_t o = 0; o < src.size(); ++o)
                          if (src[o] != npos) gx[src[o]] += g[o];
                      });
}

template <typename T>
BlockAdjacency<T> build_block_adjacency(const TopologyBundle<T>& bundle, const Tensor<T>& windows, std::size_t tau,
                                        const WindowContextBlock<T>* window_context,
                                        const std::optional<Tensor<T>>& clip_context) {
  const std::size_t n = bundle.nodes();
  if (windows.shape().dim(-2) != tau * n) {
    throw DimensionError("windows " + windows.shape().str() + " do not hold " + std::to_string(tau) + " x " +
                         std::to_string(n) + " nodes");
  }
  BlockAdjacency<T> out;
  out.total = Tensor<T>::zeros(Shape{tau * n, tau * n});
  if (bundle.use_physical) {
    out.physical = tile_blocks(bundle.physical, tau);
    out.total = out.physical;
  }
  if (bundle.mask) {
    out.mask = tile_blocks(*bundle.mask, tau);
    out.total = add(out.total, *out.mask);
  }
  if (bundle.use_context) {
    if (window_context != nullptr) {
      out.context = window_context_adjacency(windows, *window_context);
    } else if (clip_context) {
      // [B, N, N] -> [B, T, tauN, tauN], shared by every window of the clip.
      auto tiled = tile_blocks(*clip_context, tau);
      if (windows.rank() == 4 && tiled.rank() == 3) {
        const auto& w = windows.shape();
        tiled = broadcast_to(unsqueeze(tiled, 1), Shape{w[0], w[1], tau * n, tau * n});
      }
      out.context = tiled;
    }
    if (out.context) out.total = add(out.total, *out.context);
  }
  return out;
}

template <typename T>
Tensor<T> guarded_degrees(const Tensor<T>& adjacency, T eps) {
  const std::size_t n = adjacency.shape().dim(-1);
  auto with_loops = add(adjacency, Tensor<T>::identity(n));
  return clamp_min(sum(with_loops, -1), eps);
}

template <typename T>
Tensor<T> normalized_adjacency(const Tensor<T>& adjacency, T eps) {
  require_finite(adjacency, "block adjacency");
  const std::size_t n = adjacency.shape().dim(-1);
  if (adjacency.shape().dim(-2) != n) throw DimensionError("adjacency must be square, got " + adjacency.shape().str());
  auto with_loops = add(adjacency, Tensor<T>::identity(n));
  auto inv_sqrt = pow_scalar(clamp_min(sum(with_loops, -1), eps), T(-0.5));  // [.., n]
  return mul(mul(with_loops, unsqueeze(inv_sqrt, -1)), unsqueeze(inv_sqrt, -2));
}

template <typename T>
Tensor<T> graph_conv_3d(const Tensor<T>& windows, const Tensor<T>& adjacency, const Tensor<T>& weight, T eps) {
  if (windows.shape().dim(-2) != adjacency.shape().dim(-1)) {
    throw DimensionError("adjacency " + adjacency.shape().str() + " does not match windows " + windows.shape().str());
  }
  auto propagated = matmul(normalized_adjacency(adjacency, eps), windows);
  return relu(linear(propagated, weight, std::optional<Tensor<T>>{}));
}

template <typename T>
Tensor<T> collapse_window(const Tensor<T>& y, std::size_t tau, const Linear<T>& collapse, BatchNorm<T>& bn,
                          bool training) {
  const bool batched = y.rank() == 4;
  if (y.rank() != 3 && y.rank() != 4) throw DimensionError("collapse_window expects [B,T,tauN,C], got " + y.shape().str());
  const auto& s = y.shape();
  const std::size_t b = batched ? s[0] : 1, t = s.dim(-3), tn = s.dim(-2), c = s.dim(-1);
  if (tau == 0 || tn % tau != 0) throw DimensionError("window of " + std::to_string(tn) + " nodes is not tau blocks");
  const std::size_t n = tn / tau;
  if (collapse.in_features() != tau * c) {
    throw DimensionError("collapse layer expects " + std::to_string(collapse.in_features()) + " inputs, got tau*C = " +
                         std::to_string(tau * c));
  }
  auto blocks = reshape(y, Shape{b * t, tau, n, c});
  auto per_node = reshape(permute(blocks, {0, 2, 1, 3}), Shape{b, t, n, tau * c});
  auto out = relu(batchnorm(collapse(per_node), bn, training));
  return batched ? out : reshape(out, Shape{t, n, collapse.out_features()});
}

template <typename T>
Gcl3dStack<T>::Gcl3dStack(std::size_t channels, std::size_t nodes, const Gcl3dOptions& options, bool use_context,
                          std::mt19937_64& rng)
    : options_(options) {
  if (options.layers == 0) throw ConfigError("3D-GCL needs at least one layer");
  if (options.tau == 0 || options.tau % 2 == 0) throw ConfigError("window size tau must be odd");
  for (std::size_t l = 0; l < options.layers; ++l) {
    Gcl3dLayer<T> layer;
    layer.weight = make_linear<T>(channels, channels, false, rng).weight;
    if (use_context && options.window_context) {
      layer.window_context = make_window_context_block<T>(channels, options.tau * nodes, options.context_relu, rng);
    }
    layer.collapse = make_linear<T>(options.tau * channels, channels, true, rng);
    layer.bn = BatchNorm<T>(channels);
    layers_.push_back(std::move(layer));
  }
}

template <typename T>
Tensor<T> Gcl3dStack<T>::forward(const Tensor<T>& x, const TopologyBundle<T>& bundle, bool training) {
  std::optional<Tensor<T>> clip_context;
  if (bundle.use_context && bundle.context && !options_.window_context) {
    clip_context = context_adjacency(x, *bundle.context);
  }
  const T eps = static_cast<T>(options_.degree_eps);
  Tensor<T> current = x;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    auto& layer = layers_[l];
    auto windows = slide_windows(current, options_.tau);
    const WindowContextBlock<T>* wc = layer.window_context ? &*layer.window_context : nullptr;
    auto blocks = build_block_adjacency(bundle, windows, options_.tau, wc, clip_context);
    auto conv = graph_conv_3d(windows, blocks.total, layer.weight, eps);
    auto next = collapse_window(conv, options_.tau, layer.collapse, layer.bn, training);
    current = l >= 1 ? add(next, current) : next;
  }
  return current;
}

template <typename T>
void Gcl3dStack<T>::collect(const std::string& prefix, NamedTensors<T>& params) const {
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const auto p = prefix + ".layer" + std::to_string(l);
    params.emplace_back(p + ".weight", layers_[l].weight);
    if (layers_[l].window_context) layers_[l].window_context->collect(p + ".window_context", params);
    layers_[l].collapse.collect(p + ".collapse", params);
    layers_[l].bn.collect(p + ".bn", params);
  }
}

template <typename T>
void Gcl3dStack<T>::collect_buffers(const std::string& prefix, NamedTensors<T>& buffers) const {
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    layers_[l].bn.collect_buffers(prefix + ".layer" + std::to_string(l) + ".bn", buffers);
  }
}

#define CTL_INSTANTIATE_GCL3D(T)                                                                           \
  template Tensor<T> slide_windows(const Tensor<T>&, std::size_t);                                         \
  template struct BlockAdjacency<T>;                                                                       \
  template BlockAdjacency<T> build_block_adjacency(const TopologyBundle<T>&, const Tensor<T>&, std::size_t, \
                                                   const WindowContextBlock<T>*,                           \
                                                   const std::optional<Tensor<T>>&);                       \
  template Tensor<T> guarded_degrees(const Tensor<T>&, T);                                                 \
  template Tensor<T> normalized_adjacency(const Tensor<T>&, T);                                            \
  template Tensor<T> graph_conv_3d(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, T);               \
  template Tensor<T> collapse_window(const Tensor<T>&, std::size_t, const Linear<T>&, BatchNorm<T>&, bool); \
  template class Gcl3dStack<T>;

CTL_INSTANTIATE_GCL3D(float)
CTL_INSTANTIATE_GCL3D(double)

}  // namespace ctl
