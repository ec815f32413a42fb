#pragma once

#include <cstddef>
#include <optional>
#include <random>
#include <vector>

#include "ctl/topology.hpp"

namespace ctl {

// Centered temporal windows with zero padding: X [B, T, N, C] -> [B, T, tau*N, C]
// where window t stacks frames t - tau/2 .. t + tau/2. Rank-3 input is treated
// as a single clip. tau must be odd.
template <typename T>
Tensor<T> slide_windows(const Tensor<T>& x, std::size_t tau);

template <typename T>
struct BlockAdjacency {
  Tensor<T> physical;               // tiled A^p, [tauN, tauN]; undefined when disabled
  std::optional<Tensor<T>> mask;    // tiled A^m, [tauN, tauN]
  std::optional<Tensor<T>> context; // per window [B, T, tauN, tauN] or tiled per clip
  Tensor<T> total;                  // sum of the enabled components
};

// Sum of the tiled physical and mask components plus the context component.
// `window_context` produces a matrix per window from `windows`; otherwise a
// clip-level context matrix [B, N, N] is tiled when given.
template <typename T>
BlockAdjacency<T> build_block_adjacency(const TopologyBundle<T>& bundle, const Tensor<T>& windows, std::size_t tau,
                                        const WindowContextBlock<T>* window_context,
                                        const std::optional<Tensor<T>>& clip_context);

// Row sums of A + I floored at `eps`: the guarded degree vector.
template <typename T>
Tensor<T> guarded_degrees(const Tensor<T>& adjacency, T eps);

// D^{-1/2} (A + I) D^{-1/2} with the guarded degrees.
template <typename T>
Tensor<T> normalized_adjacency(const Tensor<T>& adjacency, T eps);

// ReLU(D^{-1/2} (A + I) D^{-1/2} X W) for every window.
template <typename T>
Tensor<T> graph_conv_3d(const Tensor<T>& windows, const Tensor<T>& adjacency, const Tensor<T>& weight, T eps);

// Concatenates each node's tau temporal copies, maps tau*C -> C, then BN, ReLU.
// Y [B, T, tauN, C] -> [B, T, N, C].
template <typename T>
Tensor<T> collapse_window(const Tensor<T>& y, std::size_t tau, const Linear<T>& collapse, BatchNorm<T>& bn,
                          bool training);

template <typename T>
struct Gcl3dLayer {
  Tensor<T> weight;  // W^l, [C, C]
  std::optional<WindowContextBlock<T>> window_context;
  Linear<T> collapse;  // tau*C -> C
  BatchNorm<T> bn;
};

struct Gcl3dOptions {
  std::size_t layers = 2;
  std::size_t tau = 3;
  double degree_eps = 1e-4;
  bool window_context = true;  // per-window context blocks; false tiles the clip context
  bool context_relu = false;
};

// L stacked 3D graph convolutional layers over one scale. The shortcut
// X^{l+1} += X^l is applied to the outputs of layers 2..L.
template <typename T>
class Gcl3dStack {
 public:
  Gcl3dStack() = default;
  Gcl3dStack(std::size_t channels, std::size_t nodes, const Gcl3dOptions& options, bool use_context,
             std::mt19937_64& rng);

  Tensor<T> forward(const Tensor<T>& x, const TopologyBundle<T>& bundle, bool training);

  std::vector<Gcl3dLayer<T>>& layers() { return layers_; }
  const Gcl3dOptions& options() const { return options_; }
  void collect(const std::string& prefix, NamedTensors<T>& params) const;
  void collect_buffers(const std::string& prefix, NamedTensors<T>& buffers) const;

 private:
  Gcl3dOptions options_;
  std::vector<Gcl3dLayer<T>> layers_;
};

}  // namespace ctl
