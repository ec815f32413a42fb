#pragma once

#include <cstddef>
#include <optional>
#include <random>
#include <utility>
#include <vector>

#include "ctl/nn.hpp"
#include "ctl/partition.hpp"

namespace ctl {

using EdgeList = std::vector<std::pair<std::size_t, std::size_t>>;

// The 19 COCO limb pairs over the 17 key-points.
EdgeList coco_skeleton();

// 0/1 symmetric, zero-diagonal skeleton adjacency at `scale` (0, 1, 2). Coarse
// nodes are adjacent iff any of their member key-points share a limb.
template <typename T>
Tensor<T> build_physical_adjacency(std::size_t scale, const ScaleGrouping& grouping, const EdgeList& edges);

// Clip-level context block: squeeze C -> 1, then T -> 1, then expand the
// N-vector to an N x N matrix whose rows are L2-normalized.
template <typename T>
struct ContextBlock {
  Linear<T> squeeze_feature;  // C -> 1
  Linear<T> squeeze_time;     // T -> 1
  Linear<T> expand;           // N -> N*N
  bool relu_after_squeeze = false;

  void collect(const std::string& prefix, NamedTensors<T>& params) const;
};

template <typename T>
ContextBlock<T> make_context_block(std::size_t channels, std::size_t frames, std::size_t nodes, bool relu,
                                   std::mt19937_64& rng);

// X [B, T, N, C] (or [T, N, C]) -> A_c [B, N, N] (or [N, N]); one matrix per clip.
template <typename T>
Tensor<T> context_adjacency(const Tensor<T>& x, const ContextBlock<T>& block);

// Window context block: the same pipeline applied to a window of tau frames
// whose time axis is already fixed, so only the feature squeeze remains.
template <typename T>
struct WindowContextBlock {
  Linear<T> squeeze_feature;  // C -> 1
  Linear<T> expand;           // tau*N -> (tau*N)^2
  bool relu_after_squeeze = false;

  void collect(const std::string& prefix, NamedTensors<T>& params) const;
};

template <typename T>
WindowContextBlock<T> make_window_context_block(std::size_t channels, std::size_t window_nodes, bool relu,
                                                std::mt19937_64& rng);

// X_window [.., tauN, C] -> [.., tauN, tauN], one matrix per window.
template <typename T>
Tensor<T> window_context_adjacency(const Tensor<T>& x_window, const WindowContextBlock<T>& block);

// Per-scale adjacency components. The physical part is a constant; the mask is
// a learnable matrix that starts at zero.
template <typename T>
struct TopologyBundle {
  std::size_t scale = 0;
  Tensor<T> physical;
  std::optional<Tensor<T>> mask;
  std::optional<ContextBlock<T>> context;  // only for clip-level context
  bool use_physical = true;
  bool use_context = true;

  std::size_t nodes() const { return physical.shape()[0]; }
  void collect(const std::string& prefix, NamedTensors<T>& params) const;
};

struct TopologyOptions {
  bool use_physical = true;
  bool use_mask = true;
  bool use_context = true;
  bool clip_context = false;  // build a clip-level ContextBlock
  bool context_relu = false;
};

template <typename T>
TopologyBundle<T> make_topology(std::size_t scale, const ScaleGrouping& grouping, const EdgeList& edges,
                                std::size_t channels, std::size_t frames, const TopologyOptions& options,
                                std::mt19937_64& rng);

// A_s = A^p + A^m + A^c with disabled components left out. `context` may be
// batched ([B, N, N]) or absent.
template <typename T>
Tensor<T> compose_adjacency(const TopologyBundle<T>& bundle, const std::optional<Tensor<T>>& context);

}  // namespace ctl
