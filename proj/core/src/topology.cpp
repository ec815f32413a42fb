#include "ctl/topology.hpp"

#include <string>

namespace ctl {

EdgeList coco_skeleton() {
  return {{kLeftAnkle, kLeftKnee},      {kLeftKnee, kLeftHip},          {kRightAnkle, kRightKnee},
          {kRightKnee, kRightHip},      {kLeftHip, kRightHip},          {kLeftShoulder, kLeftHip},
          {kRightShoulder, kRightHip},  {kLeftShoulder, kRightShoulder}, {kLeftShoulder, kLeftElbow},
          {kRightShoulder, kRightElbow}, {kLeftElbow, kLeftWrist},       {kRightElbow, kRightWrist},
          {kLeftEye, kRightEye},        {kNose, kLeftEye},              {kNose, kRightEye},
          {kLeftEye, kLeftEar},         {kRightEye, kRightEar},         {kLeftEar, kLeftShoulder},
          {kRightEar, kRightShoulder}};
}

template <typename T>
Tensor<T> build_physical_adjacency(std::size_t scale, const ScaleGrouping& grouping, const EdgeList& edges) {
  const auto groups = grouping.groups(scale);
  std::vector<std::size_t> owner(kKeypoints);
  for (std::size_t g = 0; g < groups.size(); ++g)
    for (auto k : groups[g]) owner[k] = g;
  const std::size_t n = groups.size();
  std::vector<T> a(n * n, T(0));
  for (const auto& [u, v] : edges) {
    if (u >= kKeypoints || v >= kKeypoints) {
      throw ConfigError("skeleton edge " + std::to_string(u) + "-" + std::to_string(v) + " is out of range");
    }
    const auto i = owner[u], j = owner[v];
    if (i == j) continue;
    a[i * n + j] = T(1);
    a[j * n + i] = T(1);
  }
  return Tensor<T>(Shape{n, n}, std::move(a));
}

template <typename T>
void ContextBlock<T>::collect(const std::string& prefix, NamedTensors<T>& params) const {
  squeeze_feature.collect(prefix + ".squeeze_feature", params);
  squeeze_time.collect(prefix + ".squeeze_time", params);
  expand.collect(prefix + ".expand", params);
}

template <typename T>
ContextBlock<T> make_context_block(std::size_t channels, std::size_t frames, std::size_t nodes, bool relu,
                                   std::mt19937_64& rng) {
  ContextBlock<T> b;
  b.squeeze_feature = make_linear<T>(channels, 1, true, rng);
  b.squeeze_time = make_linear<T>(frames, 1, true, rng);
  b.expand = make_linear<T>(nodes, nodes * nodes, true, rng);
  b.relu_after_squeeze = relu;
  return b;
}

template <typename T>
Tensor<T> context_adjacency(const Tensor<T>& x, const ContextBlock<T>& block) {
  if (x.rank() != 3 && x.rank() != 4) throw DimensionError("context block input must be [B,T,N,C], got " + x.shape().str());
  const bool batched = x.rank() == 4;
  const auto xb = batched ? x : unsqueeze(x, 0);
  const std::size_t b = xb.shape()[0], t = xb.shape()[1], n = xb.shape()[2];
  if (block.squeeze_time.in_features() != t || block.expand.in_features() != n) {
    throw DimensionError("context block built for T=" + std::to_string(block.squeeze_time.in_features()) +
                         ", N=" + std::to_string(block.expand.in_features()) + " got " + x.shape().str());
  }
  auto s = reshape(block.squeeze_feature(xb), Shape{b, t, n});  // [B, T, N]
  if (block.relu_after_squeeze) s = relu(s);
  auto v = reshape(block.squeeze_time(permute(s, {0, 2, 1})), Shape{b, n});  // [B, N]
  auto a = l2_normalize_rows(reshape(block.expand(v), Shape{b, n, n}));
  return batched ? a : reshape(a, Shape{n, n});
}

template <typename T>
void WindowContextBlock<T>::collect(const std::string& prefix, NamedTensors<T>& params) const {
  squeeze_feature.collect(prefix + ".squeeze_feature", params);
  expand.collect(prefix + ".expand", params);
}

template <typename T>
WindowContextBlock<T> make_window_context_block(std::size_t channels, std::size_t window_nodes, bool relu,
                                                std::mt19937_64& rng) {
  WindowContextBlock<T> b;
  b.squeeze_feature = make_linear<T>(channels, 1, true, rng);
  b.expand = make_linear<T>(window_nodes, window_nodes * window_nodes, true, rng);
  b.relu_after_squeeze = relu;
  return b;
}

template <typename T>
Tensor<T> window_context_adjacency(const Tensor<T>& x_window, const WindowContextBlock<T>& block) {
  const auto& s = x_window.shape();
  if (s.rank() < 2) throw DimensionError("window features must be [.., tauN, C], got " + s.str());
  const std::size_t n = s.dim(-2);
  if (block.expand.in_features() != n) {
    throw DimensionError("window context block built for " + std::to_string(block.expand.in_features()) +
                         " window nodes, got " + s.str());
  }
  auto lead = s.dims();
  lead.pop_back();  // [.., tauN]
  auto squeezed = reshape(block.squeeze_feature(x_window), Shape(lead));
  if (block.relu_after_squeeze) squeezed = relu(squeezed);
  auto out_dims = lead;
  out_dims.push_back(n);  // [.., tauN, tauN]
  return l2_normalize_rows(reshape(block.expand(squeezed), Shape(out_dims)));
}

template <typename T>
void TopologyBundle<T>::collect(const std::string& prefix, NamedTensors<T>& params) const {
  if (mask) params.emplace_back(prefix + ".mask", *mask);
  if (context) context->collect(prefix + ".context", params);
}

template <typename T>
TopologyBundle<T> make_topology(std::size_t scale, const ScaleGrouping& grouping, const EdgeList& edges,
                                std::size_t channels, std::size_t frames, const TopologyOptions& options,
                                std::mt19937_64& rng) {
  TopologyBundle<T> b;
  b.scale = scale;
  b.physical = build_physical_adjacency<T>(scale, grouping, edges);
  b.use_physical = options.use_physical;
  b.use_context = options.use_context;
  const std::size_t n = b.nodes();
  if (options.use_mask) b.mask = Tensor<T>::zeros(Shape{n, n}, true);
  if (options.use_context && options.clip_context) {
    b.context = make_context_block<T>(channels, frames, n, options.context_relu, rng);
  }
  return b;
}

template <typename T>
Tensor<T> compose_adjacency(const TopologyBundle<T>& bundle, const std::optional<Tensor<T>>& context) {
  const std::size_t n = bundle.nodes();
  Tensor<T> a = bundle.use_physical ? bundle.physical : Tensor<T>::zeros(Shape{n, n});
  if (bundle.mask) a = add(a, *bundle.mask);
  if (bundle.use_context && context) a = add(a, *context);
  return a;
}

#define CTL_INSTANTIATE_TOPOLOGY(T)                                                                        \
  template Tensor<T> build_physical_adjacency<T>(std::size_t, const ScaleGrouping&, const EdgeList&);      \
  template struct ContextBlock<T>;                                                                         \
  template ContextBlock<T> make_context_block<T>(std::size_t, std::size_t, std::size_t, bool,              \
                                                 std::mt19937_64&);                                        \
  template Tensor<T> context_adjacency(const Tensor<T>&, const ContextBlock<T>&);                          \
  template struct WindowContextBlock<T>;                                                                   \
  template WindowContextBlock<T> make_window_context_block<T>(std::size_t, std::size_t, bool,              \
                                                              std::mt19937_64&);                           \
  template Tensor<T> window_context_adjacency(const Tensor<T>&, const WindowContextBlock<T>&);             \
  template struct TopologyBundle<T>;                                                                       \
  template TopologyBundle<T> make_topology<T>(std::size_t, const ScaleGrouping&, const EdgeList&,          \
                                              std::size_t, std::size_t, const TopologyOptions&,            \
                                              std::mt19937_64&);                                           \
  template Tensor<T> compose_adjacency(const TopologyBundle<T>&, const std::optional<Tensor<T>>&);

CTL_INSTANTIATE_TOPOLOGY(float)
CTL_INSTANTIATE_TOPOLOGY(double)

}  // namespace ctl
