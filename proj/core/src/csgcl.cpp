#include "ctl/csgcl.hpp"

#include <string>

namespace ctl {

template <typename T>
Tensor<T> relation_embed(const Tensor<T>& x, Embedding<T>& phi, Embedding<T>& varphi, Embedding<T>& h,
                         Embedding<T>& f, bool training) {
  if (x.rank() != 3) throw DimensionError("relation_embed expects [M, N, C], got " + x.shape().str());
  const std::size_t m = x.shape()[0], n = x.shape()[1];
  // diff[m, i, j] = x_j - x_i
  auto diff = sub(unsqueeze(x, 1), unsqueeze(x, 2));
  auto rel = varphi.forward(diff, training);  // [M, N, N, d]
  auto self = broadcast_to(unsqueeze(phi.forward(x, training), 2), Shape{m, n, n, phi.fc.out_features()});
  auto pair = h.forward(concat(self, rel, -1), training);  // [M, N, N, d]
  auto pooled = sum(pair, 2);                                // [M, N, d]
  return f.forward(concat(x, pooled, -1), training);
}

template <typename T>
Tensor<T> cross_scale_adjacency(const Tensor<T>& source_relations, const Tensor<T>& target_relations) {
  if (source_relations.shape().dim(-1) != target_relations.shape().dim(-1)) {
    throw DimensionError("relation widths differ: " + source_relations.shape().str() + " vs " +
                         target_relations.shape().str());
  }
  return softmax(matmul(target_relations, transpose_last2(source_relations)), -1);
}

template <typename T>
Tensor<T> cross_scale_conv(const Tensor<T>& source, const Tensor<T>& adjacency, const Tensor<T>& weight) {
  return relu(linear(matmul(adjacency, source), weight, std::optional<Tensor<T>>{}));
}

template <typename T>
Tensor<T> fuse_scales(const Tensor<T>& coarse, const std::optional<Tensor<T>>& from_s1,
                      const std::optional<Tensor<T>>& from_s2, T alpha) {
  std::optional<Tensor<T>> transfer;
  if (from_s1) transfer = *from_s1;
  if (from_s2) transfer = transfer ? add(*transfer, *from_s2) : *from_s2;
  if (!transfer) return coarse;
  return add(coarse, scale(*transfer, alpha));
}

template <typename T>
Tensor<T> CrossScaleTransfer<T>::adjacency(const Tensor<T>& source, const Tensor<T>& target, bool training) {
  auto r_src = relation_embed(source, phi, varphi, h_source, f_source, training);
  auto r_tgt = relation_embed(target, phi, varphi, h_target, f_target, training);
  return cross_scale_adjacency(r_src, r_tgt);
}

template <typename T>
Tensor<T> CrossScaleTransfer<T>::forward(const Tensor<T>& source, const Tensor<T>& target, bool training) {
  return cross_scale_conv(source, adjacency(source, target, training), weight);
}

template <typename T>
void CrossScaleTransfer<T>::collect(const std::string& prefix, NamedTensors<T>& params) const {
  phi.collect(prefix + ".phi", params);
  varphi.collect(prefix + ".varphi", params);
  h_source.collect(prefix + ".h_source", params);
  f_source.collect(prefix + ".f_source", params);
  h_target.collect(prefix + ".h_target", params);
  f_target.collect(prefix + ".f_target", params);
  params.emplace_back(prefix + ".weight", weight);
}

template <typename T>
void CrossScaleTransfer<T>::collect_buffers(const std::string& prefix, NamedTensors<T>& buffers) const {
  phi.collect_buffers(prefix + ".phi", buffers);
  varphi.collect_buffers(prefix + ".varphi", buffers);
  h_source.collect_buffers(prefix + ".h_source", buffers);
  f_source.collect_buffers(prefix + ".f_source", buffers);
  h_target.collect_buffers(prefix + ".h_target", buffers);
  f_target.collect_buffers(prefix + ".f_target", buffers);
}

template <typename T>
CrossScaleTransfer<T> make_cross_scale_transfer(std::size_t channels, std::size_t embed_dim, std::mt19937_64& rng) {
  CrossScaleTransfer<T> t;
  t.phi = make_embedding<T>(channels, embed_dim, rng);
  t.varphi = make_embedding<T>(channels, embed_dim, rng);
  t.h_source = make_embedding<T>(2 * embed_dim, embed_dim, rng);
  t.f_source = make_embedding<T>(channels + embed_dim, embed_dim, rng);
  t.h_target = make_embedding<T>(2 * embed_dim, embed_dim, rng);
  t.f_target = make_embedding<T>(channels + embed_dim, embed_dim, rng);
  t.weight = make_linear<T>(channels, channels, false, rng).weight;
  return t;
}

template <typename T>
CrossScaleModule<T>::CrossScaleModule(std::size_t channels, const CsgclOptions& options, std::mt19937_64& rng)
    : options_(options) {
  if (options_.depth == 0) throw ConfigError("cross-scale depth M must be at least 1");
  if (options_.embed_dim == 0) options_.embed_dim = std::max<std::size_t>(1, channels / 4);
  if (options_.sources == CrossScaleSources::kS3) return;
  for (std::size_t i = 0; i < options_.depth; ++i) {
    Stage stage;
    stage.from_s1 = make_cross_scale_transfer<T>(channels, options_.embed_dim, rng);
    if (needs_s2()) stage.from_s2 = make_cross_scale_transfer<T>(channels, options_.embed_dim, rng);
    stages_.push_back(std::move(stage));
  }
}

template <typename T>
Tensor<T> CrossScaleModule<T>::forward(const Tensor<T>& s1, const Tensor<T>& s2, const Tensor<T>& s3, bool training) {
  Tensor<T> fused = s3;
  const T alpha = static_cast<T>(options_.alpha);
  for (auto& stage : stages_) {
    std::optional<Tensor<T>> t1, t2;
    if (stage.from_s1) t1 = stage.from_s1->forward(s1, fused, training);
    if (stage.from_s2) t2 = stage.from_s2->forward(s2, fused, training);
    fused = fuse_scales(fused, t1, t2, alpha);
  }
  return fused;
}

template <typename T>
void CrossScaleModule<T>::collect(const std::string& prefix, NamedTensors<T>& params) const {
  for (std::size_t i = 0; i < stages_.size(); ++i) {
    const auto p = prefix + ".stage" + std::to_string(i);
    if (stages_[i].from_s1) stages_[i].from_s1->collect(p + ".from_s1", params);
    if (stages_[i].from_s2) stages_[i].from_s2->collect(p + ".from_s2", params);
  }
}

template <typename T>
void CrossScaleModule<T>::collect_buffers(const std::string& prefix, NamedTensors<T>& buffers) const {
  for (std::size_t i = 0; i < stages_.size(); ++i) {
    const auto p = prefix + ".stage" + std::to_string(i);
    if (stages_[i].from_s1) stages_[i].from_s1->collect_buffers(p + ".from_s1", buffers);
    if (stages_[i].from_s2) stages_[i].from_s2->collect_buffers(p + ".from_s2", buffers);
  }
}

#define CTL_INSTANTIATE_CSGCL(T)                                                                           \
  template Tensor<T> relation_embed(const Tensor<T>&, Embedding<T>&, Embedding<T>&, Embedding<T>&,         \
                                    Embedding<T>&, bool);                                                  \
  template Tensor<T> cross_scale_adjacency(const Tensor<T>&, const Tensor<T>&);                            \
  template Tensor<T> cross_scale_conv(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);               \
  template Tensor<T> fuse_scales(const Tensor<T>&, const std::optional<Tensor<T>>&,                        \
                                 const std::optional<Tensor<T>>&, T);                                      \
  template struct CrossScaleTransfer<T>;                                                                   \
  template CrossScaleTransfer<T> make_cross_scale_transfer<T>(std::size_t, std::size_t, std::mt19937_64&); \
  template class CrossScaleModule<T>;

CTL_INSTANTIATE_CSGCL(float)
CTL_INSTANTIATE_CSGCL(double)

}  // namespace ctl
