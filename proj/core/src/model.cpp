#include "ctl/model.hpp"

namespace ctl {

std::mt19937_64 component_rng(std::uint64_t seed, const std::string& name) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(fnv1a64(name)), static_cast<std::uint32_t>(fnv1a64(name) >> 32)};
  return std::mt19937_64(seq);
}

template <typename T>
bool CtlModel<T>::uses_scale(std::size_t scale) const {
  switch (scale) {
    case 0: return cross_.needs_s1();
    case 1: return cross_.needs_s2();
    default: return true;
  }
}

template <typename T>
CtlModel<T>::CtlModel(const ModelConfig& config, std::uint64_t seed) : config_(config) {
  config_.validate();
  if (config_.num_classes < 2) throw ConfigError("model needs num_classes >= 2");
  const std::size_t c = config_.channels;

  CsgclOptions cs;
  cs.alpha = config_.alpha;
  cs.embed_dim = config_.resolved_embed_dim();
  cs.depth = config_.cs_depth;
  cs.sources = config_.cs_sources;
  auto cs_rng = component_rng(seed, "cross_scale");
  cross_ = CrossScaleModule<T>(c, cs, cs_rng);

  TopologyOptions topo;
  topo.use_physical = config_.use_physical;
  topo.use_mask = config_.use_mask;
  topo.use_context = config_.use_context;
  topo.clip_context = config_.block_context == BlockContext::kClip;
  topo.context_relu = config_.context_relu;

  Gcl3dOptions g;
  g.layers = config_.layers;
  g.tau = config_.tau;
  g.degree_eps = config_.degree_eps;
  g.window_context = config_.block_context == BlockContext::kWindow;
  g.context_relu = config_.context_relu;

  for (std::size_t s = 0; s < 3; ++s) {
    if (!uses_scale(s)) continue;
    const auto tag = "s" + std::to_string(s + 1);
    auto topo_rng = component_rng(seed, "topology." + tag);
    topology_[s] = make_topology<T>(s, config_.grouping, config_.skeleton, c, config_.frames, topo, topo_rng);
    auto gcl_rng = component_rng(seed, "gcl." + tag);
    gcl_[s].emplace(c, topology_[s]->nodes(), g, config_.use_context, gcl_rng);
  }

  auto fusion_rng = component_rng(seed, "fusion");
  fusion_ = make_fusion_block<T>(c, config_.grouping.s3.size(), fusion_rng);
  const std::size_t heads = config_.shared_classifier ? 1 : 3;
  for (std::size_t i = 0; i < heads; ++i) {
    auto rng = component_rng(seed, "classifier" + std::to_string(i));
    classifiers_.push_back(make_linear<T>(c, config_.num_classes, true, rng));
  }
}

template <typename T>
ModelOutput<T> CtlModel<T>::forward(const Tensor<T>& features, const Tensor<T>& heatmaps, std::size_t clips,
                                    bool training) {
  if (features.rank() != 4 || clips == 0 || features.shape()[0] != clips * config_.frames) {
    throw DimensionError("model expects features [" + std::to_string(clips) + "*" + std::to_string(config_.frames) +
                         ", H, W, " + std::to_string(config_.channels) + "], got " + features.shape().str());
  }
  if (features.shape()[3] != config_.channels) {
    throw DimensionError("model built for C=" + std::to_string(config_.channels) + " got features " +
                         features.shape().str());
  }
  const std::size_t b = clips, t = config_.frames, c = config_.channels;
  auto set = partition_clip(features, heatmaps, config_.grouping);

  ModelOutput<T> out;
  out.global = reshape(set.global, Shape{b, t, c});
  std::array<Tensor<T>, 3> flat;  // [B*T, N_s, C]
  for (std::size_t s = 0; s < 3; ++s) {
    if (!gcl_[s]) continue;
    const std::size_t n = set.parts[s].shape()[1];
    out.scales[s] = gcl_[s]->forward(reshape(set.parts[s], Shape{b, t, n, c}), *topology_[s], training);
    flat[s] = reshape(out.scales[s], Shape{b * t, n, c});
  }
  auto vp = cross_.forward(flat[0], flat[1], flat[2], training);
  out.parts = reshape(vp, Shape{b, t, vp.shape()[1], c});
  out.reps = fusion_.forward(out.parts, out.global);
  const auto reps = out.reps.all();
  for (std::size_t i = 0; i < 3; ++i) out.logits[i] = classifiers_[classifiers_.size() == 1 ? 0 : i](reps[i]);
  return out;
}

template <typename T>
NamedTensors<T> CtlModel<T>::parameters() const {
  NamedTensors<T> out;
  for (std::size_t s = 0; s < 3; ++s) {
    if (!gcl_[s]) continue;
    const auto tag = "s" + std::to_string(s + 1);
    topology_[s]->collect("topology." + tag, out);
    gcl_[s]->collect("gcl." + tag, out);
  }
  cross_.collect("cross_scale", out);
  fusion_.collect("fusion", out);
  for (std::size_t i = 0; i < classifiers_.size(); ++i) classifiers_[i].collect("classifier" + std::to_string(i), out);
  return out;
}

template <typename T>
NamedTensors<T> CtlModel<T>::buffers() const {
  NamedTensors<T> out;
  for (std::size_t s = 0; s < 3; ++s) {
    if (gcl_[s]) gcl_[s]->collect_buffers("gcl.s" + std::to_string(s + 1), out);
  }
  cross_.collect_buffers("cross_scale", out);
  return out;
}

template <typename T>
NamedTensors<T> CtlModel<T>::state() const {
  auto out = parameters();
  for (auto& entry : buffers()) out.push_back(std::move(entry));
  return out;
}

template class CtlModel<float>;
template class CtlModel<double>;

}  // namespace ctl
