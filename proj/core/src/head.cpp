#include "ctl/head.hpp"

#include <limits>
#include <map>
#include <string>

namespace ctl {

template <typename T>
FusedRepresentations<T> FusionBlock<T>::forward(const Tensor<T>& parts, const Tensor<T>& global) const {
  const bool batched = parts.rank() == 4;
  auto vp = batched ? parts : unsqueeze(parts, 0);
  auto vg = batched ? global : unsqueeze(global, 0);
  if (vp.rank() != 4 || vg.rank() != 3) {
    throw DimensionError("fusion expects V_p [B,T,Np,C] and V_g [B,T,C], got " + parts.shape().str() + " and " +
                         global.shape().str());
  }
  const std::size_t b = vp.shape()[0], t = vp.shape()[1], c = vp.shape()[3];
  if (vg.shape()[0] != b || vg.shape()[1] != t || vg.shape()[2] != c) {
    throw DimensionError("V_g " + global.shape().str() + " does not match V_p " + parts.shape().str());
  }
  FusedRepresentations<T> out;
  out.global = mean_pool(vg, 1);
  out.aggregate = mean_pool(add(sum(vp, 2), vg), 1);
  auto reduced = reshape(reduce(vp), Shape{b, t, c});
  out.concat = mean_pool(add(reduced, vg), 1);
  if (!batched) {
    out.global = reshape(out.global, Shape{c});
    out.aggregate = reshape(out.aggregate, Shape{c});
    out.concat = reshape(out.concat, Shape{c});
  }
  return out;
}

template <typename T>
void FusionBlock<T>::collect(const std::string& prefix, NamedTensors<T>& params) const {
  reduce.collect(prefix + ".reduce", params);
}

template <typename T>
FusionBlock<T> make_fusion_block(std::size_t channels, std::size_t parts, std::mt19937_64& rng) {
  if (parts == 0 || channels % parts != 0) {
    throw ConfigError("channel count " + std::to_string(channels) + " must be divisible by the " +
                      std::to_string(parts) + " coarse parts");
  }
  return FusionBlock<T>{make_linear<T>(channels, channels / parts, true, rng)};
}

template <typename T>
Tensor<T> triplet_loss_batchhard(const Tensor<T>& embeddings, const std::vector<int>& labels, T margin) {
  if (embeddings.rank() != 2 || embeddings.shape()[0] != labels.size()) {
    throw DimensionError("triplet loss expects [B, C] embeddings with B labels");
  }
  std::map<int, int> counts;
  for (int l : labels) ++counts[l];
  if (counts.size() < 2) throw std::invalid_argument("triplet loss needs at least two identities in the batch");
  for (const auto& [label, count] : counts) {
    if (count < 2) {
      throw std::invalid_argument("triplet loss needs two clips of identity " + std::to_string(label));
    }
  }
  const std::size_t b = labels.size();
  auto diff = sub(unsqueeze(embeddings, 1), unsqueeze(embeddings, 0));
  auto dist = sqrt(clamp_min(sum(square(diff), -1), T(1e-12)));  // [B, B]
  const auto d = dist.data();
  std::vector<std::size_t> anchors(b), positives(b), negatives(b);
  for (std::size_t a = 0; a < b; ++a) {
    anchors[a] = a;
    T hardest_pos = -std::numeric_limits<T>::infinity();
    T hardest_neg = std::numeric_limits<T>::infinity();
    for (std::size_t j = 0; j < b; ++j) {
      if (j == a) continue;
      const T v = d[a * b + j];
      if (labels[j] == labels[a]) {
        if (v > hardest_pos) hardest_pos = v, positives[a] = j;
      } else if (v < hardest_neg) {
        hardest_neg = v, negatives[a] = j;
      }
    }
  }
  auto gap = sub(pick(dist, anchors, positives), pick(dist, anchors, negatives));
  return mean_all(relu(add_scalar(gap, margin)));
}

template <typename T>
Tensor<T> id_loss_labelsmooth(const Tensor<T>& logits, const std::vector<int>& labels, T smoothing) {
  if (logits.rank() != 2 || logits.shape()[0] != labels.size()) {
    throw DimensionError("identification loss expects [B, K] logits with B labels");
  }
  const std::size_t b = logits.shape()[0], k = logits.shape()[1];
  if (k < 2) throw std::invalid_argument("identification loss needs at least two classes");
  std::vector<T> target(b * k, smoothing / static_cast<T>(k));
  for (std::size_t i = 0; i < b; ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= k) {
      throw std::out_of_range("label " + std::to_string(labels[i]) + " is not below class count " + std::to_string(k));
    }
    target[i * k + static_cast<std::size_t>(labels[i])] += T(1) - smoothing;
  }
  auto ce = sum_all(mul(Tensor<T>(Shape{b, k}, std::move(target)), log_softmax(logits, 1)));
  return scale(ce, T(-1) / static_cast<T>(b));
}

template <typename T>
Tensor<T> diversity_loss(const Tensor<T>& parts) {
  if (parts.rank() != 3 && parts.rank() != 4) {
    throw DimensionError("diversity loss expects [T, Np, C] or [B, T, Np, C], got " + parts.shape().str());
  }
  const std::size_t clips = parts.rank() == 4 ? parts.shape()[0] : 1;
  const std::size_t np = parts.shape().dim(-2);
  auto pooled = l2_normalize_rows(mean_pool(parts, -3));
  auto gram = matmul(pooled, transpose_last2(pooled));
  auto off = sub(gram, Tensor<T>::identity(np));
  return scale(sum_all(square(off)), T(1) / static_cast<T>(clips));
}

template <typename T>
LossBreakdown<T> total_loss(const FusedRepresentations<T>& reps, const std::array<Tensor<T>, 3>& logits,
                            const Tensor<T>& parts, const std::vector<int>& labels, const LossWeights& weights) {
  if (weights.triplet < 0 || weights.identity < 0 || weights.diversity < 0) {
    throw ConfigError("loss weights must be non-negative");
  }
  if (weights.smoothing < 0 || weights.smoothing >= 1) throw ConfigError("label smoothing must be in [0, 1)");
  LossBreakdown<T> out;
  const auto feats = reps.all();
  for (std::size_t i = 0; i < feats.size(); ++i) {
    auto tri = triplet_loss_batchhard(feats[i], labels, static_cast<T>(weights.margin));
    auto ide = id_loss_labelsmooth(logits[i], labels, static_cast<T>(weights.smoothing));
    out.triplet = i == 0 ? tri : add(out.triplet, tri);
    out.identity = i == 0 ? ide : add(out.identity, ide);
  }
  out.diversity = diversity_loss(parts);
  out.total = Tensor<T>::scalar(T(0));
  if (weights.triplet != 0) out.total = add(out.total, scale(out.triplet, static_cast<T>(weights.triplet)));
  if (weights.identity != 0) out.total = add(out.total, scale(out.identity, static_cast<T>(weights.identity)));
  if (weights.diversity != 0) out.total = add(out.total, scale(out.diversity, static_cast<T>(weights.diversity)));
  return out;
}

#define CTL_INSTANTIATE_HEAD(T)                                                                          \
  template struct FusionBlock<T>;                                                                        \
  template FusionBlock<T> make_fusion_block<T>(std::size_t, std::size_t, std::mt19937_64&);              \
  template Tensor<T> triplet_loss_batchhard(const Tensor<T>&, const std::vector<int>&, T);               \
  template Tensor<T> id_loss_labelsmooth(const Tensor<T>&, const std::vector<int>&, T);                  \
  template Tensor<T> diversity_loss(const Tensor<T>&);                                                   \
  template LossBreakdown<T> total_loss(const FusedRepresentations<T>&, const std::array<Tensor<T>, 3>&,  \
                                       const Tensor<T>&, const std::vector<int>&, const LossWeights&);

CTL_INSTANTIATE_HEAD(float)
CTL_INSTANTIATE_HEAD(double)

}  // namespace ctl
