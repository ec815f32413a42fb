#include "ctl/partition.hpp"

#include <string>

namespace ctl {

ScaleGrouping ScaleGrouping::canonical() {
  ScaleGrouping g;
  const std::vector<std::size_t> head{kNose, kLeftEye, kRightEye, kLeftEar, kRightEar};
  g.s2 = {head,
          {kLeftShoulder},
          {kRightShoulder},
          {kLeftElbow, kLeftWrist},
          {kRightElbow, kRightWrist},
          {kLeftHip, kRightHip},
          {kLeftKnee},
          {kRightKnee},
          {kLeftAnkle},
          {kRightAnkle}};
  g.s3 = {head,
          {kLeftShoulder, kRightShoulder, kLeftHip, kRightHip},
          {kLeftElbow, kLeftWrist},
          {kRightElbow, kRightWrist},
          {kLeftKnee, kRightKnee, kLeftAnkle, kRightAnkle}};
  return g;
}

namespace {

void validate_groups(const NodeGroups& groups, const char* scale) {
  std::vector<int> seen(kKeypoints, 0);
  if (groups.empty()) throw ConfigError(std::string("grouping for ") + scale + " is empty");
  for (const auto& g : groups) {
    if (g.empty()) throw ConfigError(std::string("grouping for ") + scale + " has an empty group");
    for (auto k : g) {
      if (k >= kKeypoints) {
        throw ConfigError(std::string("grouping for ") + scale + " names key-point " + std::to_string(k));
      }
      if (seen[k]++) {
        throw ConfigError(std::string("grouping for ") + scale + " uses key-point " + std::to_string(k) + " twice");
      }
    }
  }
  for (std::size_t k = 0; k < kKeypoints; ++k) {
    if (!seen[k]) throw ConfigError(std::string("grouping for ") + scale + " misses key-point " + std::to_string(k));
  }
}

}  // namespace

void ScaleGrouping::validate() const {
  validate_groups(s2, "s2");
  validate_groups(s3, "s3");
}

NodeGroups ScaleGrouping::groups(std::size_t scale) const {
  switch (scale) {
    case 0: {
      NodeGroups id(kKeypoints);
      for (std::size_t k = 0; k < kKeypoints; ++k) id[k] = {k};
      return id;
    }
    case 1: return s2;
    case 2: return s3;
    default: throw ConfigError("unknown scale index " + std::to_string(scale));
  }
}

std::size_t ScaleGrouping::nodes(std::size_t scale) const { return groups(scale).size(); }

template <typename T>
Tensor<T> normalize_heatmaps(const Tensor<T>& heatmaps) {
  if (heatmaps.rank() != 4) throw DimensionError("heatmaps must be [T, K, H, W], got " + heatmaps.shape().str());
  const auto& s = heatmaps.shape();
  auto flat = reshape(heatmaps, Shape{s[0], s[1], s[2] * s[3]});
  return reshape(softmax(flat, 2), s);
}

template <typename T>
Tensor<T> extract_part_features(const Tensor<T>& features, const Tensor<T>& normalized_heatmaps) {
  const auto& f = features.shape();
  const auto& m = normalized_heatmaps.shape();
  if (f.rank() != 4 || m.rank() != 4 || f[0] != m[0] || f[1] != m[2] || f[2] != m[3]) {
    throw DimensionError("feature maps " + f.str() + " and heatmaps " + m.str() + " disagree on T, H, W");
  }
  const std::size_t hw = f[1] * f[2];
  auto weights = reshape(normalized_heatmaps, Shape{m[0], m[1], hw});
  auto values = reshape(features, Shape{f[0], hw, f[3]});
  return matmul(weights, values);
}

template <typename T>
Tensor<T> extract_global_feature(const Tensor<T>& features) {
  const auto& f = features.shape();
  if (f.rank() != 4) throw DimensionError("feature maps must be [T, H, W, C], got " + f.str());
  return mean_pool(reshape(features, Shape{f[0], f[1] * f[2], f[3]}), 1);
}

template <typename T>
Tensor<T> group_mean(const Tensor<T>& nodes, const NodeGroups& groups) {
  const std::size_t n = nodes.shape().dim(-2);
  std::vector<T> avg(groups.size() * n, T(0));
  for (std::size_t g = 0; g < groups.size(); ++g) {
    for (auto k : groups[g]) {
      if (k >= n) throw ConfigError("group member " + std::to_string(k) + " exceeds node count " + std::to_string(n));
      avg[g * n + k] = T(1) / static_cast<T>(groups[g].size());
    }
  }
  return matmul(Tensor<T>(Shape{groups.size(), n}, std::move(avg)), nodes);
}

template <typename T>
std::pair<Tensor<T>, Tensor<T>> merge_scales(const Tensor<T>& keypoint_features, const ScaleGrouping& grouping) {
  grouping.validate();
  if (keypoint_features.shape().dim(-2) != kKeypoints) {
    throw DimensionError("key-point features need 17 nodes, got " + keypoint_features.shape().str());
  }
  return {group_mean(keypoint_features, grouping.s2), group_mean(keypoint_features, grouping.s3)};
}

template <typename T>
PartFeatureSet<T> partition_clip(const Tensor<T>& features, const Tensor<T>& heatmaps, const ScaleGrouping& grouping) {
  if (heatmaps.shape()[1] != kKeypoints) {
    throw DimensionError("expected 17 key-point heatmaps, got " + heatmaps.shape().str());
  }
  PartFeatureSet<T> out;
  out.global = extract_global_feature(features);
  out.parts[0] = extract_part_features(features, normalize_heatmaps(heatmaps));
  auto [s2, s3] = merge_scales(out.parts[0], grouping);
  out.parts[1] = s2;
  out.parts[2] = s3;
  return out;
}

#define CTL_INSTANTIATE_PARTITION(T)                                                                       \
  template Tensor<T> normalize_heatmaps(const Tensor<T>&);                                                 \
  template Tensor<T> extract_part_features(const Tensor<T>&, const Tensor<T>&);                            \
  template Tensor<T> extract_global_feature(const Tensor<T>&);                                             \
  template Tensor<T> group_mean(const Tensor<T>&, const NodeGroups&);                                      \
  template std::pair<Tensor<T>, Tensor<T>> merge_scales(const Tensor<T>&, const ScaleGrouping&);           \
  template PartFeatureSet<T> partition_clip(const Tensor<T>&, const Tensor<T>&, const ScaleGrouping&);

CTL_INSTANTIATE_PARTITION(float)
CTL_INSTANTIATE_PARTITION(double)

}  // namespace ctl
