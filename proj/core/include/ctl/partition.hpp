#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include "ctl/ops.hpp"

namespace ctl {

inline constexpr std::size_t kKeypoints = 17;

// COCO key-point order.
enum Keypoint : std::size_t {
  kNose, kLeftEye, kRightEye, kLeftEar, kRightEar,
  kLeftShoulder, kRightShoulder, kLeftElbow, kRightElbow, kLeftWrist, kRightWrist,
  kLeftHip, kRightHip, kLeftKnee, kRightKnee, kLeftAnkle, kRightAnkle,
};

using NodeGroups = std::vector<std::vector<std::size_t>>;

// Membership of coarse parts in terms of key-points. Each scale must be a
// partition of {0..16}: disjoint, non-empty groups covering every key-point.
struct ScaleGrouping {
  NodeGroups s2;
  NodeGroups s3;

  // head, shoulders, arms, hips, knees, ankles (10) / head, torso, arms, legs (5)
  static ScaleGrouping canonical();
  void validate() const;  // throws ConfigError
  // Groups of a scale index (0 = key-points, identity groups).
  NodeGroups groups(std::size_t scale) const;
  std::size_t nodes(std::size_t scale) const;
};

template <typename T>
struct PartFeatureSet {
  Tensor<T> global;                // [T, C]
  std::array<Tensor<T>, 3> parts;  // [T, 17, C], [T, N2, C], [T, N3, C]
};

// Softmax over the flattened H x W positions of every (frame, key-point) map.
template <typename T>
Tensor<T> normalize_heatmaps(const Tensor<T>& heatmaps);

// Heatmap-weighted spatial sum: out[t, k, :] = sum_{h,w} m[t,k,h,w] F[t,h,w,:].
// This equals global average pooling of the outer product F (x) m up to the
// constant H*W, which the softmax normalization already absorbs.
template <typename T>
Tensor<T> extract_part_features(const Tensor<T>& features, const Tensor<T>& normalized_heatmaps);

// Unweighted spatial mean per frame: [T, H, W, C] -> [T, C].
template <typename T>
Tensor<T> extract_global_feature(const Tensor<T>& features);

// Mean of member nodes along axis -2: [.., N, C] -> [.., groups, C].
template <typename T>
Tensor<T> group_mean(const Tensor<T>& nodes, const NodeGroups& groups);

template <typename T>
std::pair<Tensor<T>, Tensor<T>> merge_scales(const Tensor<T>& keypoint_features, const ScaleGrouping& grouping);

// Full extraction for one clip (or several clips stacked along the frame axis).
template <typename T>
PartFeatureSet<T> partition_clip(const Tensor<T>& features, const Tensor<T>& heatmaps, const ScaleGrouping& grouping);

}  // namespace ctl
