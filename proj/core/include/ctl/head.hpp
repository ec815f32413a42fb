#pragma once

#include <array>
#include <cstddef>
#include <random>
#include <vector>

#include "ctl/nn.hpp"

namespace ctl {

template <typename T>
struct FusedRepresentations {
  Tensor<T> global;     // V_f^g [B, C]
  Tensor<T> aggregate;  // V_f^a [B, C], the retrieval representation
  Tensor<T> concat;     // V_f^c [B, C]

  std::array<Tensor<T>, 3> all() const { return {global, aggregate, concat}; }
};

// Three-branch fusion of part features V_p [B, T, Np, C] with the global
// feature V_g [B, T, C]. The third branch reduces each part to C / Np channels
// and concatenates the parts back to C.
template <typename T>
struct FusionBlock {
  Linear<T> reduce;  // C -> C / Np

  FusedRepresentations<T> forward(const Tensor<T>& parts, const Tensor<T>& global) const;
  void collect(const std::string& prefix, NamedTensors<T>& params) const;
};

template <typename T>
FusionBlock<T> make_fusion_block(std::size_t channels, std::size_t parts, std::mt19937_64& rng);

struct LossWeights {
  double triplet = 1.0;
  double identity = 1.0;
  double diversity = 1.0;
  double margin = 0.3;
  double smoothing = 0.1;
};

// Batch-hard triplet loss with Euclidean distances: every anchor takes its
// farthest positive and nearest negative; the hinge is averaged over anchors.
// Needs at least two identities and two clips per identity.
template <typename T>
Tensor<T> triplet_loss_batchhard(const Tensor<T>& embeddings, const std::vector<int>& labels, T margin);

// Cross-entropy against (1 - eps) one-hot + eps / K, averaged over the batch.
template <typename T>
Tensor<T> id_loss_labelsmooth(const Tensor<T>& logits, const std::vector<int>& labels, T smoothing);

// ||V V^T - I||_F^2 of the temporally pooled, row-normalized parts. Accepts
// one clip [T, Np, C] or a batch [B, T, Np, C], averaged over clips.
template <typename T>
Tensor<T> diversity_loss(const Tensor<T>& parts);

template <typename T>
struct LossBreakdown {
  Tensor<T> total;
  Tensor<T> triplet;    // summed over the three features
  Tensor<T> identity;   // summed over the three features
  Tensor<T> diversity;
};

// lambda1 * L_tri + lambda2 * L_ide + lambda3 * L_div, with the triplet and
// identification terms applied to each of V_f^g, V_f^a, V_f^c and summed.
template <typename T>
LossBreakdown<T> total_loss(const FusedRepresentations<T>& reps, const std::array<Tensor<T>, 3>& logits,
                            const Tensor<T>& parts, const std::vector<int>& labels, const LossWeights& weights);

}  // namespace ctl
