#pragma once

#include <cstddef>
#include <optional>
#include <random>
#include <vector>

#include "ctl/nn.hpp"

namespace ctl {

// Relation-augmented node embeddings for one scale:
//   p_i = sum_j h([phi(x_i), varphi(x_j - x_i)]),  r_i = f([x_i, p_i]).
// The sum runs over every node including j = i. X [M, N, C] -> R [M, N, d].
template <typename T>
Tensor<T> relation_embed(const Tensor<T>& x, Embedding<T>& phi, Embedding<T>& varphi, Embedding<T>& h,
                         Embedding<T>& f, bool training);

// Softmax over source nodes of r_tgt . r_src: [M, Nt, d] x [M, Ns, d] -> [M, Nt, Ns].
template <typename T>
Tensor<T> cross_scale_adjacency(const Tensor<T>& source_relations, const Tensor<T>& target_relations);

// ReLU(A X_src W): [M, Nt, Ns] x [M, Ns, C] -> [M, Nt, C].
template <typename T>
Tensor<T> cross_scale_conv(const Tensor<T>& source, const Tensor<T>& adjacency, const Tensor<T>& weight);

// V_p = X_s3 + alpha (X_s13 + X_s23); absent transfers contribute nothing.
template <typename T>
Tensor<T> fuse_scales(const Tensor<T>& coarse, const std::optional<Tensor<T>>& from_s1,
                      const std::optional<Tensor<T>>& from_s2, T alpha);

// Embeddings and transfer weight of one directed source -> target transfer.
template <typename T>
struct CrossScaleTransfer {
  Embedding<T> phi;
  Embedding<T> varphi;
  Embedding<T> h_source, f_source;
  Embedding<T> h_target, f_target;
  Tensor<T> weight;  // [C, C]

  // source [M, Ns, C], target [M, Nt, C] -> transferred [M, Nt, C]
  Tensor<T> forward(const Tensor<T>& source, const Tensor<T>& target, bool training);
  // The attention matrix alone, for inspection.
  Tensor<T> adjacency(const Tensor<T>& source, const Tensor<T>& target, bool training);
  void collect(const std::string& prefix, NamedTensors<T>& params) const;
  void collect_buffers(const std::string& prefix, NamedTensors<T>& buffers) const;
};

template <typename T>
CrossScaleTransfer<T> make_cross_scale_transfer(std::size_t channels, std::size_t embed_dim, std::mt19937_64& rng);

enum class CrossScaleSources { kS3, kS3S1, kS3S1S2 };

struct CsgclOptions {
  double alpha = 0.3;
  std::size_t embed_dim = 0;  // 0 selects C / 4
  std::size_t depth = 1;      // stacked applications M
  CrossScaleSources sources = CrossScaleSources::kS3S1S2;
};

// Cross-scale stage: transfers from s1 and s2 into s3, fused with alpha. With
// depth M > 1 each further application uses the previous fused parts as its
// target features.
template <typename T>
class CrossScaleModule {
 public:
  CrossScaleModule() = default;
  CrossScaleModule(std::size_t channels, const CsgclOptions& options, std::mt19937_64& rng);

  // Per-frame features [M, N_s, C] for each scale -> V_p [M, N3, C].
  Tensor<T> forward(const Tensor<T>& s1, const Tensor<T>& s2, const Tensor<T>& s3, bool training);

  const CsgclOptions& options() const { return options_; }
  bool needs_s1() const { return options_.sources != CrossScaleSources::kS3; }
  bool needs_s2() const { return options_.sources == CrossScaleSources::kS3S1S2; }
  void collect(const std::string& prefix, NamedTensors<T>& params) const;
  void collect_buffers(const std::string& prefix, NamedTensors<T>& buffers) const;

 private:
  struct Stage {
    std::optional<CrossScaleTransfer<T>> from_s1;
    std::optional<CrossScaleTransfer<T>> from_s2;
  };
  CsgclOptions options_;
  std::vector<Stage> stages_;
};

}  // namespace ctl
