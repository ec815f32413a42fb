#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "ctl/config.hpp"
#include "ctl/csgcl.hpp"
#include "ctl/gcl3d.hpp"
#include "ctl/head.hpp"

namespace ctl {

template <typename T>
struct ModelOutput {
  Tensor<T> global;                 // V_g [B, T, C]
  std::array<Tensor<T>, 3> scales;  // refined per-scale nodes [B, T, N_s, C]; undefined when unused
  Tensor<T> parts;                  // V_p [B, T, N3, C]
  FusedRepresentations<T> reps;     // each [B, C]
  std::array<Tensor<T>, 3> logits;  // each [B, K]
};

// Independent generator per named component, so a component's initial
// weights do not depend on which other components exist.
std::mt19937_64 component_rng(std::uint64_t seed, const std::string& name);

template <typename T>
class CtlModel {
 public:
  // config.num_classes must be resolved (nonzero).
  CtlModel(const ModelConfig& config, std::uint64_t seed);

  // features [B*T, H, W, C], heatmaps [B*T, 17, H, W] with clips stacked
  // along the frame axis.
  ModelOutput<T> forward(const Tensor<T>& features, const Tensor<T>& heatmaps, std::size_t clips, bool training);

  // Learnable tensors and running statistics, each under a stable name.
  NamedTensors<T> parameters() const;
  NamedTensors<T> buffers() const;
  // parameters() followed by buffers().
  NamedTensors<T> state() const;

  const ModelConfig& config() const { return config_; }
  bool uses_scale(std::size_t scale) const;

 private:
  ModelConfig config_;
  std::array<std::optional<TopologyBundle<T>>, 3> topology_;
  std::array<std::optional<Gcl3dStack<T>>, 3> gcl_;
  CrossScaleModule<T> cross_;
  FusionBlock<T> fusion_;
  std::vector<Linear<T>> classifiers_;  // three, or one when shared
};

}  // namespace ctl
