#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

#include "ctl/csgcl.hpp"
#include "ctl/head.hpp"
#include "ctl/partition.hpp"
#include "ctl/topology.hpp"

namespace ctl {

enum class Similarity { kCosine, kEuclidean };
enum class BlockContext { kWindow, kClip };

struct ModelConfig {
  std::size_t frames = 6;
  std::size_t channels = 40;
  std::size_t tau = 3;
  std::size_t layers = 2;
  double alpha = 0.3;
  std::size_t embed_dim = 0;  // 0 -> channels / 4
  std::size_t cs_depth = 1;
  CrossScaleSources cs_sources = CrossScaleSources::kS3S1S2;
  bool use_physical = true;
  bool use_mask = true;
  bool use_context = true;
  bool context_relu = false;
  BlockContext block_context = BlockContext::kWindow;
  double degree_eps = 1e-4;
  bool shared_classifier = false;
  std::size_t num_classes = 0;  // 0 -> number of training identities
  ScaleGrouping grouping = ScaleGrouping::canonical();
  EdgeList skeleton = coco_skeleton();

  std::size_t resolved_embed_dim() const { return embed_dim ? embed_dim : std::max<std::size_t>(1, channels / 4); }
  void validate() const;
};

struct TrainConfig {
  double lr = 3e-4;
  double weight_decay = 5e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  std::size_t steps = 200;
  std::size_t ids_per_batch = 8;
  std::size_t clips_per_id = 4;
  std::size_t lr_decay_every = 60;  // epochs; 0 disables
  double lr_decay_factor = 0.1;
  std::uint64_t seed = 1;
  std::size_t log_every = 10;
};

// Synthetic clip generator parameters.
struct SynthSpec {
  std::size_t identities = 8;       // training identities
  std::size_t test_identities = 8;  // disjoint identities for evaluation
  std::size_t cameras = 2;
  std::size_t clips_per_camera = 4;
  std::size_t frames = 6;
  std::size_t height = 8;
  std::size_t width = 4;
  std::size_t channels = 40;
  double noise = 0.3;
  double occlusion = 0.1;
  double jitter = 0.35;
  double distortion = 0.3;
  std::uint64_t seed = 2024;

  void validate() const;
};

// Run configuration: model, loss, optimizer and an embedded synthetic-data
// section (keys prefixed "data.") used by the gradcheck and ablation drivers.
struct RunConfig {
  ModelConfig model;
  LossWeights loss;
  TrainConfig train;
  Similarity similarity = Similarity::kCosine;
  SynthSpec data;

  void validate() const;
  // Sorted `key = value` lines covering every key; parse(canonical()) == *this.
  std::string canonical() const;
  std::uint64_t hash() const;
};

// Flat `key = value` text; '#' starts a comment. Unknown keys, duplicates and
// malformed values are ConfigErrors that name the line.
RunConfig parse_run_config(const std::string& text);
RunConfig load_run_config(const std::filesystem::path& path);
SynthSpec parse_synth_spec(const std::string& text);
SynthSpec load_synth_spec(const std::filesystem::path& path);
std::string canonical_synth_spec(const SynthSpec& spec);

std::uint64_t fnv1a64(const std::string& bytes);

std::string format_groups(const NodeGroups& groups);
NodeGroups parse_groups(const std::string& text);
std::string format_edges(const EdgeList& edges);
EdgeList parse_edges(const std::string& text);

}  // namespace ctl
