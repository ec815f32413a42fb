#pragma once

#include <cstddef>
#include <filesystem>
#include <vector>

#include "ctl/config.hpp"

namespace ctl {

// Clips stacked along the frame axis: clip i owns frames [i*T, (i+1)*T).
struct ClipSet {
  std::size_t frames = 0;
  Tensorf features;  // [N*T, H, W, C]
  Tensorf heatmaps;  // [N*T, 17, H, W] (unnormalized logits)
  std::vector<int> labels;
  std::vector<int> cameras;

  std::size_t size() const { return labels.size(); }
  // Copies the selected clips, in order, into a new set.
  ClipSet select(const std::vector<std::size_t>& clips) const;
};

struct Dataset {
  SynthSpec spec;
  ClipSet train;  // identities 0 .. identities-1
  ClipSet test;   // identities offset by `identities`, disjoint from train
};

// Part signatures per identity placed at jittered key-point locations, a
// camera-specific linear distortion and bias, additive noise, and heatmaps as
// bumps at the same locations. Fully determined by the spec.
Dataset generate_dataset(const SynthSpec& spec);

// <dir>/train.bin and <dir>/test.bin, tensor tables with magic "CTLD".
void save_dataset(const Dataset& data, const std::filesystem::path& dir);
Dataset load_dataset(const std::filesystem::path& dir);

// Canonical key-point positions (row, column) on an H x W grid.
std::vector<std::pair<double, double>> canonical_pose(std::size_t height, std::size_t width);

}  // namespace ctl
