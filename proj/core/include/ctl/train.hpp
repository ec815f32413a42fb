#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <vector>

#include "ctl/adam.hpp"
#include "ctl/model.hpp"
#include "ctl/synth.hpp"

namespace ctl {

// Draws P identities and K distinct clips of each per batch.
class PkSampler {
 public:
  PkSampler(const std::vector<int>& labels, std::size_t ids_per_batch, std::size_t clips_per_id, std::uint64_t seed);
  std::vector<std::size_t> next();
  void reseed(std::uint64_t seed) { rng_.seed(seed); }
  std::size_t batch_size() const { return p_ * k_; }

 private:
  std::size_t p_, k_;
  std::vector<std::vector<std::size_t>> by_identity_;
  std::mt19937_64 rng_;
};

struct StepLog {
  std::size_t step = 0;
  std::size_t epoch = 0;
  double lr = 0;
  double total = 0;
  double triplet = 0;
  double identity = 0;
  double diversity = 0;
};

// Checks the run config against the data and fills in num_classes.
RunConfig resolve_config(RunConfig config, const Dataset& data);

struct TrainState {
  RunConfig config;
  CtlModel<float> model;
  AdamState<float> optimizer;

  explicit TrainState(const RunConfig& resolved);
};

// Runs config.train.steps steps (or `steps` when nonzero). Aborts with a
// NumericError naming the step when the loss stops being finite.
std::vector<StepLog> train(TrainState& state, const ClipSet& data, std::size_t steps = 0,
                           const std::function<void(const StepLog&)>& on_step = {});

// Model tensors, Adam moments and step, and the canonical config (text and
// hash), in the "CTLW" tensor-table format.
void save_checkpoint(const std::filesystem::path& path, const TrainState& state);
// Embedded run config of a checkpoint.
RunConfig checkpoint_config(const std::filesystem::path& path);
// Loads into an existing state. Tensor extents are checked first, each
// mismatch a DimensionError naming the tensor, then the config hash.
void load_checkpoint(const std::filesystem::path& path, TrainState& state);

}  // namespace ctl
