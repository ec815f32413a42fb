#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "ctl/evaluate.hpp"
#include "ctl/gradcheck.hpp"
#include "ctl/train.hpp"

namespace ctl {

// Double-precision model on a small batch generated from config.data (every
// training identity, clips_per_id clips each), checked over the full loss.
GradcheckReport model_gradcheck(const RunConfig& config, const GradcheckOptions& options = {});

struct AblationArm {
  std::string label;
  RunConfig config;
};

// Variants along one axis: L, tau, alpha, adjacency, cs-scales.
std::vector<AblationArm> ablation_arms(const RunConfig& base, const std::string& axis);

struct ArmResult {
  std::string label;
  std::vector<RetrievalResult> runs;  // one per seed
  double median_rank1 = 0;
  double median_map = 0;
};

// Trains and evaluates `config` once per seed (the seed replaces train.seed).
ArmResult run_arm(const std::string& label, const RunConfig& config, const Dataset& data,
                  const std::vector<std::uint64_t>& seeds);

std::vector<ArmResult> run_ablation(const std::vector<AblationArm>& arms, const Dataset& data,
                                    const std::vector<std::uint64_t>& seeds,
                                    const std::function<void(const ArmResult&)>& on_arm = {});

std::string format_ablation(const std::string& axis, const std::vector<ArmResult>& results);

double median(std::vector<double> values);

}  // namespace ctl
