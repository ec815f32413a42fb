#include "ctl/harness.hpp"

#include <algorithm>
#include <map>
#include <sstream>

namespace ctl {

double median(std::vector<double> values) {
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

GradcheckReport model_gradcheck(const RunConfig& config, const GradcheckOptions& options) {
  auto spec = config.data;
  spec.frames = config.model.frames;
  spec.channels = config.model.channels;
  const auto data = generate_dataset(spec);
  const auto cfg = resolve_config(config, data);

  std::map<int, std::vector<std::size_t>> by_id;
  for (std::size_t i = 0; i < data.train.size(); ++i) by_id[data.train.labels[i]].push_back(i);
  std::vector<std::size_t> picked;
  for (const auto& [label, clips] : by_id) {
    if (clips.size() < cfg.train.clips_per_id) throw ConfigError("gradcheck data has too few clips per identity");
    picked.insert(picked.end(), clips.begin(), clips.begin() + static_cast<std::ptrdiff_t>(cfg.train.clips_per_id));
  }
  const auto batch = data.train.select(picked);
  const auto features = batch.features.cast<double>();
  const auto heatmaps = batch.heatmaps.cast<double>();

  CtlModel<double> model(cfg.model, cfg.train.seed);
  // Move masks and BN shifts off zero. At the initial point the self term of
  // each relation embedding normalizes to exactly 0 and sits on a ReLU kink.
  std::mt19937_64 rng(cfg.train.seed + 17);
  std::uniform_real_distribution<double> small(-0.1, 0.1);
  const auto params = model.parameters();
  auto ends_with = [](const std::string& s, const std::string& tail) {
    return s.size() >= tail.size() && s.compare(s.size() - tail.size(), tail.size(), tail) == 0;
  };
  for (auto [name, p] : params) {
    if (!ends_with(name, ".mask") && !ends_with(name, ".beta")) continue;
    for (auto& v : p.mutable_data()) v += small(rng);
  }
  auto loss = [&]() {
    auto out = model.forward(features, heatmaps, batch.size(), true);
    return total_loss(out.reps, out.logits, out.parts, batch.labels, cfg.loss).total;
  };
  return gradcheck(loss, params, options);
}

std::vector<AblationArm> ablation_arms(const RunConfig& base, const std::string& axis) {
  std::vector<AblationArm> arms;
  auto with = [&](const std::string& label, auto&& edit) {
    RunConfig c = base;
    edit(c);
    c.validate();
    arms.push_back({label, c});
  };
  if (axis == "L") {
    for (std::size_t l : {1, 2, 3}) with("L=" + std::to_string(l), [l](RunConfig& c) { c.model.layers = l; });
  } else if (axis == "tau") {
    for (std::size_t t : {1, 3, 5}) with("tau=" + std::to_string(t), [t](RunConfig& c) { c.model.tau = t; });
  } else if (axis == "alpha") {
    for (double a : {0.0, 0.1, 0.3, 0.5, 1.0}) {
      std::ostringstream label;
      label << "alpha=" << a;
      with(label.str(), [a](RunConfig& c) { c.model.alpha = a; });
    }
  } else if (axis == "adjacency") {
    with("Ap", [](RunConfig& c) {
      c.model.use_physical = true;
      c.model.use_mask = false;
      c.model.use_context = false;
    });
    with("Ap+Am", [](RunConfig& c) {
      c.model.use_physical = true;
      c.model.use_mask = true;
      c.model.use_context = false;
    });
    with("Ap+Am+Ac", [](RunConfig& c) {
      c.model.use_physical = true;
      c.model.use_mask = true;
      c.model.use_context = true;
    });
  } else if (axis == "cs-scales") {
    with("M=1", [](RunConfig& c) { c.model.cs_depth = 1; });
    with("M=2", [](RunConfig& c) { c.model.cs_depth = 2; });
    with("s3", [](RunConfig& c) { c.model.cs_sources = CrossScaleSources::kS3; });
    with("s3s1", [](RunConfig& c) { c.model.cs_sources = CrossScaleSources::kS3S1; });
    with("s3s1s2", [](RunConfig& c) { c.model.cs_sources = CrossScaleSources::kS3S1S2; });
  } else {
    throw ConfigError("unknown ablation axis '" + axis + "' (expected L, tau, alpha, adjacency or cs-scales)");
  }
  return arms;
}

ArmResult run_arm(const std::string& label, const RunConfig& config, const Dataset& data,
                  const std::vector<std::uint64_t>& seeds) {
  ArmResult result;
  result.label = label;
  std::vector<double> r1, maps;
  for (auto seed : seeds) {
    auto cfg = config;
    cfg.train.seed = seed;
    TrainState state(resolve_config(cfg, data));
    train(state, data.train);
    auto eval = evaluate_model(state.model, data.test, state.config.similarity);
    r1.push_back(eval.rank(1));
    maps.push_back(eval.map);
    result.runs.push_back(std::move(eval));
  }
  result.median_rank1 = median(r1);
  result.median_map = median(maps);
  return result;
}

std::vector<ArmResult> run_ablation(const std::vector<AblationArm>& arms, const Dataset& data,
                                    const std::vector<std::uint64_t>& seeds,
                                    const std::function<void(const ArmResult&)>& on_arm) {
  std::vector<ArmResult> out;
  for (const auto& arm : arms) {
    out.push_back(run_arm(arm.label, arm.config, data, seeds));
    if (on_arm) on_arm(out.back());
  }
  return out;
}

std::string format_ablation(const std::string& axis, const std::vector<ArmResult>& results) {
  std::ostringstream out;
  out.precision(4);
  out << std::fixed;
  out << "| " << axis << " | Rank-1 | Rank-5 | mAP | seeds |\n|---|---|---|---|---|\n";
  for (const auto& r : results) {
    std::vector<double> r5;
    for (const auto& run : r.runs) r5.push_back(run.rank(5));
    out << "| " << r.label << " | " << r.median_rank1 << " | " << median(r5) << " | " << r.median_map << " | "
        << r.runs.size() << " |\n";
  }
  return out.str();
}

}  // namespace ctl
