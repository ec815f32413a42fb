#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "ctl/harness.hpp"

namespace {

void write_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
}

std::vector<std::uint64_t> parse_seeds(const std::string& text) {
  std::vector<std::uint64_t> seeds;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) seeds.push_back(std::stoull(item));
  if (seeds.empty()) throw ctl::ConfigError("no seeds given");
  return seeds;
}

int gen_data(const std::string& spec_path, const std::string& out_dir) {
  const auto spec = ctl::load_synth_spec(spec_path);
  const auto data = ctl::generate_dataset(spec);
  ctl::save_dataset(data, out_dir);
  std::printf("wrote %zu training and %zu test clips to %s\n", data.train.size(), data.test.size(), out_dir.c_str());
  return 0;
}

int train_cmd(const std::string& config_path, const std::string& data_dir, const std::string& ckpt,
              const std::string& log_path) {
  const auto data = ctl::load_dataset(data_dir);
  ctl::TrainState state(ctl::resolve_config(ctl::load_run_config(config_path), data));
  std::ofstream log;
  if (!log_path.empty()) {
    log.open(log_path);
    log << "step,epoch,lr,total,triplet,identity,diversity\n";
  }
  const auto every = std::max<std::size_t>(1, state.config.train.log_every);
  ctl::train(state, data.train, 0, [&](const ctl::StepLog& s) {
    if (log.is_open()) {
      log << s.step << ',' << s.epoch << ',' << s.lr << ',' << s.total << ',' << s.triplet << ',' << s.identity
          << ',' << s.diversity << '\n';
    }
    if (s.step % every == 0 || s.step == 1) {
      std::printf("step %4zu  epoch %3zu  lr %.2e  loss %.4f  (tri %.4f  ide %.4f  div %.4f)\n", s.step, s.epoch,
                  s.lr, s.total, s.triplet, s.identity, s.diversity);
      std::fflush(stdout);
    }
  });
  ctl::save_checkpoint(ckpt, state);
  std::printf("saved %s\n", ckpt.c_str());
  return 0;
}

int eval_cmd(const std::string& ckpt, const std::string& data_dir, const std::string& report, double min_rank1,
             double min_map) {
  const auto data = ctl::load_dataset(data_dir);
  ctl::TrainState state(ctl::checkpoint_config(ckpt));
  ctl::resolve_config(state.config, data);
  ctl::load_checkpoint(ckpt, state);
  const auto result = ctl::evaluate_model(state.model, data.test, state.config.similarity);
  if (result.skipped) std::fprintf(stderr, "warning: %zu queries had no valid gallery match\n", result.skipped);
  write_text(report, ctl::format_report(result));
  const bool ok = result.rank(1) >= min_rank1 && result.map >= min_map;
  if (!ok) std::fprintf(stderr, "below threshold: Rank-1 %.4f (min %.4f), mAP %.4f (min %.4f)\n", result.rank(1),
                        min_rank1, result.map, min_map);
  return ok ? 0 : 1;
}

int gradcheck_cmd(const std::string& config_path, std::size_t samples, double step) {
  ctl::GradcheckOptions options;
  options.samples_per_tensor = samples;
  options.step = step;
  const auto report = ctl::model_gradcheck(ctl::load_run_config(config_path), options);
  std::printf("%s: %s\n", report.passed ? "PASS" : "FAIL", report.message.c_str());
  return report.passed ? 0 : 1;
}

int ablate_cmd(const std::string& config_path, const std::string& axis, const std::string& seeds_text,
               const std::string& out) {
  const auto base = ctl::load_run_config(config_path);
  auto spec = base.data;
  spec.frames = base.model.frames;
  spec.channels = base.model.channels;
  const auto data = ctl::generate_dataset(spec);
  const auto arms = ctl::ablation_arms(base, axis);
  const auto results = ctl::run_ablation(arms, data, parse_seeds(seeds_text), [](const ctl::ArmResult& r) {
    std::fprintf(stderr, "%s: Rank-1 %.4f  mAP %.4f\n", r.label.c_str(), r.median_rank1, r.median_map);
  });
  write_text(out, ctl::format_ablation(axis, results));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spatial-temporal graph re-identification toolkit"};
  app.require_subcommand(1);

  std::string spec, out, config, data, ckpt, report, log, axis, seeds = "1";
  double min_rank1 = 0, min_map = 0, step = 1e-5;
  std::size_t samples = 0;

  auto* gen = app.add_subcommand("gen-data", "Generate a synthetic clip dataset");
  gen->add_option("--spec", spec, "SynthSpec file")->required()->check(CLI::ExistingFile);
  gen->add_option("--out", out, "Output directory")->required();

  auto* tr = app.add_subcommand("train", "Train a model and write a checkpoint");
  tr->add_option("--config", config, "Run config")->required()->check(CLI::ExistingFile);
  tr->add_option("--data", data, "Dataset directory")->required()->check(CLI::ExistingDirectory);
  tr->add_option("--out", ckpt, "Checkpoint path")->required();
  tr->add_option("--log", log, "CSV file receiving every step's losses");

  auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint on the test split");
  ev->add_option("--ckpt", ckpt, "Checkpoint path")->required()->check(CLI::ExistingFile);
  ev->add_option("--data", data, "Dataset directory")->required()->check(CLI::ExistingDirectory);
  ev->add_option("--report", report, "Markdown report path ('-' for stdout)")->default_val("-");
  ev->add_option("--min-rank1", min_rank1, "Exit nonzero below this Rank-1");
  ev->add_option("--min-map", min_map, "Exit nonzero below this mAP");

  auto* gc = app.add_subcommand("gradcheck", "Finite-difference check of the full loss");
  gc->add_option("--config", config, "Run config")->required()->check(CLI::ExistingFile);
  gc->add_option("--samples", samples, "Elements checked per tensor (0 = all)")->default_val(100);
  gc->add_option("--step", step, "Central-difference half width")->default_val(3e-6);

  auto* ab = app.add_subcommand("ablate", "Train and evaluate variants along one axis");
  ab->add_option("--config", config, "Run config")->required()->check(CLI::ExistingFile);
  ab->add_option("--axis", axis, "Axis")->required()->check(CLI::IsMember({"L", "tau", "alpha", "adjacency", "cs-scales"}));
  ab->add_option("--seeds", seeds, "Comma-separated training seeds")->default_val("1");
  ab->add_option("--out", out, "Markdown table path ('-' for stdout)")->default_val("-");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*gen) return gen_data(spec, out);
    if (*tr) return train_cmd(config, data, ckpt, log);
    if (*ev) return eval_cmd(ckpt, data, report, min_rank1, min_map);
    if (*gc) return gradcheck_cmd(config, samples, step);
    if (*ab) return ablate_cmd(config, axis, seeds, out);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
