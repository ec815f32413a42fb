#include "ctl/train.hpp"

#include <algorithm>
#include <map>

#include "ctl/tensor_io.hpp"

namespace ctl {
namespace {

constexpr Magic kCheckpointMagic{'C', 'T', 'L', 'W'};
constexpr std::uint32_t kCheckpointVersion = 1;

std::vector<Tensor<float>> tensors_of(const NamedTensors<float>& named) {
  std::vector<Tensor<float>> out;
  for (const auto& [name, t] : named) out.push_back(t);
  return out;
}

}  // namespace

PkSampler::PkSampler(const std::vector<int>& labels, std::size_t ids_per_batch, std::size_t clips_per_id,
                     std::uint64_t seed)
    : p_(ids_per_batch), k_(clips_per_id), rng_(seed) {
  std::map<int, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < labels.size(); ++i) groups[labels[i]].push_back(i);
  for (auto& [label, clips] : groups) {
    if (clips.size() < k_) {
      throw ConfigError("identity " + std::to_string(label) + " has " + std::to_string(clips.size()) +
                        " clips, fewer than clips_per_id = " + std::to_string(k_));
    }
    by_identity_.push_back(std::move(clips));
  }
  if (by_identity_.size() < p_) {
    throw ConfigError("ids_per_batch = " + std::to_string(p_) + " exceeds the " +
                      std::to_string(by_identity_.size()) + " identities available");
  }
}

std::vector<std::size_t> PkSampler::next() {
  std::vector<std::size_t> ids(by_identity_.size());
  for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = i;
  std::shuffle(ids.begin(), ids.end(), rng_);
  ids.resize(p_);
  std::sort(ids.begin(), ids.end());
  std::vector<std::size_t> batch;
  for (auto id : ids) {
    auto clips = by_identity_[id];
    std::shuffle(clips.begin(), clips.end(), rng_);
    batch.insert(batch.end(), clips.begin(), clips.begin() + static_cast<std::ptrdiff_t>(k_));
  }
  return batch;
}

RunConfig resolve_config(RunConfig config, const Dataset& data) {
  const auto& s = data.spec;
  if (s.frames != config.model.frames || s.channels != config.model.channels) {
    throw DimensionError("data has T=" + std::to_string(s.frames) + ", C=" + std::to_string(s.channels) +
                         " but the config expects T=" + std::to_string(config.model.frames) +
                         ", C=" + std::to_string(config.model.channels));
  }
  if (config.model.num_classes == 0) config.model.num_classes = s.identities;
  if (config.model.num_classes < s.identities) {
    throw ConfigError("num_classes = " + std::to_string(config.model.num_classes) + " is below the " +
                      std::to_string(s.identities) + " training identities");
  }
  config.validate();
  return config;
}

TrainState::TrainState(const RunConfig& resolved) : config(resolved), model(resolved.model, resolved.train.seed) {
  optimizer.options.lr = config.train.lr;
  optimizer.options.beta1 = config.train.beta1;
  optimizer.options.beta2 = config.train.beta2;
  optimizer.options.eps = config.train.adam_eps;
  optimizer.options.weight_decay = config.train.weight_decay;
}

std::vector<StepLog> train(TrainState& state, const ClipSet& data, std::size_t steps,
                           const std::function<void(const StepLog&)>& on_step) {
  const auto& cfg = state.config;
  if (steps == 0) steps = cfg.train.steps;
  PkSampler sampler(data.labels, cfg.train.ids_per_batch, cfg.train.clips_per_id, cfg.train.seed);
  const std::size_t steps_per_epoch = std::max<std::size_t>(1, data.size() / sampler.batch_size());
  auto params = tensors_of(state.model.parameters());
  std::vector<StepLog> log;
  for (std::size_t i = 0; i < steps; ++i) {
    StepLog entry;
    entry.step = static_cast<std::size_t>(state.optimizer.step) + 1;
    entry.epoch = (entry.step - 1) / steps_per_epoch;
    entry.lr = step_decay_lr(cfg.train.lr, static_cast<std::int64_t>(entry.epoch),
                             static_cast<std::int64_t>(cfg.train.lr_decay_every), cfg.train.lr_decay_factor);
    state.optimizer.options.lr = entry.lr;

    // batches depend on the step alone so a resumed run sees the same ones
    sampler.reseed(cfg.train.seed ^ (0x9E3779B97F4A7C15ULL * entry.step));
    const auto batch = data.select(sampler.next());
    GradTape<float> tape;
    {
      TapeScope<float> scope(tape);
      auto out = state.model.forward(batch.features, batch.heatmaps, batch.size(), true);
      auto losses = total_loss(out.reps, out.logits, out.parts, batch.labels, cfg.loss);
      entry.total = losses.total.item();
      entry.triplet = losses.triplet.item();
      entry.identity = losses.identity.item();
      entry.diversity = losses.diversity.item();
      if (!std::isfinite(entry.total)) {
        throw NumericError("training diverged at step " + std::to_string(entry.step) + ": loss is " +
                           std::to_string(entry.total) + " (triplet " + std::to_string(entry.triplet) +
                           ", identity " + std::to_string(entry.identity) + ", diversity " +
                           std::to_string(entry.diversity) + ")");
      }
      tape.backward(losses.total);
    }
    adam_step(params, state.optimizer);
    zero_grads(params);
    log.push_back(entry);
    if (on_step) on_step(entry);
  }
  return log;
}

void save_checkpoint(const std::filesystem::path& path, const TrainState& state) {
  std::vector<TensorRecord> records;
  records.push_back(text_record("meta.config", state.config.canonical()));
  records.push_back(u64_record("meta.config_hash", state.config.hash()));
  const auto params = state.model.parameters();
  for (const auto& [name, t] : state.model.state()) records.push_back(to_record(name, t));
  records.push_back(u64_record("adam.step", static_cast<std::uint64_t>(state.optimizer.step)));
  const auto& m = state.optimizer.first_moment;
  const auto& v = state.optimizer.second_moment;
  for (std::size_t i = 0; i < m.size() && i < params.size(); ++i) {
    const auto& [name, t] = params[i];
    records.push_back(TensorRecord{"adam.m." + name, t.shape(), m[i]});
    records.push_back(TensorRecord{"adam.v." + name, t.shape(), v[i]});
  }
  write_tensor_table_file(path, kCheckpointMagic, kCheckpointVersion, records);
}

RunConfig checkpoint_config(const std::filesystem::path& path) {
  const auto records = read_tensor_table_file(path, kCheckpointMagic, kCheckpointVersion);
  auto config = parse_run_config(record_text(find_record(records, "meta.config")));
  if (config.hash() != record_u64(find_record(records, "meta.config_hash"))) {
    throw FormatError("checkpoint config text does not match its stored hash");
  }
  return config;
}

void load_checkpoint(const std::filesystem::path& path, TrainState& state) {
  const auto records = read_tensor_table_file(path, kCheckpointMagic, kCheckpointVersion);
  std::map<std::string, const TensorRecord*> index;
  for (const auto& r : records) index[r.name] = &r;
  auto lookup = [&](const std::string& name) -> const TensorRecord& {
    auto it = index.find(name);
    if (it == index.end()) throw FormatError("checkpoint is missing tensor '" + name + "'");
    return *it->second;
  };

  const auto named = state.model.state();
  for (const auto& [name, t] : named) {
    const auto& r = lookup(name);
    if (r.shape != t.shape()) {
      throw DimensionError("checkpoint tensor '" + name + "' has shape " + r.shape.str() + " but the model expects " +
                           t.shape().str());
    }
  }
  const auto stored_hash = record_u64(lookup("meta.config_hash"));
  if (stored_hash != state.config.hash()) {
    throw FormatError("checkpoint config hash does not match the current run config");
  }

  for (auto [name, t] : named) {
    const auto& r = lookup(name);
    std::copy(r.data.begin(), r.data.end(), t.mutable_data().begin());
  }
  const auto params = state.model.parameters();
  state.optimizer.step = static_cast<std::int64_t>(record_u64(lookup("adam.step")));
  state.optimizer.first_moment.clear();
  state.optimizer.second_moment.clear();
  if (index.count("adam.m." + params.front().first)) {
    for (const auto& [name, t] : params) {
      const auto& m = lookup("adam.m." + name);
      const auto& v = lookup("adam.v." + name);
      if (m.shape != t.shape() || v.shape != t.shape()) {
        throw DimensionError("optimizer state for '" + name + "' does not match the parameter shape");
      }
      state.optimizer.first_moment.push_back(m.data);
      state.optimizer.second_moment.push_back(v.data);
    }
  }
}

}  // namespace ctl
