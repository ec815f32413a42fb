#include <benchmark/benchmark.h>

#include <filesystem>

#include "ctl/gcl3d.hpp"
#include "ctl/train.hpp"

using namespace ctl;

namespace {

Tensorf gaussian(const Shape& shape, std::mt19937_64& rng) {
  std::normal_distribution<float> nd;
  std::vector<float> v(shape.numel());
  for (auto& x : v) x = nd(rng);
  return Tensorf(shape, std::move(v));
}

void bm_matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  std::mt19937_64 rng(1);
  auto a = gaussian({n, n}, rng), b = gaussian({n, n}, rng);
  for (auto _ : state) benchmark::DoNotOptimize(matmul(a, b));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(2 * n * n * n));
}
BENCHMARK(bm_matmul)->Arg(32)->Arg(64)->Arg(128);

// One windowed convolution over a clip batch at the key-point scale.
void bm_graph_conv_3d(benchmark::State& state) {
  const auto c = static_cast<std::size_t>(state.range(0));
  const std::size_t b = 8, t = 6, tau = 3, n = 17;
  std::mt19937_64 rng(2);
  auto windows = slide_windows(gaussian({b, t, n, c}, rng), tau);
  auto adjacency = gaussian({tau * n, tau * n}, rng);
  auto weight = gaussian({c, c}, rng);
  for (auto _ : state) benchmark::DoNotOptimize(graph_conv_3d<float>(windows, adjacency, weight, 1e-4f));
}
BENCHMARK(bm_graph_conv_3d)->Arg(40)->Arg(128);

void bm_train_step(benchmark::State& state) {
  auto cfg = load_run_config(std::filesystem::path(CTL_SOURCE_DIR) / "configs" / "desk.cfg");
  auto spec = load_synth_spec(std::filesystem::path(CTL_SOURCE_DIR) / "configs" / "desk_data.cfg");
  spec.frames = cfg.model.frames;
  spec.channels = cfg.model.channels;
  const auto data = generate_dataset(spec);
  TrainState ts(resolve_config(cfg, data));
  for (auto _ : state) benchmark::DoNotOptimize(train(ts, data.train, 1));
}
BENCHMARK(bm_train_step)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
