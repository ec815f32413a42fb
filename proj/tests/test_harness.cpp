#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <set>
#include <sstream>

#include "ctl/harness.hpp"
#include "ctl/tensor_io.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace ctl;
using namespace ctl::testing;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("ctl_test_" + name + "_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()));
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// T=3, C=10 run over two training and two test identities.
RunConfig tiny_config() {
  auto cfg = load_run_config(fs::path(CTL_SOURCE_DIR) / "configs" / "tiny_gradcheck.cfg");
  cfg.data.clips_per_camera = 2;
  cfg.train.steps = 3;
  return cfg;
}

Dataset data_for(const RunConfig& cfg) {
  auto spec = cfg.data;
  spec.frames = cfg.model.frames;
  spec.channels = cfg.model.channels;
  return generate_dataset(spec);
}

}  // namespace

TEST(Config, ShippedConfigsLoad) {
  const fs::path dir = fs::path(CTL_SOURCE_DIR) / "configs";
  auto desk = load_run_config(dir / "desk.cfg");
  EXPECT_EQ(desk.model.channels, 40u);
  EXPECT_EQ(desk.model.frames, 6u);
  EXPECT_EQ(desk.train.steps, 200u);
  EXPECT_EQ(desk.train.ids_per_batch, 8u);
  EXPECT_EQ(desk.train.clips_per_id, 4u);
  auto spec = load_synth_spec(dir / "desk_data.cfg");
  EXPECT_EQ(spec.identities, 8u);
  EXPECT_EQ(spec.cameras, 2u);
  EXPECT_NO_THROW(load_run_config(dir / "tiny_gradcheck.cfg"));
}

TEST(Config, DefaultsFollowTheReferenceSettings) {
  RunConfig c;
  EXPECT_EQ(c.model.layers, 2u);
  EXPECT_EQ(c.model.tau, 3u);
  EXPECT_DOUBLE_EQ(c.model.alpha, 0.3);
  EXPECT_DOUBLE_EQ(c.train.lr, 3e-4);
  EXPECT_DOUBLE_EQ(c.train.weight_decay, 5e-4);
  EXPECT_EQ(c.train.lr_decay_every, 60u);
  EXPECT_DOUBLE_EQ(c.train.lr_decay_factor, 0.1);
}

TEST(Config, CanonicalRoundTrip) {
  RunConfig c;
  c.model.tau = 5;
  c.model.alpha = 0.1 + 0.2;  // not exactly 0.3
  c.model.cs_sources = CrossScaleSources::kS3S1;
  c.model.use_context = false;
  c.model.block_context = BlockContext::kClip;
  c.model.grouping.s3 = {{0, 1, 2, 3, 4, 5, 6, 11, 12}, {7, 8, 9, 10}, {13, 14, 15, 16}};
  c.model.channels = 42;
  c.model.skeleton.pop_back();
  c.loss.margin = 0.25;
  c.similarity = Similarity::kEuclidean;
  c.train.seed = 123456789012345ULL;
  c.data.noise = 1.0 / 3.0;
  const auto text = c.canonical();
  auto back = parse_run_config(text);
  EXPECT_EQ(back.canonical(), text);
  EXPECT_EQ(back.hash(), c.hash());
  EXPECT_EQ(back.model.alpha, c.model.alpha);
  EXPECT_EQ(back.data.noise, c.data.noise);
  EXPECT_EQ(back.model.grouping.s3, c.model.grouping.s3);
  EXPECT_EQ(back.model.skeleton, c.model.skeleton);
  EXPECT_NE(RunConfig{}.hash(), c.hash());
}

TEST(Config, ErrorsNameTheLine) {
  auto expect_line = [](const std::string& text, const std::string& line) {
    try {
      parse_run_config(text);
      ADD_FAILURE() << "accepted: " << text;
    } catch (const ConfigError& e) {
      EXPECT_NE(std::string(e.what()).find(line), std::string::npos) << e.what();
    }
  };
  expect_line("frames = 6\nframe = 6\n", "line 2");
  expect_line("# c\nlayers = 2\nlayers = 3\n", "line 3");
  expect_line("tau = three\n", "line 1");
  expect_line("alpha = 0.3x\n", "line 1");
  expect_line("\nuse_Ap = maybe\n", "line 2");
  expect_line("cs_scales = s2\n", "line 1");
  expect_line("no equals sign\n", "line 1");
}

TEST(Config, ValidationRejectsBadModels) {
  EXPECT_THROW(parse_run_config("tau = 2\n"), ConfigError);
  EXPECT_THROW(parse_run_config("channels = 42\n"), ConfigError);  // 42 % 5 != 0
  EXPECT_THROW(parse_run_config("layers = 0\n"), ConfigError);
  EXPECT_THROW(parse_run_config("degree_eps = 0\n"), ConfigError);
  EXPECT_THROW(parse_run_config("label_smoothing = 1\n"), ConfigError);
  EXPECT_THROW(parse_run_config("lambda_tri = -1\n"), ConfigError);
  EXPECT_THROW(parse_run_config("clips_per_id = 1\n"), ConfigError);
  EXPECT_THROW(parse_run_config("s3_groups = 0,1,2; 3\n"), ConfigError);
  EXPECT_THROW(parse_run_config("skeleton_edges = 0-99\n"), ConfigError);
  EXPECT_NO_THROW(parse_run_config("tau = 5\nlayers = 3\nchannels = 2050\n"));
}

TEST(Config, GroupAndEdgeText) {
  NodeGroups g{{0, 1, 2}, {5}, {6}};
  EXPECT_EQ(parse_groups(format_groups(g)), g);
  EXPECT_EQ(parse_groups("0,1,2; 5; 6"), g);
  EdgeList e{{15, 13}, {13, 11}};
  EXPECT_EQ(parse_edges("15-13, 13-11"), e);
  EXPECT_EQ(parse_edges(format_edges(coco_skeleton())), coco_skeleton());
}

TEST(Synth, SameSeedGivesByteIdenticalFiles) {
  auto spec = load_synth_spec(fs::path(CTL_SOURCE_DIR) / "configs" / "desk_data.cfg");
  auto a = scratch_dir("synth_a"), b = scratch_dir("synth_b");
  save_dataset(generate_dataset(spec), a);
  save_dataset(generate_dataset(spec), b);
  EXPECT_EQ(slurp(a / "train.bin"), slurp(b / "train.bin"));
  EXPECT_EQ(slurp(a / "test.bin"), slurp(b / "test.bin"));
  spec.seed += 1;
  auto c = scratch_dir("synth_c");
  save_dataset(generate_dataset(spec), c);
  EXPECT_NE(slurp(a / "train.bin"), slurp(c / "train.bin"));
  fs::remove_all(a);
  fs::remove_all(b);
  fs::remove_all(c);
}

TEST(Synth, SaveLoadRoundTrip) {
  SynthSpec spec;
  spec.identities = 3;
  spec.test_identities = 2;
  spec.frames = 2;
  spec.channels = 5;
  auto data = generate_dataset(spec);
  EXPECT_EQ(data.train.size(), 3u * 2 * 4);
  EXPECT_EQ(data.test.size(), 2u * 2 * 4);
  EXPECT_EQ(data.train.features.shape(), Shape({24 * 2, 8, 4, 5}));
  EXPECT_EQ(data.train.heatmaps.shape(), Shape({24 * 2, 17, 8, 4}));
  auto dir = scratch_dir("synth_rt");
  save_dataset(data, dir);
  auto back = load_dataset(dir);
  EXPECT_EQ(canonical_synth_spec(back.spec), canonical_synth_spec(spec));
  expect_all_near(back.train.features.data(), data.train.features.data(), 0.0);
  expect_all_near(back.test.heatmaps.data(), data.test.heatmaps.data(), 0.0);
  EXPECT_EQ(back.test.labels, data.test.labels);
  EXPECT_EQ(back.test.cameras, data.test.cameras);
  for (int l : back.test.labels) EXPECT_GE(l, 3);  // disjoint from training identities
  fs::remove_all(dir);
}

TEST(Synth, NoNoiseNoJitterGivesIdenticalClipsPerIdentityAndCamera) {
  SynthSpec spec;
  spec.identities = 3;
  spec.test_identities = 1;
  spec.frames = 2;
  spec.channels = 5;
  spec.noise = 0;
  spec.jitter = 0;
  spec.occlusion = 0;
  auto data = generate_dataset(spec);
  const auto& s = data.train;
  const std::size_t per_clip = s.features.numel() / s.size();
  const std::size_t per_map = s.heatmaps.numel() / s.size();
  for (std::size_t i = 0; i < s.size(); ++i)
    for (std::size_t j = i + 1; j < s.size(); ++j) {
      if (s.labels[i] != s.labels[j] || s.cameras[i] != s.cameras[j]) continue;
      for (std::size_t k = 0; k < per_clip; ++k)
        ASSERT_EQ(s.features.data()[i * per_clip + k], s.features.data()[j * per_clip + k]);
      for (std::size_t k = 0; k < per_map; ++k)
        ASSERT_EQ(s.heatmaps.data()[i * per_map + k], s.heatmaps.data()[j * per_map + k]);
    }
}

TEST(Synth, CleanIdentitiesSeparateOnPooledFeatures) {
  SynthSpec spec;
  spec.identities = 4;
  spec.test_identities = 1;
  spec.frames = 3;
  spec.channels = 20;
  spec.noise = 0;
  spec.jitter = 0;
  spec.occlusion = 0;
  spec.distortion = 0;
  auto data = generate_dataset(spec);
  const auto& s = data.train;
  const auto C = spec.channels, per_clip = s.features.numel() / s.size();
  std::vector<std::vector<double>> pooled(s.size(), std::vector<double>(C, 0.0));
  for (std::size_t i = 0; i < s.size(); ++i)
    for (std::size_t k = 0; k < per_clip; ++k) pooled[i][k % C] += s.features.data()[i * per_clip + k] / (per_clip / C);
  for (std::size_t i = 0; i < s.size(); ++i) {
    std::size_t best = i;
    double best_d = 1e300;
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (j == i || s.cameras[j] == s.cameras[i]) continue;
      double d = 0;
      for (std::size_t c = 0; c < C; ++c) d += std::pow(pooled[i][c] - pooled[j][c], 2);
      if (d < best_d) best_d = d, best = j;
    }
    EXPECT_EQ(s.labels[best], s.labels[i]) << "clip " << i;
  }
}

TEST(Synth, InvalidSpecRejected) {
  SynthSpec spec;
  spec.cameras = 0;
  EXPECT_THROW(generate_dataset(spec), ConfigError);
}

TEST(Retrieval, TwinNearestIsPerfect) {
  // two queries on camera 0, their twins on camera 1 score highest
  const std::vector<double> scores{0.1, 0.9, 0.2, 0.3, 0.2, 0.1, 0.4, 0.8};
  auto r = evaluate_retrieval(scores, {7, 8}, {0, 0}, {7, 7, 8, 8}, {0, 1, 0, 1});
  EXPECT_EQ(r.rank(1), 1.0);
  EXPECT_EQ(r.map, 1.0);
}

TEST(Retrieval, PositiveAtRankTwo) {
  auto r = evaluate_retrieval({0.9, 0.5, 0.1}, {1}, {0}, {2, 1, 3}, {1, 1, 1});
  EXPECT_DOUBLE_EQ(r.map, 0.5);
  EXPECT_EQ(r.rank(1), 0.0);
  EXPECT_EQ(r.rank(2), 1.0);
  EXPECT_EQ(r.evaluated, 1u);
}

TEST(Retrieval, SameCameraSameIdentityIsIgnored) {
  // the top item is a same-camera copy of the query and is dropped
  auto r = evaluate_retrieval({0.99, 0.5, 0.4}, {1}, {0}, {1, 1, 2}, {0, 1, 1});
  EXPECT_EQ(r.rank(1), 1.0);
  EXPECT_EQ(r.map, 1.0);
}

TEST(Retrieval, TiesKeepGalleryOrder) {
  auto r = evaluate_retrieval({0.5, 0.5}, {1}, {0}, {2, 1}, {1, 1});
  EXPECT_DOUBLE_EQ(r.map, 0.5);
  auto r2 = evaluate_retrieval({0.5, 0.5}, {1}, {0}, {1, 2}, {1, 1});
  EXPECT_DOUBLE_EQ(r2.map, 1.0);
}

TEST(Retrieval, QueriesWithoutPositivesAreSkipped) {
  auto r = evaluate_retrieval({0.3, 0.2, 0.9, 0.1}, {1, 5}, {0, 0}, {1, 2}, {1, 1});
  EXPECT_EQ(r.evaluated, 1u);
  EXPECT_EQ(r.skipped, 1u);
  EXPECT_EQ(r.map, 1.0);
}

TEST(Retrieval, InconsistentSizesThrow) {
  EXPECT_THROW(evaluate_retrieval({0.1, 0.2}, {1}, {0}, {1, 2, 3}, {0, 1, 1}), DimensionError);
}

TEST(RetrievalProperty, MatchesBruteForceOracleSixByTwenty) {
  std::mt19937_64 rng(42);
  for (int trial = 0; trial < 20; ++trial) {
    auto in = oracle::random_instance(rng, 6, 20);
    while (in.ql.size() < 6) in = oracle::random_instance(rng, 6, 20);
    auto got = evaluate_retrieval(in.scores, in.ql, in.qc, in.gl, in.gc, 20);
    auto want = oracle::brute_force_retrieval(in.scores, in.ql, in.qc, in.gl, in.gc, 20);
    EXPECT_EQ(got.cmc, want.cmc);
    EXPECT_EQ(got.map, want.map);
    EXPECT_EQ(got.evaluated, want.evaluated);
    EXPECT_EQ(got.skipped, want.skipped);
  }
}

TEST(RetrievalProperty, MatchesBruteForceOracleUpToFiftyItems) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 300; ++trial) {
    auto in = oracle::random_instance(rng, 8, 50);
    auto got = evaluate_retrieval(in.scores, in.ql, in.qc, in.gl, in.gc, 10);
    auto want = oracle::brute_force_retrieval(in.scores, in.ql, in.qc, in.gl, in.gc, 10);
    ASSERT_EQ(got.cmc, want.cmc) << "trial " << trial;
    ASSERT_EQ(got.map, want.map) << "trial " << trial;
    ASSERT_EQ(got.skipped, want.skipped);
  }
}

TEST(Similarity, CosineAndEuclidean) {
  Embeddings q{{3, 4}}, g{{3, 4}, {-4, 3}, {6, 8}};
  auto cos = similarity_matrix(q, g, Similarity::kCosine);
  expect_all_near(cos, std::vector<double>{1, 0, 1}, 1e-15);
  auto euc = similarity_matrix(q, g, Similarity::kEuclidean);
  expect_all_near(euc, std::vector<double>{0, -std::sqrt(50.0), -5}, 1e-12);
}

TEST(TensorIo, TextAndIntegerRecords) {
  const std::string text = "a = 1\nb = two\n\xc3\xa9";
  EXPECT_EQ(record_text(text_record("t", text)), text);
  for (std::uint64_t v : {0ULL, 1ULL, 0xFFFFFFFFFFFFFFFFULL, 0x0123456789ABCDEFULL})
    EXPECT_EQ(record_u64(u64_record("u", v)), v);
}

TEST(TensorIo, RejectsBadStreams) {
  const Magic magic{'T', 'E', 'S', 'T'};
  std::vector<TensorRecord> recs{{"x", Shape{2, 3}, {1, 2, 3, 4, 5, 6}}, text_record("s", "hi")};
  std::ostringstream out;
  write_tensor_table(out, magic, 1, recs);
  const auto bytes = out.str();
  {
    std::istringstream in(bytes);
    auto back = read_tensor_table(in, magic, 1);
    ASSERT_EQ(back.size(), 2u);
    EXPECT_EQ(back[0].shape, Shape({2, 3}));
    EXPECT_EQ(back[0].data, recs[0].data);
  }
  auto rejects = [&](std::string b, std::uint32_t version = 1) {
    std::istringstream in(b);
    EXPECT_THROW(read_tensor_table(in, magic, version), FormatError);
  };
  rejects(bytes.substr(0, bytes.size() - 3));  // truncated
  rejects(bytes + "x");                        // trailing bytes
  rejects(bytes, 2);                           // version mismatch
  auto bad = bytes;
  bad[0] = 'X';
  rejects(bad);
  EXPECT_THROW(find_record(recs, "missing"), FormatError);
}

TEST(PkSampler, BatchesHoldPIdentitiesTimesKDistinctClips) {
  std::vector<int> labels;
  for (int id = 0; id < 6; ++id)
    for (int k = 0; k < 5; ++k) labels.push_back(id);
  PkSampler sampler(labels, 4, 3, 9);
  for (int step = 0; step < 20; ++step) {
    auto batch = sampler.next();
    ASSERT_EQ(batch.size(), 12u);
    std::set<std::size_t> distinct(batch.begin(), batch.end());
    EXPECT_EQ(distinct.size(), 12u);
    std::map<int, int> per_id;
    for (auto i : batch) ++per_id[labels[i]];
    EXPECT_EQ(per_id.size(), 4u);
    for (const auto& [id, n] : per_id) EXPECT_EQ(n, 3);
  }
  EXPECT_THROW(PkSampler(labels, 7, 3, 1), ConfigError);
  EXPECT_THROW(PkSampler(labels, 4, 6, 1), ConfigError);
}

TEST(Train, ZeroLearningRateLeavesParameters) {
  auto cfg = tiny_config();
  cfg.train.lr = 0;
  const auto data = data_for(cfg);
  TrainState state(resolve_config(cfg, data));
  std::vector<std::vector<float>> before;
  for (const auto& [name, p] : state.model.parameters()) before.emplace_back(p.data().begin(), p.data().end());
  train(state, data.train, 2);
  std::size_t i = 0;
  for (const auto& [name, p] : state.model.parameters()) {
    EXPECT_EQ(std::vector<float>(p.data().begin(), p.data().end()), before[i]) << name;
    ++i;
  }
}

TEST(Train, LossTrajectoryIsDeterministic) {
  auto cfg = tiny_config();
  const auto data = data_for(cfg);
  auto run = [&] {
    TrainState state(resolve_config(cfg, data));
    return train(state, data.train);
  };
  auto a = run(), b = run();
  ASSERT_EQ(a.size(), 3u);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].total, b[i].total);
    EXPECT_EQ(a[i].triplet, b[i].triplet);
    EXPECT_TRUE(std::isfinite(a[i].total));
  }
}

TEST(Train, ResumedRunMatchesUninterruptedRun) {
  auto cfg = tiny_config();
  cfg.train.steps = 4;
  const auto data = data_for(cfg);
  TrainState full(resolve_config(cfg, data));
  auto log_full = train(full, data.train);
  TrainState part(resolve_config(cfg, data));
  train(part, data.train, 2);
  auto ckpt = scratch_dir("resume") / "half.ckpt";
  save_checkpoint(ckpt, part);
  TrainState resumed(checkpoint_config(ckpt));
  load_checkpoint(ckpt, resumed);
  auto log_rest = train(resumed, data.train, 2);
  EXPECT_EQ(log_rest.back().step, 4u);
  EXPECT_EQ(log_rest.back().total, log_full.back().total);
  fs::remove_all(ckpt.parent_path());
}

TEST(Train, DataShapeMismatchIsDimensionError) {
  auto cfg = tiny_config();
  const auto data = data_for(cfg);
  cfg.model.channels = 20;
  EXPECT_THROW(resolve_config(cfg, data), DimensionError);
}

TEST(Checkpoint, SaveLoadSaveIsByteIdentical) {
  auto cfg = tiny_config();
  const auto data = data_for(cfg);
  TrainState state(resolve_config(cfg, data));
  train(state, data.train, 2);
  auto dir = scratch_dir("ckpt");
  save_checkpoint(dir / "a.ckpt", state);
  TrainState loaded(checkpoint_config(dir / "a.ckpt"));
  load_checkpoint(dir / "a.ckpt", loaded);
  save_checkpoint(dir / "b.ckpt", loaded);
  EXPECT_EQ(slurp(dir / "a.ckpt"), slurp(dir / "b.ckpt"));
  fs::remove_all(dir);
}

TEST(Checkpoint, CorruptedMagicIsFormatError) {
  auto cfg = tiny_config();
  const auto data = data_for(cfg);
  TrainState state(resolve_config(cfg, data));
  auto dir = scratch_dir("magic");
  save_checkpoint(dir / "a.ckpt", state);
  auto bytes = slurp(dir / "a.ckpt");
  bytes[1] = 'X';
  std::ofstream(dir / "bad.ckpt", std::ios::binary) << bytes;
  EXPECT_THROW(checkpoint_config(dir / "bad.ckpt"), FormatError);
  EXPECT_THROW(load_checkpoint(dir / "bad.ckpt", state), FormatError);
  std::ofstream(dir / "short.ckpt", std::ios::binary) << bytes.substr(0, bytes.size() / 2);
  EXPECT_THROW(load_checkpoint(dir / "short.ckpt", state), FormatError);
  fs::remove_all(dir);
}

TEST(Checkpoint, WiderModelIsDimensionErrorNamingTheTensor) {
  RunConfig small;
  small.model.num_classes = 8;
  TrainState narrow(small);
  auto dir = scratch_dir("wide");
  save_checkpoint(dir / "c40.ckpt", narrow);
  RunConfig big = small;
  big.model.channels = 80;
  TrainState wide(big);
  try {
    load_checkpoint(dir / "c40.ckpt", wide);
    ADD_FAILURE() << "wider model accepted a C=40 checkpoint";
  } catch (const DimensionError& e) {
    const std::string what = e.what();
    EXPECT_NE(what.find("checkpoint tensor '"), std::string::npos) << what;
    EXPECT_NE(what.find("[40"), std::string::npos) << what;
  }
  fs::remove_all(dir);
}

TEST(Checkpoint, ConfigHashMismatchIsFormatError) {
  RunConfig a;
  a.model.num_classes = 8;
  TrainState sa(a);
  auto dir = scratch_dir("hash");
  save_checkpoint(dir / "a.ckpt", sa);
  RunConfig b = a;
  b.loss.margin = 0.5;  // same shapes, different run
  TrainState sb(b);
  EXPECT_THROW(load_checkpoint(dir / "a.ckpt", sb), FormatError);
  fs::remove_all(dir);
}

TEST(Extraction, DeterministicLengthCAndFiniteOnZeros) {
  auto cfg = tiny_config();
  const auto data = data_for(cfg);
  TrainState state(resolve_config(cfg, data));
  train(state, data.train, 1);
  auto a = extract_representations(state.model, data.test);
  auto b = extract_representations(state.model, data.test, 1);
  ASSERT_EQ(a.size(), data.test.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    ASSERT_EQ(a[i].size(), cfg.model.channels);
    for (std::size_t c = 0; c < a[i].size(); ++c) EXPECT_NEAR(a[i][c], b[i][c], 1e-5);
  }
  EXPECT_EQ(extract_representations(state.model, data.test), a);

  auto zeros = data.test.select({0, 1});
  zeros.features = Tensorf::zeros(zeros.features.shape());
  for (const auto& v : extract_representations(state.model, zeros)) {
    EXPECT_EQ(v.size(), cfg.model.channels);
    for (double x : v) EXPECT_TRUE(std::isfinite(x));
  }
}

TEST(Evaluate, ReportListsMetrics) {
  RetrievalResult r;
  r.cmc.assign(20, 1.0);
  r.map = 0.75;
  r.evaluated = 4;
  const auto text = format_report(r);
  EXPECT_NE(text.find("Rank-1"), std::string::npos);
  EXPECT_NE(text.find("0.7500"), std::string::npos);
}

TEST(Ablation, ArmsCoverEachAxis) {
  RunConfig base;
  EXPECT_EQ(ablation_arms(base, "L").size(), 3u);
  EXPECT_EQ(ablation_arms(base, "tau").size(), 3u);
  EXPECT_EQ(ablation_arms(base, "alpha").size(), 5u);
  auto adj = ablation_arms(base, "adjacency");
  ASSERT_EQ(adj.size(), 3u);
  EXPECT_FALSE(adj[0].config.model.use_mask);
  EXPECT_FALSE(adj[0].config.model.use_context);
  EXPECT_TRUE(adj[2].config.model.use_context);
  EXPECT_EQ(ablation_arms(base, "cs-scales").size(), 5u);
  EXPECT_THROW(ablation_arms(base, "depth"), ConfigError);
  EXPECT_DOUBLE_EQ(median({3, 1, 2}), 2.0);
  EXPECT_DOUBLE_EQ(median({4, 1, 2, 3}), 2.5);
}

TEST(Gradcheck, TinyModelPassesWithSampledElements) {
  GradcheckOptions o;
  o.step = 3e-6;
  o.samples_per_tensor = 5;
  auto r = model_gradcheck(load_run_config(fs::path(CTL_SOURCE_DIR) / "configs" / "tiny_gradcheck.cfg"), o);
  EXPECT_TRUE(r.passed) << r.message;
}
