#include <algorithm>
#include <numeric>
#include <queue>

#include "ctl/topology.hpp"
#include "test_util.hpp"

using namespace ctl;
using namespace ctl::testing;

namespace {

bool connected(const Tensord& a) {
  const auto n = a.dim(0);
  std::vector<bool> seen(n, false);
  std::queue<std::size_t> q;
  q.push(0);
  seen[0] = true;
  while (!q.empty()) {
    auto i = q.front();
    q.pop();
    for (std::size_t j = 0; j < n; ++j)
      if (a.at({i, j}) != 0.0 && !seen[j]) {
        seen[j] = true;
        q.push(j);
      }
  }
  return std::all_of(seen.begin(), seen.end(), [](bool b) { return b; });
}

void zero_linear(Linear<double>& l) {
  for (auto& v : l.weight.mutable_data()) v = 0;
  if (l.bias)
    for (auto& v : l.bias->mutable_data()) v = 0;
}

void expect_unit_or_zero_rows(const Tensord& a) {
  const auto n = a.dim(-1);
  const auto rows = a.numel() / n;
  for (std::size_t r = 0; r < rows; ++r) {
    double s = 0;
    for (std::size_t j = 0; j < n; ++j) s += a.data()[r * n + j] * a.data()[r * n + j];
    if (s > 0) EXPECT_NEAR(std::sqrt(s), 1.0, 1e-6) << "row " << r;
  }
}

}  // namespace

TEST(PhysicalAdjacency, TorsoRowHasFourNeighbours) {
  auto a = build_physical_adjacency<double>(2, ScaleGrouping::canonical(), coco_skeleton());
  ASSERT_EQ(a.shape(), Shape({5, 5}));
  double row = 0;
  for (std::size_t j = 0; j < 5; ++j) row += a.at({1, j});
  EXPECT_EQ(row, 4.0);
  // head-arm and arm-leg are not adjacent
  EXPECT_EQ(a.at({0, 2}), 0.0);
  EXPECT_EQ(a.at({2, 4}), 0.0);
}

TEST(PhysicalAdjacency, KeypointScaleHasNineteenEdges) {
  auto a = build_physical_adjacency<double>(0, ScaleGrouping::canonical(), coco_skeleton());
  double total = 0;
  for (double v : a.data()) total += v;
  EXPECT_EQ(total, 38.0);
}

TEST(PhysicalAdjacencyProperty, SymmetricBinaryZeroDiagonalConnected) {
  const auto g = ScaleGrouping::canonical();
  for (std::size_t s = 0; s < 3; ++s) {
    auto a = build_physical_adjacency<double>(s, g, coco_skeleton());
    const auto n = a.dim(0);
    EXPECT_EQ(n, g.nodes(s));
    for (std::size_t i = 0; i < n; ++i) {
      EXPECT_EQ(a.at({i, i}), 0.0);
      for (std::size_t j = 0; j < n; ++j) {
        EXPECT_EQ(a.at({i, j}), a.at({j, i}));
        EXPECT_TRUE(a.at({i, j}) == 0.0 || a.at({i, j}) == 1.0);
      }
    }
    EXPECT_TRUE(connected(a)) << "scale " << s;
  }
}

TEST(PhysicalAdjacencyProperty, LiftPreservesConnectivityForRandomGroupings) {
  std::mt19937_64 rng(1);
  ASSERT_TRUE(connected(build_physical_adjacency<double>(0, ScaleGrouping::canonical(), coco_skeleton())));
  for (int trial = 0; trial < 30; ++trial) {
    // random partition of the 17 key-points into 1..8 groups
    std::uniform_int_distribution<std::size_t> count(1, 8);
    const auto groups = count(rng);
    std::vector<std::size_t> order(17);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    NodeGroups ng(groups);
    for (std::size_t i = 0; i < 17; ++i) ng[i < groups ? i : std::uniform_int_distribution<std::size_t>(0, groups - 1)(rng)].push_back(order[i]);
    ScaleGrouping g = ScaleGrouping::canonical();
    g.s3 = ng;
    ASSERT_NO_THROW(g.validate());
    auto a = build_physical_adjacency<double>(2, g, coco_skeleton());
    EXPECT_TRUE(connected(a)) << "groups " << groups;
  }
}

TEST(PhysicalAdjacency, BadEdgeIsConfigError) {
  EXPECT_THROW(build_physical_adjacency<double>(0, ScaleGrouping::canonical(), EdgeList{{0, 17}}), ConfigError);
}

TEST(ContextAdjacency, ZeroWeightsGiveZeroMatrix) {
  std::mt19937_64 rng(2);
  auto block = make_context_block<double>(4, 3, 5, false, rng);
  zero_linear(block.squeeze_feature);
  zero_linear(block.squeeze_time);
  zero_linear(block.expand);
  auto a = context_adjacency(randn(Shape{3, 5, 4}, rng), block);
  EXPECT_EQ(a.shape(), Shape({5, 5}));
  for (double v : a.data()) EXPECT_EQ(v, 0.0);
}

TEST(ContextAdjacency, RowsHaveUnitNorm) {
  std::mt19937_64 rng(3);
  auto block = make_context_block<double>(6, 4, 10, false, rng);
  auto a = context_adjacency(randn(Shape{2, 4, 10, 6}, rng), block);
  EXPECT_EQ(a.shape(), Shape({2, 10, 10}));
  expect_unit_or_zero_rows(a);
}

TEST(ContextAdjacency, TwoNodeHandExample) {
  // constant input 1, T = 2, C = 3: feature squeeze gives 3, time squeeze 6
  ContextBlock<double> block;
  block.squeeze_feature = {Tensord::full({3, 1}, 1.0), Tensord::zeros({1})};
  block.squeeze_time = {Tensord::full({2, 1}, 1.0), Tensord::zeros({1})};
  block.expand = {md({2, 4}, {1, 2, 0, -1, 0, 1, 3, 0}), Tensord::zeros({4})};
  auto a = context_adjacency(Tensord::full({2, 2, 3}, 1.0), block);
  // expand([6, 6]) = [6, 18, 18, -6]
  const double r = std::sqrt(10.0);
  expect_all_near(a.data(), std::vector<double>{1 / r, 3 / r, 3 / r, -1 / r}, 1e-12);
}

TEST(ContextAdjacency, ShapeMismatchThrows) {
  std::mt19937_64 rng(4);
  auto block = make_context_block<double>(4, 3, 5, false, rng);
  EXPECT_THROW(context_adjacency(Tensord::zeros({2, 5, 4}), block), DimensionError);
  EXPECT_THROW(context_adjacency(Tensord::zeros({3, 4, 4}), block), DimensionError);
}

TEST(WindowContext, ZeroWeightsAndUnitRows) {
  std::mt19937_64 rng(5);
  auto block = make_window_context_block<double>(4, 15, false, rng);
  auto x = randn(Shape{2, 6, 15, 4}, rng);
  auto a = window_context_adjacency(x, block);
  EXPECT_EQ(a.shape(), Shape({2, 6, 15, 15}));
  expect_unit_or_zero_rows(a);
  zero_linear(block.squeeze_feature);
  zero_linear(block.expand);
  const auto zeroed = window_context_adjacency(x, block);
  for (double v : zeroed.data()) EXPECT_EQ(v, 0.0);
}

TEST(WindowContext, TauOneMatchesSingleFrameContextBlock) {
  std::mt19937_64 rng(6);
  auto w = make_window_context_block<double>(4, 5, false, rng);
  ContextBlock<double> c;
  c.squeeze_feature = w.squeeze_feature;
  c.squeeze_time = {Tensord::full({1, 1}, 1.0), Tensord::zeros({1})};
  c.expand = w.expand;
  auto x = randn(Shape{5, 4}, rng);
  auto via_window = window_context_adjacency(x, w);
  auto via_clip = context_adjacency(reshape(x, Shape{1, 5, 4}), c);
  expect_tensor_near(via_window, via_clip, 1e-12);
}

TEST(WindowContext, ReluToggleChangesOutput) {
  std::mt19937_64 rng(7);
  auto w = make_window_context_block<double>(4, 5, false, rng);
  auto x = randn(Shape{5, 4}, rng, false, 3.0);
  auto plain = window_context_adjacency(x, w);
  w.relu_after_squeeze = true;
  auto gated = window_context_adjacency(x, w);
  EXPECT_GT(max_abs_diff(plain.data(), gated.data()), 1e-6);
}

TEST(Compose, ZeroedContextAndMaskGivesPhysical) {
  std::mt19937_64 rng(8);
  TopologyOptions o;
  o.clip_context = true;
  auto b = make_topology<double>(1, ScaleGrouping::canonical(), coco_skeleton(), 4, 3, o, rng);
  zero_linear(b.context->squeeze_feature);
  zero_linear(b.context->squeeze_time);
  zero_linear(b.context->expand);
  for (double v : b.mask->data()) EXPECT_EQ(v, 0.0);
  auto ac = context_adjacency(randn(Shape{3, 10, 4}, rng), *b.context);
  expect_tensor_near(compose_adjacency<double>(b, ac), b.physical, 0.0);
}

TEST(ComposeProperty, ExactlyAdditiveAndAblationsSubtract) {
  std::mt19937_64 rng(9);
  TopologyOptions o;
  o.clip_context = true;
  auto b = make_topology<double>(2, ScaleGrouping::canonical(), coco_skeleton(), 4, 3, o, rng);
  for (auto& v : b.mask->mutable_data()) v = std::normal_distribution<double>(0, 1)(rng);
  auto ac = context_adjacency(randn(Shape{3, 5, 4}, rng), *b.context);
  auto full = compose_adjacency<double>(b, ac);
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t j = 0; j < 5; ++j)
      EXPECT_EQ(full.at({i, j}), b.physical.at({i, j}) + b.mask->at({i, j}) + ac.at({i, j}));

  auto no_ctx = b;
  no_ctx.use_context = false;
  auto without = compose_adjacency<double>(no_ctx, ac);
  for (std::size_t i = 0; i < 25; ++i) EXPECT_NEAR(without.data()[i], full.data()[i] - ac.data()[i], 1e-15);

  auto no_phys = b;
  no_phys.use_physical = false;
  auto without_p = compose_adjacency<double>(no_phys, ac);
  for (std::size_t i = 0; i < 25; ++i) EXPECT_NEAR(without_p.data()[i], full.data()[i] - b.physical.data()[i], 1e-15);

  auto no_mask = b;
  no_mask.mask.reset();
  auto without_m = compose_adjacency<double>(no_mask, ac);
  for (std::size_t i = 0; i < 25; ++i) EXPECT_NEAR(without_m.data()[i], full.data()[i] - b.mask->data()[i], 1e-15);
}

TEST(TopologyProperty, GradientReachesMaskAndContextNotPhysical) {
  std::mt19937_64 rng(10);
  TopologyOptions o;
  o.clip_context = true;
  auto b = make_topology<double>(0, ScaleGrouping::canonical(), coco_skeleton(), 4, 3, o, rng);
  auto x = randn(Shape{3, 17, 4}, rng);
  NamedTensors<double> params;
  b.collect("topo", params);
  ASSERT_EQ(params.size(), 7u);  // mask + three linear layers with bias
  GradTape<double> tape;
  {
    TapeScope<double> scope(tape);
    auto a = compose_adjacency<double>(b, context_adjacency(x, *b.context));
    tape.backward(probe(matmul(a, x)));
  }
  for (const auto& [name, p] : params) {
    ASSERT_TRUE(p.has_grad()) << name;
    double mag = 0;
    for (double g : p.grad()) mag += std::abs(g);
    EXPECT_GT(mag, 0.0) << name;
  }
  EXPECT_FALSE(b.physical.requires_grad());
  EXPECT_FALSE(b.physical.has_grad());
}

TEST(ContextAdjacency, Gradcheck) {
  std::mt19937_64 rng(11);
  auto block = make_context_block<double>(3, 2, 4, true, rng);
  auto x = randn(Shape{2, 4, 3}, rng, true);
  NamedTensors<double> params{{"x", x}};
  block.collect("ctx", params);
  auto r = check_grad([&] { return probe(context_adjacency(x, block)); }, params, 1e-5);
  EXPECT_TRUE(r.passed) << r.message;
}
