#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <functional>

#include "n3net/gradcheck.hpp"
#include "n3net/n3_block.hpp"
#include "n3net/nn_select.hpp"
#include "n3net/ops.hpp"

namespace n3net {
namespace {

using ad::Shape;
using ad::Tape;
using ad::Tensor;

Tensor random_input(Shape shape, Rng& rng, double scale = 1.0) {
  Tensor t(std::move(shape));
  for (double& v : t.data()) v = scale * (uniform01(rng) - 0.5);
  return t;
}

N3BlockConfig small_block(std::size_t k) {
  N3BlockConfig cfg;
  cfg.k = k;
  cfg.patch = 4;
  cfg.stride = 2;
  cfg.region = 12;
  cfg.embed_layers = {8, 4};
  cfg.temp_layers = {8, 1};
  return cfg;
}

void zero_stack(ConvStack& stack) {
  for (auto& layer : stack.layers) {
    std::fill(layer.kernels.data().begin(), layer.kernels.data().end(), 0.0);
    std::fill(layer.bias.data().begin(), layer.bias.data().end(), 0.0);
  }
}

// Neighbour volume j computed directly from patch weights: every query's
// weighted candidate patch is folded back with per-pixel averaging.
std::vector<double> fold_volume(const Tensor& input, const PatchGrid& grid,
                                const WindowSpec& window,
                                const std::function<std::vector<double>(std::size_t)>& weights) {
  const std::size_t c = grid.channels, h = grid.image_h, w = grid.image_w, p = grid.patch;
  std::vector<double> acc(c * h * w, 0.0), cover(h * w, 0.0);
  for (std::size_t q = 0; q < grid.count(); ++q) {
    const auto cand = candidate_window(q, grid, window);
    const auto wq = weights(q);
    for (std::size_t ch = 0; ch < c; ++ch) {
      for (std::size_t dy = 0; dy < p; ++dy) {
        for (std::size_t dx = 0; dx < p; ++dx) {
          double v = 0.0;
          for (std::size_t m = 0; m < cand.size(); ++m) {
            const std::size_t y = grid.top(cand[m]) + dy, x = grid.left(cand[m]) + dx;
            v += wq[m] * input.data()[(ch * h + y) * w + x];
          }
          acc[(ch * h + grid.top(q) + dy) * w + grid.left(q) + dx] += v;
        }
      }
    }
    for (std::size_t dy = 0; dy < p; ++dy) {
      for (std::size_t dx = 0; dx < p; ++dx) cover[(grid.top(q) + dy) * w + grid.left(q) + dx] += 1;
    }
  }
  for (std::size_t i = 0; i < acc.size(); ++i) acc[i] /= cover[i % (h * w)];
  return acc;
}

std::vector<double> channel_slice(const Tensor& t, std::size_t first, std::size_t count) {
  const std::size_t plane = t.dim(1) * t.dim(2);
  return {t.data().begin() + first * plane, t.data().begin() + (first + count) * plane};
}

TEST(TemperatureMap, ZeroNetworkGivesFloorPlusLogTwo) {
  Rng rng(1);
  const N3BlockConfig cfg = small_block(2);
  N3BlockParams params = init_block_params(cfg, 3, rng);
  zero_stack(params.temperature);
  Tape tape;
  const Tensor t = temperature_map(tape, random_input({3, 6, 6}, rng), params, cfg);
  EXPECT_EQ(t.shape(), (Shape{1, 6, 6}));
  for (double v : t.data()) EXPECT_NEAR(v, kMinTemperature + std::log(2.0), 1e-15);
}

TEST(TemperatureMap, NeverBelowFloor) {
  Rng rng(2);
  const N3BlockConfig cfg = small_block(2);
  std::size_t seen = 0;
  while (seen < 10000) {
    N3BlockParams params = init_block_params(cfg, 1, rng);
    auto& last = params.temperature.layers.back();
    last.bias.data()[0] = -50.0 * uniform01(rng);
    for (double& v : last.kernels.data()) v *= 20.0;
    Tape tape(Tape::Mode::kInference);
    const Tensor t = temperature_map(tape, random_input({1, 8, 8}, rng, 10.0), params, cfg);
    for (double v : t.data()) ASSERT_GE(v, kMinTemperature);
    seen += t.size();
  }
}

TEST(Embedding, ZeroNetworkGivesZero) {
  Rng rng(3);
  const N3BlockConfig cfg = small_block(2);
  N3BlockParams params = init_block_params(cfg, 2, rng);
  zero_stack(params.embed);
  Tape tape;
  const Tensor e = embed(tape, random_input({2, 6, 6}, rng), params, cfg);
  EXPECT_EQ(e.shape(), (Shape{4, 6, 6}));
  for (double v : e.data()) EXPECT_EQ(v, 0.0);
}

TEST(N3Forward, OutputChannelsAreInputTimesKPlusOne) {
  Rng rng(4);
  const N3BlockConfig cfg = small_block(7);
  const N3BlockParams params = init_block_params(cfg, 8, rng);
  Tape tape(Tape::Mode::kInference);
  const Tensor y = n3_forward(tape, random_input({8, 16, 16}, rng), params, cfg);
  EXPECT_EQ(y.shape(), (Shape{64, 16, 16}));
}

TEST(N3Forward, FirstChannelsCopyTheInput) {
  Rng rng(5);
  const N3BlockConfig cfg = small_block(2);
  const N3BlockParams params = init_block_params(cfg, 2, rng);
  const Tensor x = random_input({2, 12, 12}, rng);
  Tape tape(Tape::Mode::kInference);
  const Tensor y = n3_forward(tape, x, params, cfg);
  EXPECT_EQ(channel_slice(y, 0, 2), std::vector<double>(x.data().begin(), x.data().end()));
}

TEST(N3Forward, EqualDistancesAverageAllCandidates) {
  Rng rng(6);
  const N3BlockConfig cfg = small_block(3);
  N3BlockParams params = init_block_params(cfg, 2, rng);
  zero_stack(params.embed);
  const Tensor x = random_input({2, 12, 12}, rng);
  Tape tape(Tape::Mode::kInference);
  const Tensor y = n3_forward(tape, x, params, cfg);
  const PatchGrid grid{12, 12, cfg.patch, cfg.stride, 2};
  const auto expected = fold_volume(x, grid, WindowSpec{cfg.region}, [&](std::size_t q) {
    const std::size_t n = candidate_window(q, grid, WindowSpec{cfg.region}).size();
    return std::vector<double>(n, 1.0 / static_cast<double>(n));
  });
  for (std::size_t j = 0; j < cfg.k; ++j) {
    const auto got = channel_slice(y, 2 * (j + 1), 2);
    for (std::size_t i = 0; i < got.size(); ++i) ASSERT_NEAR(got[i], expected[i], 1e-12);
  }
}

TEST(N3Forward, SingleNeighborIsSoftmaxAttention) {
  Rng rng(7);
  N3BlockConfig cfg = small_block(1);
  cfg.fixed_temperature = 0.8;
  const N3BlockParams params = init_block_params(cfg, 1, rng);
  const Tensor x = random_input({1, 12, 12}, rng);
  const PatchGrid grid{12, 12, cfg.patch, cfg.stride, 1};
  Tape tape(Tape::Mode::kInference);
  const Tensor y = n3_forward(tape, x, params, cfg);
  const Tensor e = embed(tape, x, params, cfg);
  const std::size_t ec = e.dim(0), p = cfg.patch;
  auto patch_distance = [&](std::size_t a, std::size_t b) {
    double s = 0.0;
    for (std::size_t ch = 0; ch < ec; ++ch) {
      for (std::size_t dy = 0; dy < p; ++dy) {
        for (std::size_t dx = 0; dx < p; ++dx) {
          const double u = e.data()[(ch * 12 + grid.top(a) + dy) * 12 + grid.left(a) + dx];
          const double v = e.data()[(ch * 12 + grid.top(b) + dy) * 12 + grid.left(b) + dx];
          s += (u - v) * (u - v);
        }
      }
    }
    return s;
  };
  const auto expected = fold_volume(x, grid, WindowSpec{cfg.region}, [&](std::size_t q) {
    const auto cand = candidate_window(q, grid, WindowSpec{cfg.region});
    std::vector<double> w(cand.size());
    double z = 0.0;
    for (std::size_t m = 0; m < cand.size(); ++m) {
      w[m] = std::exp(-patch_distance(q, cand[m]) / 0.8);
      z += w[m];
    }
    for (double& v : w) v /= z;
    return w;
  });
  const auto got = channel_slice(y, 1, 1);
  for (std::size_t i = 0; i < got.size(); ++i) ASSERT_NEAR(got[i], expected[i], 1e-12);
}

TEST(N3Forward, SmallTemperatureApproachesHardSelection) {
  Rng rng(8);
  N3BlockConfig relaxed = small_block(3);
  relaxed.fixed_temperature = 1e-6;
  N3BlockConfig hard = relaxed;
  hard.selection = Selection::kHard;
  hard.fixed_temperature.reset();
  const N3BlockParams params = init_block_params(relaxed, 2, rng);
  const Tensor x = random_input({2, 12, 12}, rng);
  Tape tape(Tape::Mode::kInference);
  const Tensor a = n3_forward(tape, x, params, relaxed);
  const Tensor b = n3_forward(tape, x, params, hard);
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a.data()[i] - b.data()[i]));
  EXPECT_LT(worst, 1e-4);
}

TEST(N3Forward, InputImageMatchingNeedsAnImage) {
  Rng rng(9);
  N3BlockConfig cfg = small_block(1);
  cfg.selection = Selection::kHard;
  cfg.match = MatchSource::kInputImage;
  const N3BlockParams params = init_block_params(cfg, 1, rng);
  Tape tape;
  const Tensor x = random_input({1, 12, 12}, rng);
  EXPECT_THROW(n3_forward(tape, x, params, cfg), std::invalid_argument);
  const Tensor wrong = random_input({1, 10, 10}, rng);
  EXPECT_THROW(n3_forward(tape, x, params, cfg, &wrong), std::invalid_argument);
  EXPECT_EQ(n3_forward(tape, x, params, cfg, &x).shape(), (Shape{2, 12, 12}));
}

TEST(N3Forward, ReportsMaxWeightPerNeighbor) {
  Rng rng(10);
  const N3BlockConfig cfg = small_block(3);
  N3BlockParams params = init_block_params(cfg, 1, rng);
  zero_stack(params.embed);
  BlockDiagnostics diag;
  Tape tape(Tape::Mode::kInference);
  n3_forward(tape, random_input({1, 12, 12}, rng), params, cfg, nullptr, &diag);
  ASSERT_EQ(diag.max_weight.size(), 3u);
  for (double v : diag.max_weight) {
    EXPECT_GT(v, 0.0);
    EXPECT_LE(v, 1.0);
  }
}

TEST(N3NetTest, FreshNetworkIsTheIdentity) {
  Rng rng(11);
  const N3Net net(N3NetConfig::desk_default(2), 5);
  const Tensor x = random_input({1, 32, 32}, rng);
  Tape tape(Tape::Mode::kInference);
  const Tensor y = net.forward(tape, x);
  ASSERT_EQ(y.shape(), x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_EQ(y.data()[i], x.data()[i]);
}

TEST(N3NetTest, OutputShapeMatchesInputForAnySize) {
  Rng rng(12);
  const N3Net net(N3NetConfig::desk_default(2), 6);
  for (std::size_t size : {24u, 30u, 33u}) {
    Tape tape(Tape::Mode::kInference);
    const Tensor y = net.forward(tape, random_input({1, size, size}, rng));
    EXPECT_EQ(y.shape(), (Shape{1, size, size}));
  }
  Tape tape;
  EXPECT_THROW(net.forward(tape, Tensor({2, 32, 32})), std::invalid_argument);
}

TEST(N3NetTest, ParameterNamesAreUnique) {
  const N3Net net(N3NetConfig::desk_default(2), 0);
  std::vector<std::string> names;
  std::size_t total = 0;
  for (const auto& p : net.parameters()) {
    names.push_back(p.name);
    total += p.tensor.size();
  }
  std::sort(names.begin(), names.end());
  EXPECT_EQ(std::adjacent_find(names.begin(), names.end()), names.end());
  EXPECT_EQ(total, net.parameter_count());
}

TEST(N3NetTest, SameSeedSameParameters) {
  const N3Net a(N3NetConfig::desk_default(2), 3), b(N3NetConfig::desk_default(2), 3);
  const auto pa = a.parameters(), pb = b.parameters();
  for (std::size_t i = 0; i < pa.size(); ++i) {
    EXPECT_TRUE(std::equal(pa[i].tensor.data().begin(), pa[i].tensor.data().end(),
                           pb[i].tensor.data().begin()));
  }
}

TEST(ConfigTextForm, RoundTrips) {
  for (N3NetConfig cfg : {N3NetConfig::desk_default(3), N3NetConfig::full_scale()}) {
    cfg.blocks[0].fixed_temperature = 0.25;
    cfg.blocks[1] = cfg.blocks[0];
    ConfigText text;
    cfg.write(text);
    EXPECT_EQ(N3NetConfig::read(ConfigText::parse(text.str())), cfg);
  }
}

TEST(ConfigTextForm, RejectsInvalidConfigs) {
  N3NetConfig cfg = N3NetConfig::desk_default(2);
  cfg.local_depths = {3, 3};
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  N3BlockConfig b;
  b.stride = b.patch + 1;
  EXPECT_THROW(b.validate(), std::invalid_argument);
  b = N3BlockConfig{};
  b.temp_layers = {4, 2};
  EXPECT_THROW(b.validate(), std::invalid_argument);
}

TEST(Gradients, BlockMatchesFiniteDifferences) {
  for (std::uint64_t seed : {0u, 1u}) {
    const GradCheckResult r = check_block_gradient(16, seed);
    EXPECT_LT(r.max_rel_error, 1e-4) << r.worst;
    EXPECT_GT(r.checked, 50u);
  }
}

TEST(Gradients, NetworkMatchesFiniteDifferences) {
  const GradCheckResult r = check_network_gradient(18, 0);
  EXPECT_LT(r.max_rel_error, 1e-3) << r.worst;
  EXPECT_GT(r.checked, 50u);
}

}  // namespace
}  // namespace n3net
