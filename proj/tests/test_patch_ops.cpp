#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "n3net/n3_block.hpp"
#include "n3net/ops.hpp"
#include "n3net/patch_ops.hpp"

namespace n3net {
namespace {

using ad::Shape;
using ad::Tape;
using ad::Tensor;

Tensor random_image(Shape shape, Rng& rng) {
  Tensor t(std::move(shape));
  for (double& v : t.data()) v = uniform01(rng) - 0.5;
  return t;
}

double dot(const Tensor& a, const Tensor& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a.data()[i] * b.data()[i];
  return s;
}

TEST(PatchGridTest, CountsPatches) {
  PatchGrid g{4, 4, 2, 2, 1};
  g.validate();
  EXPECT_EQ(g.count(), 4u);
  EXPECT_EQ((PatchGrid{80, 80, 10, 5, 1}).count(), 225u);
}

TEST(PatchGridTest, RejectsBadGeometry) {
  EXPECT_THROW((PatchGrid{4, 4, 2, 3, 1}).validate(), std::invalid_argument);
  EXPECT_THROW((PatchGrid{4, 4, 5, 1, 1}).validate(), std::invalid_argument);
  EXPECT_THROW((PatchGrid{5, 5, 2, 2, 1}).validate(), std::invalid_argument);
  EXPECT_THROW((PatchGrid{4, 4, 2, 0, 1}).validate(), std::invalid_argument);
}

TEST(NextValidSize, RoundsUpToTheGrid) {
  EXPECT_EQ(next_valid_size(32, 8, 4), 32u);
  EXPECT_EQ(next_valid_size(33, 8, 4), 36u);
  EXPECT_EQ(next_valid_size(32, 6, 3), 33u);
  EXPECT_EQ(next_valid_size(5, 10, 5), 10u);
}

TEST(Im2Col, FourByFourIntoTwoByTwoPatches) {
  Tape tape;
  std::vector<double> v(16);
  for (std::size_t i = 0; i < 16; ++i) v[i] = static_cast<double>(i);
  const Tensor cols = im2col(tape, Tensor({1, 4, 4}, v), PatchGrid{4, 4, 2, 2, 1});
  ASSERT_EQ(cols.shape(), (Shape{4, 4}));
  const std::vector<double> expected{0, 1, 4, 5, 2, 3, 6, 7, 8, 9, 12, 13, 10, 11, 14, 15};
  EXPECT_EQ(std::vector<double>(cols.data().begin(), cols.data().end()), expected);
}

TEST(Im2Col, WholeImagePatchIsTheImage) {
  Tape tape;
  Rng rng(1);
  const Tensor x = random_image({2, 5, 5}, rng);
  const Tensor cols = im2col(tape, x, PatchGrid{5, 5, 5, 1, 2});
  ASSERT_EQ(cols.shape(), (Shape{1, 50}));
  for (std::size_t i = 0; i < 50; ++i) EXPECT_EQ(cols.data()[i], x.data()[i]);
}

TEST(Col2Im, AveragesOverlaps) {
  Tape tape;
  // The middle column is covered by both patches.
  const Tensor cols({2, 4}, {1, 1, 1, 1, 3, 3, 3, 3});
  const Tensor img = col2im_avg(tape, cols, PatchGrid{2, 3, 2, 1, 1});
  EXPECT_EQ(std::vector<double>(img.data().begin(), img.data().end()),
            (std::vector<double>{1, 2, 3, 1, 2, 3}));
}

class RandomGeometries : public ::testing::Test {
 protected:
  Rng rng{2024};
  PatchGrid random_grid() {
    PatchGrid g;
    g.patch = 1 + rng() % 6;
    g.stride = 1 + rng() % g.patch;
    g.image_h = g.patch + g.stride * (rng() % 5);
    g.image_w = g.patch + g.stride * (rng() % 5);
    g.channels = 1 + rng() % 3;
    return g;
  }
};

TEST_F(RandomGeometries, Col2ImInvertsIm2Col) {
  for (int n = 0; n < 100; ++n) {
    const PatchGrid g = random_grid();
    const Tensor x = random_image({g.channels, g.image_h, g.image_w}, rng);
    Tape tape;
    const Tensor back = col2im_avg(tape, im2col(tape, x, g), g);
    for (std::size_t i = 0; i < x.size(); ++i) {
      ASSERT_NEAR(back.data()[i], x.data()[i], 1e-6)
          << "patch " << g.patch << " stride " << g.stride;
    }
  }
}

TEST_F(RandomGeometries, Im2ColBackwardIsItsAdjoint) {
  for (int n = 0; n < 100; ++n) {
    const PatchGrid g = random_grid();
    Tensor x = random_image({g.channels, g.image_h, g.image_w}, rng);
    x.set_requires_grad(true);
    const Tensor y = random_image({g.count(), g.patch_size()}, rng);
    Tape tape;
    const Tensor cols = im2col(tape, x, g);
    tape.backward(ad::sum(tape, ad::mul(tape, cols, y)));
    double adjoint = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) adjoint += x.data()[i] * x.grad()[i];
    EXPECT_NEAR(dot(cols, y), adjoint, 1e-10);
  }
}

TEST_F(RandomGeometries, Col2ImBackwardIsItsAdjoint) {
  for (int n = 0; n < 100; ++n) {
    const PatchGrid g = random_grid();
    Tensor cols = random_image({g.count(), g.patch_size()}, rng);
    cols.set_requires_grad(true);
    const Tensor y = random_image({g.channels, g.image_h, g.image_w}, rng);
    Tape tape;
    const Tensor img = col2im_avg(tape, cols, g);
    tape.backward(ad::sum(tape, ad::mul(tape, img, y)));
    double adjoint = 0.0;
    for (std::size_t i = 0; i < cols.size(); ++i) adjoint += cols.data()[i] * cols.grad()[i];
    EXPECT_NEAR(dot(img, y), adjoint, 1e-10);
  }
}

TEST(CandidateWindowTest, InteriorQueryHas224Candidates) {
  const PatchGrid g{200, 200, 10, 5, 1};
  const std::size_t query = 19 * g.cols() + 19;
  const auto c = candidate_window(query, g, WindowSpec{80});
  EXPECT_EQ(c.size(), 224u);
  EXPECT_EQ(std::count(c.begin(), c.end(), query), 0);
}

TEST(CandidateWindowTest, CornerQueryHas224Candidates) {
  const PatchGrid g{80, 80, 10, 5, 1};
  EXPECT_EQ(candidate_window(0, g, WindowSpec{80}).size(), 224u);
  EXPECT_EQ(candidate_window(g.count() - 1, g, WindowSpec{80}).size(), 224u);
}

TEST(CandidateWindowTest, RegionEqualToPatchIsEmpty) {
  const PatchGrid g{20, 20, 5, 5, 1};
  for (std::size_t q = 0; q < g.count(); ++q) {
    EXPECT_TRUE(candidate_window(q, g, WindowSpec{5}).empty());
  }
}

TEST(CandidateWindowTest, InteriorWindowsAreSymmetric) {
  const PatchGrid g{64, 64, 8, 4, 1};
  const WindowSpec w{24};
  const std::size_t a = 7 * g.cols() + 7;
  for (std::size_t b : candidate_window(a, g, w)) {
    const std::size_t rb = b / g.cols(), cb = b % g.cols();
    if (rb < 2 || cb < 2 || rb + 2 >= g.rows() || cb + 2 >= g.cols()) continue;
    const auto back = candidate_window(b, g, w);
    EXPECT_NE(std::find(back.begin(), back.end(), a), back.end());
  }
}

TEST(CandidateWindowTest, DeskGeometryHas24) {
  const PatchGrid g{32, 32, 8, 4, 1};
  const CandidateTable t = build_candidate_table(g, WindowSpec{24});
  EXPECT_EQ(t.queries, 49u);
  EXPECT_EQ(t.width, 24u);
  for (std::size_t n : t.count) EXPECT_EQ(n, 24u);
}

TEST(CandidateTableTest, MatchesPerQueryWindows) {
  const PatchGrid g{30, 40, 10, 5, 1};
  const CandidateTable t = build_candidate_table(g, WindowSpec{20});
  for (std::size_t q = 0; q < g.count(); ++q) {
    const auto c = candidate_window(q, g, WindowSpec{20});
    ASSERT_EQ(t.count[q], c.size());
    for (std::size_t m = 0; m < c.size(); ++m) EXPECT_EQ(t.index[q * t.width + m], c[m]);
  }
}

TEST(CenterTemperatureTest, ReadsPatchCenters) {
  Tape tape;
  std::vector<double> v(16);
  for (std::size_t i = 0; i < 16; ++i) v[i] = static_cast<double>(i);
  const Tensor t = center_temperature(tape, Tensor({1, 4, 4}, v), PatchGrid{4, 4, 2, 2, 1});
  EXPECT_EQ(std::vector<double>(t.data().begin(), t.data().end()),
            (std::vector<double>{5, 7, 13, 15}));
}

TEST(CenterTemperatureTest, ConstantMapGivesConstant) {
  Tape tape;
  const Tensor map({1, 32, 32}, std::vector<double>(1024, 0.7));
  const Tensor t = center_temperature(tape, map, PatchGrid{32, 32, 8, 4, 1});
  ASSERT_EQ(t.size(), 49u);
  for (double x : t.data()) EXPECT_EQ(x, 0.7);
}

}  // namespace
}  // namespace n3net
