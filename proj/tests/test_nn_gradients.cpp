// Copyright 2026 The toporank Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <cmath>

#include "test_util.hpp"

namespace toporank {
namespace {

using nn::LayerSpec;
using M = nn::Matrix<double>;
namespace gc = testing::gradcheck;

TEST(Gradients, EveryArchitectureMatchesFiniteDifferences) {
  for (const auto& [name, specs] : gc::architectures()) {
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
      EXPECT_LE(gc::network_error(specs, 3, seed), gc::kTolerance) << name << " seed " << seed;
    }
  }
}

TEST(Gradients, GeneratorThroughClippedComposition) {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    EXPECT_LE(gc::generator_error(seed), gc::kTolerance) << "seed " << seed;
  }
}

TEST(Gradients, AuxiliaryLossesMatchFiniteDifferences) {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    EXPECT_LE(gc::margin_error(seed), gc::kTolerance) << "L1 seed " << seed;
    EXPECT_LE(gc::centroid_error(seed), gc::kTolerance) << "L2 seed " << seed;
    EXPECT_LE(gc::shallow_error(seed), gc::kTolerance) << "L3 seed " << seed;
  }
}

TEST(AuxLoss, LargeMarginHandExample) {
  // Nearest target is 3 away, nearest other 1 away: loss 2, and moving the
  // poisoned point toward the target and away from the other lowers it.
  M p(1, 2), t(2, 2), o(1, 2);
  p << 0, 0;
  t << 3, 0, 0, 5;
  o << 0, 1;
  const auto l = lab::large_margin_loss(p, t, o);
  EXPECT_DOUBLE_EQ(l.value, 2.0);
  EXPECT_DOUBLE_EQ(l.grad_poisoned(0, 0), -1.0);
  EXPECT_DOUBLE_EQ(l.grad_poisoned(0, 1), 1.0);
  EXPECT_DOUBLE_EQ(l.grad_target(0, 0), 1.0);
  EXPECT_DOUBLE_EQ(l.grad_target.row(1).norm(), 0.0);
  EXPECT_DOUBLE_EQ(l.grad_other(0, 1), -1.0);

  // Closer to a target than to any other: hinge is inactive.
  o << 0, -4;
  const auto z = lab::large_margin_loss(p, t, o);
  EXPECT_EQ(z.value, 0.0);
  EXPECT_EQ(z.grad_poisoned.norm(), 0.0);
}

TEST(AuxLoss, CentroidVanishesAtTheCentroid) {
  M t(3, 2), p(2, 2);
  t << 0, 0, 2, 0, 1, 3;
  p << 1, 1, 1, 1;
  const auto l = lab::centroid_loss(p, t);
  EXPECT_DOUBLE_EQ(l.value, 0.0);
  EXPECT_EQ(l.grad_poisoned.norm(), 0.0);
  EXPECT_EQ(l.grad_target.norm(), 0.0);
  p << 4, 5, 1, 1;
  EXPECT_DOUBLE_EQ(lab::centroid_loss(p, t).value, 2.5);
}

TEST(AuxLoss, ShallowMatchIsMeanPairDistance) {
  M p(1, 2), t(2, 2);
  p << 0, 0;
  t << 3, 4, 0, 1;
  EXPECT_DOUBLE_EQ(lab::shallow_match_loss(p, t).value, 3.0);
  EXPECT_EQ(testing::error_of([&] { lab::shallow_match_loss(M(0, 2), t); }),
            ErrorCode::kInvalidArgument);
}

TEST(CrossEntropy, UniformLogitsGiveLogC) {
  const M logits = M::Zero(2, 4);
  const std::vector<Label> y = {0, 3};
  const auto ce = nn::softmax_cross_entropy<double>(logits, y);
  EXPECT_NEAR(ce.loss, std::log(4.0), 1e-15);
  EXPECT_NEAR(ce.grad(0, 0), (0.25 - 1) / 2, 1e-15);
  EXPECT_NEAR(ce.grad(1, 1), 0.25 / 2, 1e-15);
}

TEST(Sgd, MomentumUpdateMatchesClosedForm) {
  std::vector<double> p = {1.0};
  nn::SgdMomentum<double> opt({std::span<double>(p)}, 0.1, 0.5);
  const std::vector<double> g = {2.0};
  opt.step({std::span<const double>(g)});  // v = 2, p = 0.8
  opt.step({std::span<const double>(g)});  // v = 3, p = 0.5
  EXPECT_NEAR(p[0], 0.5, 1e-15);
  opt.step({std::span<const double>()});  // empty block is skipped
  EXPECT_NEAR(p[0], 0.5, 1e-15);
}

TEST(Network, FloatAndDoubleForwardAgree) {
  const auto f = nn::Network<float>::initialized(
      {LayerSpec::conv2d(1, 6, 6, 2, 3, true), LayerSpec::dense(32, 4, false)}, 3);
  const auto d = f.cast<double>();
  std::mt19937_64 rng(3);
  const M x = gc::random_matrix(rng, 5, 36, 0, 1);
  const M diff = d.forward(x).logits() - f.forward(x.cast<float>()).logits().cast<double>();
  EXPECT_LE(diff.cwiseAbs().maxCoeff(), 1e-5);
  EXPECT_EQ(testing::error_of([&] { f.forward(nn::Matrix<float>::Zero(1, 35)); }),
            ErrorCode::kDimMismatch);
  EXPECT_EQ(testing::error_of([] {
              nn::Network<float>({LayerSpec::dense(4, 3, true), LayerSpec::dense(4, 2, false)});
            }),
            ErrorCode::kDimMismatch);
}

}  // namespace
}  // namespace toporank
