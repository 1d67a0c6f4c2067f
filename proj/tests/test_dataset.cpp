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
#include <filesystem>

#include "test_util.hpp"

namespace toporank {
namespace {

using testing::error_of;

const std::string kImages = testing::source_path("data/mnist/mnist5k-images-idx3-ubyte");
const std::string kLabels = testing::source_path("data/mnist/mnist5k-labels-idx1-ubyte");

std::vector<std::size_t> class_counts(const Dataset& d) {
  std::vector<std::size_t> n(static_cast<std::size_t>(d.num_classes), 0);
  for (Label y : d.labels) ++n[static_cast<std::size_t>(y)];
  return n;
}

void write_bytes(const std::filesystem::path& p, std::vector<std::uint8_t> bytes) {
  io::write_file(p.string(), bytes);
}

std::vector<std::uint8_t> idx_header(std::uint32_t magic, std::vector<std::uint32_t> dims) {
  std::vector<std::uint8_t> out;
  auto be = [&](std::uint32_t v) {
    for (int s = 24; s >= 0; s -= 8) out.push_back(static_cast<std::uint8_t>(v >> s));
  };
  be(magic);
  for (auto d : dims) be(d);
  return out;
}

TEST(Mnist, BundledSubsetLoads) {
  const Dataset d = load_mnist_idx(kImages, kLabels);
  EXPECT_EQ(d.size(), 5000u);
  EXPECT_EQ(d.dim, 784u);
  for (std::size_t n : class_counts(d)) EXPECT_EQ(n, 500u);
  float lo = 1, hi = 0;
  for (float x : d.features) {
    lo = std::min(lo, x);
    hi = std::max(hi, x);
  }
  EXPECT_EQ(lo, 0.0f);
  EXPECT_EQ(hi, 1.0f);
}

TEST(Mnist, StratifiedTake) {
  const Dataset d = load_mnist_idx(kImages, kLabels, 100, 3);
  EXPECT_EQ(d.size(), 100u);
  for (std::size_t n : class_counts(d)) EXPECT_EQ(n, 10u);
  EXPECT_EQ(d, load_mnist_idx(kImages, kLabels, 100, 3));
  EXPECT_NE(d, load_mnist_idx(kImages, kLabels, 100, 4));
}

TEST(Mnist, HandBuiltFileDecodesBigEndianAndScales) {
  const auto dir = std::filesystem::temp_directory_path();
  auto img = idx_header(0x803, {2, 1, 2});
  img.insert(img.end(), {0, 255, 51, 102});
  auto lab = idx_header(0x801, {2});
  lab.insert(lab.end(), {7, 3});
  write_bytes(dir / "tr_img", img);
  write_bytes(dir / "tr_lab", lab);
  const Dataset d = load_mnist_idx((dir / "tr_img").string(), (dir / "tr_lab").string());
  ASSERT_EQ(d.size(), 2u);
  EXPECT_EQ(d.dim, 2u);
  EXPECT_EQ(d.labels, (std::vector<Label>{7, 3}));
  EXPECT_EQ(d.features, (std::vector<float>{0.0f, 1.0f, 0.2f, 0.4f}));
}

TEST(Mnist, WrongMagicAndCountMismatch) {
  const auto dir = std::filesystem::temp_directory_path();
  auto img = idx_header(0x803, {1, 1, 1});
  img.push_back(9);
  auto bad_lab = idx_header(0x803, {1});
  bad_lab.push_back(1);
  write_bytes(dir / "tr_img", img);
  write_bytes(dir / "tr_bad", bad_lab);
  EXPECT_EQ(error_of([&] { load_mnist_idx((dir / "tr_img").string(), (dir / "tr_bad").string()); }),
            ErrorCode::kBadMagic);
  auto labels_as_images = idx_header(0x801, {1, 1, 1});
  labels_as_images.push_back(9);
  write_bytes(dir / "tr_swapped", labels_as_images);
  EXPECT_EQ(error_of([&] { load_mnist_idx((dir / "tr_swapped").string(), (dir / "tr_bad").string()); }),
            ErrorCode::kBadMagic);

  auto two_labels = idx_header(0x801, {2});
  two_labels.insert(two_labels.end(), {1, 2});
  write_bytes(dir / "tr_two", two_labels);
  EXPECT_EQ(error_of([&] { load_mnist_idx((dir / "tr_img").string(), (dir / "tr_two").string()); }),
            ErrorCode::kCountMismatch);

  auto short_img = img;
  short_img.pop_back();
  write_bytes(dir / "tr_short", short_img);
  auto one_label = idx_header(0x801, {1});
  one_label.push_back(0);
  write_bytes(dir / "tr_one", one_label);
  EXPECT_EQ(error_of([&] { load_mnist_idx((dir / "tr_short").string(), (dir / "tr_one").string()); }),
            ErrorCode::kTruncated);
}

TEST(Blobs, VanishingStddevSitsOnTheMeans) {
  auto spec = SyntheticBlobSpec::axis_aligned(3, 5, 4.0f, 1e-9f, 20, 1);
  const Dataset d = gen_blobs(spec);
  ASSERT_EQ(d.size(), 60u);
  for (std::size_t i = 0; i < d.size(); ++i) {
    const auto& mu = spec.means[static_cast<std::size_t>(d.labels[i])];
    for (std::size_t j = 0; j < d.dim; ++j) EXPECT_NEAR(d.row(i)[j], mu[j], 1e-6);
  }
}

TEST(Blobs, WellSeparatedClassesAreNearestNeighborSeparable) {
  // Means 10 sigma apart; leave-one-out 1-NN on raw inputs.
  SyntheticBlobSpec spec;
  spec.num_classes = 2;
  spec.input_dim = 8;
  spec.means = {std::vector<float>(8, 0.0f), std::vector<float>(8, 0.0f)};
  spec.means[1][0] = 10.0f;
  spec.stddev = 1.0f;
  spec.counts = {200, 200};
  spec.seed = 5;
  const Dataset d = gen_blobs(spec);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    double best = INFINITY;
    Label pred = -1;
    for (std::size_t j = 0; j < d.size(); ++j) {
      if (i == j) continue;
      double s = 0;
      for (std::size_t k = 0; k < d.dim; ++k) s += std::pow(d.row(i)[k] - d.row(j)[k], 2);
      if (s < best) {
        best = s;
        pred = d.labels[j];
      }
    }
    correct += pred == d.labels[i];
  }
  EXPECT_GE(static_cast<double>(correct) / d.size(), 0.99);
}

TEST(Blobs, DeterministicBytes) {
  const auto spec = SyntheticBlobSpec::axis_aligned(4, 6, 3.0f, 0.5f, 25, 77);
  EXPECT_EQ(io::encode_trace(dataset_to_trace(gen_blobs(spec))),
            io::encode_trace(dataset_to_trace(gen_blobs(spec))));
}

TEST(Blobs, InvalidSpecs) {
  auto spec = SyntheticBlobSpec::axis_aligned(3, 3, 1.0f, 1.0f, 2, 0);
  spec.stddev = 0.0f;
  EXPECT_EQ(error_of([&] { gen_blobs(spec); }), ErrorCode::kInvalidArgument);
  spec = SyntheticBlobSpec::axis_aligned(3, 3, 1.0f, 1.0f, 2, 0);
  spec.means[2] = spec.means[0];
  EXPECT_EQ(error_of([&] { gen_blobs(spec); }), ErrorCode::kInvalidArgument);
}

TEST(Split, StratifiedSplitIsDisjointAndExact) {
  const Dataset d = gen_blobs(SyntheticBlobSpec::axis_aligned(3, 3, 5.0f, 1.0f, 30, 2));
  const auto [a, b] = stratified_split(d, 10, 9);
  EXPECT_EQ(a.size(), 30u);
  EXPECT_EQ(b.size(), 60u);
  for (std::size_t n : class_counts(a)) EXPECT_EQ(n, 10u);
  std::vector<std::uint64_t> ids = a.ids;
  ids.insert(ids.end(), b.ids.begin(), b.ids.end());
  std::sort(ids.begin(), ids.end());
  EXPECT_EQ(std::adjacent_find(ids.begin(), ids.end()), ids.end());
  EXPECT_EQ(ids.size(), d.size());
  EXPECT_EQ(error_of([&] { stratified_split(d, 31, 0); }), ErrorCode::kInsufficientReferences);
}

TEST(DatasetTrace, RoundTrip) {
  const Dataset d = gen_blobs(SyntheticBlobSpec::axis_aligned(2, 4, 5.0f, 1.0f, 5, 2));
  EXPECT_EQ(trace_to_dataset(io::decode_trace(io::encode_trace(dataset_to_trace(d)))), d);
}

}  // namespace
}  // namespace toporank
