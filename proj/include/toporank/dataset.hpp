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

#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "toporank/container.hpp"
#include "toporank/core_types.hpp"

namespace toporank {

// Labeled inputs stored as one row-major (n x dim) binary32 matrix.
struct Dataset {
  std::size_t dim = 0;
  int num_classes = 0;
  std::vector<float> features;
  std::vector<Label> labels;
  std::vector<std::uint64_t> ids;

  std::size_t size() const { return labels.size(); }

  std::span<const float> row(std::size_t i) const {
    return std::span<const float>(features).subspan(i * dim, dim);
  }
  std::span<float> row(std::size_t i) { return std::span<float>(features).subspan(i * dim, dim); }

  void push_back(std::span<const float> x, Label y, std::uint64_t id) {
    require(x.size() == dim, ErrorCode::kDimMismatch, "row has wrong dim");
    features.insert(features.end(), x.begin(), x.end());
    labels.push_back(y);
    ids.push_back(id);
  }

  Dataset empty_like() const {
    Dataset d;
    d.dim = dim;
    d.num_classes = num_classes;
    return d;
  }

  Dataset subset(std::span<const std::size_t> indices) const {
    Dataset d = empty_like();
    d.features.reserve(indices.size() * dim);
    for (std::size_t i : indices) d.push_back(row(i), labels[i], ids[i]);
    return d;
  }

  std::vector<std::size_t> indices_of(Label y) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] == y) out.push_back(i);
    }
    return out;
  }

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

// Splits indices into per-class pools after a seeded shuffle of each class.
inline std::vector<std::vector<std::size_t>> shuffled_class_pools(const Dataset& data,
                                                                  std::uint64_t seed) {
  std::vector<std::vector<std::size_t>> pools(static_cast<std::size_t>(data.num_classes));
  for (std::size_t i = 0; i < data.size(); ++i) {
    require(data.labels[i] >= 0 && data.labels[i] < data.num_classes, ErrorCode::kOutOfRange,
            "label out of range");
    pools[static_cast<std::size_t>(data.labels[i])].push_back(i);
  }
  std::mt19937_64 rng(seed);
  for (auto& pool : pools) std::shuffle(pool.begin(), pool.end(), rng);
  return pools;
}

// Stratified split: the first `per_class[k]` shuffled samples of each class go
// to the first part, the rest to the second. Source order is kept in both.
inline std::pair<Dataset, Dataset> stratified_split(const Dataset& data, std::size_t per_class,
                                                    std::uint64_t seed) {
  auto pools = shuffled_class_pools(data, seed);
  std::vector<std::size_t> first, second;
  for (std::size_t k = 0; k < pools.size(); ++k) {
    require(pools[k].size() >= per_class, ErrorCode::kInsufficientReferences,
            "class " + std::to_string(k) + " has only " + std::to_string(pools[k].size()) +
                " samples, need " + std::to_string(per_class));
    first.insert(first.end(), pools[k].begin(), pools[k].begin() + static_cast<long>(per_class));
    second.insert(second.end(), pools[k].begin() + static_cast<long>(per_class), pools[k].end());
  }
  std::sort(first.begin(), first.end());
  std::sort(second.begin(), second.end());
  return {data.subset(first), data.subset(second)};
}

// Stratified subsample of `take` samples: take / c per class, with the
// remainder assigned to the lowest class indices.
inline Dataset stratified_take(const Dataset& data, std::size_t take, std::uint64_t seed) {
  const auto c = static_cast<std::size_t>(data.num_classes);
  auto pools = shuffled_class_pools(data, seed);
  std::vector<std::size_t> chosen;
  for (std::size_t k = 0; k < c; ++k) {
    const std::size_t want = take / c + (k < take % c ? 1 : 0);
    require(pools[k].size() >= want, ErrorCode::kInsufficientReferences,
            "class " + std::to_string(k) + " too small for stratified take");
    chosen.insert(chosen.end(), pools[k].begin(), pools[k].begin() + static_cast<long>(want));
  }
  std::sort(chosen.begin(), chosen.end());
  return data.subset(chosen);
}

// MNIST IDX files (big-endian). Pixels are scaled to [0, 1]. When `take` is
// given the result is a stratified subsample.
inline Dataset load_mnist_idx(const std::string& images_path, const std::string& labels_path,
                              std::optional<std::size_t> take = std::nullopt,
                              std::uint64_t seed = 0) {
  const auto images = io::read_file(images_path);
  const auto labels = io::read_file(labels_path);
  require(images.size() >= 16, ErrorCode::kTruncated, "image file shorter than IDX header");
  require(labels.size() >= 8, ErrorCode::kTruncated, "label file shorter than IDX header");
  require(io::get_be32(images.data()) == 0x00000803u, ErrorCode::kBadMagic,
          "image file magic is not 0x00000803");
  require(io::get_be32(labels.data()) == 0x00000801u, ErrorCode::kBadMagic,
          "label file magic is not 0x00000801");
  const std::uint64_t n = io::get_be32(images.data() + 4);
  const std::uint64_t rows = io::get_be32(images.data() + 8);
  const std::uint64_t cols = io::get_be32(images.data() + 12);
  const std::uint64_t n_labels = io::get_be32(labels.data() + 4);
  require(n == n_labels, ErrorCode::kCountMismatch,
          std::to_string(n) + " images but " + std::to_string(n_labels) + " labels");
  const std::uint64_t dim = rows * cols;
  require(images.size() - 16 == n * dim, ErrorCode::kTruncated, "image payload size mismatch");
  require(labels.size() - 8 == n, ErrorCode::kTruncated, "label payload size mismatch");

  Dataset d;
  d.dim = dim;
  d.num_classes = 10;
  d.features.resize(n * dim);
  d.labels.resize(n);
  d.ids.resize(n);
  for (std::uint64_t i = 0; i < n * dim; ++i) {
    d.features[i] = static_cast<float>(images[16 + i]) / 255.0f;
  }
  for (std::uint64_t i = 0; i < n; ++i) {
    d.labels[i] = labels[8 + i];
    require(d.labels[i] < 10, ErrorCode::kOutOfRange, "MNIST label above 9");
    d.ids[i] = i;
  }
  if (take) return stratified_take(d, *take, seed);
  return d;
}

struct SyntheticBlobSpec {
  int num_classes = 2;
  std::size_t input_dim = 2;
  std::vector<std::vector<float>> means;  // one per class
  float stddev = 1.0f;
  std::vector<std::size_t> counts;  // samples per class
  std::uint64_t seed = 0;

  void validate() const {
    require(num_classes >= 2, ErrorCode::kInvalidArgument, "need at least 2 classes");
    require(static_cast<int>(means.size()) == num_classes, ErrorCode::kInvalidArgument,
            "one mean per class required");
    require(static_cast<int>(counts.size()) == num_classes, ErrorCode::kInvalidArgument,
            "one count per class required");
    require(stddev > 0.0f, ErrorCode::kInvalidArgument, "stddev must be positive");
    for (const auto& mu : means) {
      require(mu.size() == input_dim, ErrorCode::kDimMismatch, "mean has wrong dim");
    }
    for (std::size_t a = 0; a < means.size(); ++a) {
      for (std::size_t b = a + 1; b < means.size(); ++b) {
        require(means[a] != means[b], ErrorCode::kInvalidArgument, "class means must differ");
      }
    }
  }

  // Means placed at `separation` along distinct coordinate axes, so every
  // pair is separation * sqrt(2) apart.
  static SyntheticBlobSpec axis_aligned(int c, std::size_t dim, float separation, float stddev,
                                        std::size_t per_class, std::uint64_t seed) {
    require(dim >= static_cast<std::size_t>(c), ErrorCode::kInvalidArgument,
            "axis-aligned blobs need dim >= c");
    SyntheticBlobSpec s;
    s.num_classes = c;
    s.input_dim = dim;
    s.stddev = stddev;
    s.seed = seed;
    for (int k = 0; k < c; ++k) {
      std::vector<float> mu(dim, 0.0f);
      mu[static_cast<std::size_t>(k)] = separation;
      s.means.push_back(std::move(mu));
      s.counts.push_back(per_class);
    }
    return s;
  }
};

// Samples are emitted class by class; deterministic for a given seed.
inline Dataset gen_blobs(const SyntheticBlobSpec& spec) {
  spec.validate();
  Dataset d;
  d.dim = spec.input_dim;
  d.num_classes = spec.num_classes;
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<float> x(spec.input_dim);
  std::uint64_t id = 0;
  for (int k = 0; k < spec.num_classes; ++k) {
    const auto& mu = spec.means[static_cast<std::size_t>(k)];
    for (std::size_t i = 0; i < spec.counts[static_cast<std::size_t>(k)]; ++i) {
      for (std::size_t j = 0; j < spec.input_dim; ++j) {
        x[j] = static_cast<float>(mu[j] + spec.stddev * normal(rng));
      }
      d.push_back(x, k, id++);
    }
  }
  return d;
}

// Datasets travel between CLI stages as single-tap traces ("input" tap);
// predicted_label mirrors the true label.
inline ActivationTrace dataset_to_trace(const Dataset& data) {
  ActivationTrace t;
  t.label_space = LabelSpace(data.num_classes);
  t.taps.push_back({1, "input", data.dim, TapKind::kOther});
  for (std::size_t i = 0; i < data.size(); ++i) {
    auto r = data.row(i);
    t.samples.push_back({data.ids[i], data.labels[i], data.labels[i], SampleKind::kNoT,
                         {std::vector<float>(r.begin(), r.end())}});
  }
  return t;
}

inline Dataset trace_to_dataset(const ActivationTrace& t) {
  require(t.taps.size() == 1, ErrorCode::kTapMismatch, "dataset traces carry exactly one tap");
  Dataset d;
  d.dim = t.taps[0].dim;
  d.num_classes = t.label_space.num_classes;
  for (const TraceSample& s : t.samples) {
    require(s.true_label.has_value(), ErrorCode::kInvalidArgument,
            "dataset sample " + std::to_string(s.sample_id) + " lacks a true label");
    d.push_back(s.activations.at(0), *s.true_label, s.sample_id);
  }
  return d;
}

}  // namespace toporank
