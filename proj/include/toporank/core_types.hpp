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
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "toporank/error.hpp"

namespace toporank {

// Labels are 0-based everywhere inside the library.
using Label = int;

struct LabelSpace {
  int num_classes = 0;
  std::vector<std::string> class_names;  // empty or exactly num_classes entries

  LabelSpace() = default;
  explicit LabelSpace(int c, std::vector<std::string> names = {})
      : num_classes(c), class_names(std::move(names)) {
    require(c >= 2, ErrorCode::kInvalidArgument, "label space needs at least 2 classes");
    require(class_names.empty() || static_cast<int>(class_names.size()) == c,
            ErrorCode::kInvalidArgument, "class_names length must equal num_classes");
  }

  bool contains(Label y) const { return y >= 0 && y < num_classes; }

  friend bool operator==(const LabelSpace&, const LabelSpace&) = default;
};

enum class TapKind { kConv, kRelu, kLinear, kAttention, kEmbedding, kOther };

inline std::string_view to_string(TapKind kind) {
  switch (kind) {
    case TapKind::kConv: return "conv";
    case TapKind::kRelu: return "relu";
    case TapKind::kLinear: return "linear";
    case TapKind::kAttention: return "attention";
    case TapKind::kEmbedding: return "embedding";
    case TapKind::kOther: return "other";
  }
  return "other";
}

inline TapKind parse_tap_kind(std::string_view s) {
  for (TapKind k : {TapKind::kConv, TapKind::kRelu, TapKind::kLinear, TapKind::kAttention,
                    TapKind::kEmbedding, TapKind::kOther}) {
    if (to_string(k) == s) return k;
  }
  fail(ErrorCode::kInvalidArgument, "unknown tap kind '" + std::string(s) + "'");
}

struct LayerTap {
  int tap_id = 0;  // 1-based position in network order
  std::string name;
  std::size_t dim = 0;
  TapKind kind = TapKind::kOther;

  friend bool operator==(const LayerTap&, const LayerTap&) = default;
};

enum class SampleKind { kNoT, kVT, kNVT, kCT, kUnknown };

inline std::string_view to_string(SampleKind kind) {
  switch (kind) {
    case SampleKind::kNoT: return "NoT";
    case SampleKind::kVT: return "VT";
    case SampleKind::kNVT: return "NVT";
    case SampleKind::kCT: return "CT";
    case SampleKind::kUnknown: return "unknown";
  }
  return "unknown";
}

inline SampleKind parse_sample_kind(std::string_view s) {
  for (SampleKind k : {SampleKind::kNoT, SampleKind::kVT, SampleKind::kNVT, SampleKind::kCT,
                       SampleKind::kUnknown}) {
    if (to_string(k) == s) return k;
  }
  fail(ErrorCode::kInvalidArgument, "unknown sample kind '" + std::string(s) + "'");
}

struct TraceSample {
  std::uint64_t sample_id = 0;
  std::optional<Label> true_label;
  Label predicted_label = 0;
  SampleKind kind = SampleKind::kUnknown;
  std::vector<std::vector<float>> activations;  // one flattened vector per tap

  friend bool operator==(const TraceSample&, const TraceSample&) = default;
};

// Per-sample activations at every tapped layer. Multi-dimensional layer
// outputs are flattened row-major as (channel, row, column).
struct ActivationTrace {
  LabelSpace label_space;
  std::vector<LayerTap> taps;
  std::vector<TraceSample> samples;

  std::size_t num_taps() const { return taps.size(); }

  friend bool operator==(const ActivationTrace&, const ActivationTrace&) = default;
};

enum class ViolationKind {
  kDimMismatch,
  kMissingTap,
  kNonFinite,
  kLabelOutOfRange,
  kTapOrder,
  kEmptyTap,
};

struct Violation {
  ViolationKind kind;
  std::optional<std::uint64_t> sample_id;
  std::string tap_name;
  std::string message;
};

struct ValidationReport {
  std::vector<Violation> violations;
  bool ok() const { return violations.empty(); }
};

inline ValidationReport validate_trace(const ActivationTrace& trace, const LabelSpace& labels) {
  ValidationReport report;
  auto add = [&](ViolationKind kind, std::optional<std::uint64_t> id, std::string tap,
                 std::string message) {
    report.violations.push_back({kind, id, std::move(tap), std::move(message)});
  };

  for (std::size_t t = 0; t < trace.taps.size(); ++t) {
    const LayerTap& tap = trace.taps[t];
    if (tap.dim == 0) add(ViolationKind::kEmptyTap, std::nullopt, tap.name, "tap has dim 0");
    if (t > 0 && tap.tap_id <= trace.taps[t - 1].tap_id) {
      add(ViolationKind::kTapOrder, std::nullopt, tap.name, "tap ids must strictly increase");
    }
  }

  for (const TraceSample& s : trace.samples) {
    if (!labels.contains(s.predicted_label)) {
      add(ViolationKind::kLabelOutOfRange, s.sample_id, "",
          "predicted_label " + std::to_string(s.predicted_label) + " outside [0, " +
              std::to_string(labels.num_classes) + ")");
    }
    if (s.true_label && !labels.contains(*s.true_label)) {
      add(ViolationKind::kLabelOutOfRange, s.sample_id, "",
          "true_label " + std::to_string(*s.true_label) + " outside [0, " +
              std::to_string(labels.num_classes) + ")");
    }
    if (s.activations.size() != trace.taps.size()) {
      add(ViolationKind::kMissingTap, s.sample_id, "",
          "expected " + std::to_string(trace.taps.size()) + " tap vectors, found " +
              std::to_string(s.activations.size()));
    }
    const std::size_t n = std::min(s.activations.size(), trace.taps.size());
    for (std::size_t t = 0; t < n; ++t) {
      const auto& v = s.activations[t];
      const LayerTap& tap = trace.taps[t];
      if (v.size() != tap.dim) {
        add(ViolationKind::kDimMismatch, s.sample_id, tap.name,
            "expected dim " + std::to_string(tap.dim) + ", found " + std::to_string(v.size()));
      }
      auto bad = std::find_if(v.begin(), v.end(), [](float x) { return !std::isfinite(x); });
      if (bad != v.end()) {
        add(ViolationKind::kNonFinite, s.sample_id, tap.name,
            "non-finite value at index " + std::to_string(bad - v.begin()));
      }
    }
  }
  return report;
}

inline void require_valid(const ActivationTrace& trace) {
  const ValidationReport report = validate_trace(trace, trace.label_space);
  if (report.ok()) return;
  const Violation& v = report.violations.front();
  std::string where = v.sample_id ? "sample " + std::to_string(*v.sample_id) : "trace";
  if (!v.tap_name.empty()) where += " tap '" + v.tap_name + "'";
  const ErrorCode code = v.kind == ViolationKind::kLabelOutOfRange ? ErrorCode::kOutOfRange
                         : v.kind == ViolationKind::kNonFinite     ? ErrorCode::kNonFinite
                                                                   : ErrorCode::kDimMismatch;
  fail(code,
       where + ": " + v.message + " (" + std::to_string(report.violations.size()) +
           " violation(s) total)");
}

struct BankEntry {
  std::size_t ref_index = 0;
  Label class_label = 0;
  Label predicted_label = 0;  // the network's prediction for this entry
  std::uint64_t source_sample_id = 0;
  std::vector<std::vector<float>> activations;

  friend bool operator==(const BankEntry&, const BankEntry&) = default;
};

// c classes times m clean samples, stored class-major with dense ref_index.
struct ReferenceBank {
  LabelSpace label_space;
  std::size_t per_class_count = 0;
  std::vector<LayerTap> taps;
  std::vector<BankEntry> entries;

  std::size_t size() const { return entries.size(); }

  friend bool operator==(const ReferenceBank&, const ReferenceBank&) = default;
};

inline void check_bank(const ReferenceBank& bank) {
  const auto c = static_cast<std::size_t>(bank.label_space.num_classes);
  require(bank.entries.size() == c * bank.per_class_count, ErrorCode::kCountMismatch,
          "bank must hold exactly c*m entries");
  std::vector<std::size_t> per_class(c, 0);
  for (std::size_t i = 0; i < bank.entries.size(); ++i) {
    const BankEntry& e = bank.entries[i];
    require(e.ref_index == i, ErrorCode::kInvalidArgument, "ref_index values must be dense");
    require(bank.label_space.contains(e.class_label), ErrorCode::kOutOfRange,
            "bank class label out of range");
    ++per_class[static_cast<std::size_t>(e.class_label)];
    require(e.activations.size() == bank.taps.size(), ErrorCode::kTapMismatch,
            "bank entry tap count mismatch");
    for (std::size_t t = 0; t < bank.taps.size(); ++t) {
      require(e.activations[t].size() == bank.taps[t].dim, ErrorCode::kDimMismatch,
              "bank entry dim mismatch at tap '" + bank.taps[t].name + "'");
      for (float x : e.activations[t]) {
        require(std::isfinite(x), ErrorCode::kNonFinite, "non-finite bank activation");
      }
    }
  }
  for (std::size_t k = 0; k < c; ++k) {
    require(per_class[k] == bank.per_class_count, ErrorCode::kCountMismatch,
            "class " + std::to_string(k) + " has " + std::to_string(per_class[k]) +
                " entries, expected " + std::to_string(bank.per_class_count));
  }
}

// Stratified selection by true label: seeded shuffle per class, then take
// the first m of each class. Samples without a true label are ignored.
inline ReferenceBank make_reference_bank(const ActivationTrace& trace, std::size_t m,
                                         std::uint64_t seed) {
  require(m >= 1, ErrorCode::kInvalidArgument, "per-class count m must be positive");
  const int c = trace.label_space.num_classes;
  std::vector<std::vector<std::size_t>> by_class(static_cast<std::size_t>(c));
  for (std::size_t i = 0; i < trace.samples.size(); ++i) {
    const auto& y = trace.samples[i].true_label;
    if (y && trace.label_space.contains(*y)) by_class[static_cast<std::size_t>(*y)].push_back(i);
  }

  ReferenceBank bank;
  bank.label_space = trace.label_space;
  bank.per_class_count = m;
  bank.taps = trace.taps;
  std::mt19937_64 rng(seed);
  for (int k = 0; k < c; ++k) {
    auto& idx = by_class[static_cast<std::size_t>(k)];
    require(idx.size() >= m, ErrorCode::kInsufficientReferences,
            "class " + std::to_string(k) + " has " + std::to_string(idx.size()) +
                " samples, need " + std::to_string(m));
    std::shuffle(idx.begin(), idx.end(), rng);
    for (std::size_t j = 0; j < m; ++j) {
      const TraceSample& s = trace.samples[idx[j]];
      bank.entries.push_back(
          {bank.entries.size(), k, s.predicted_label, s.sample_id, s.activations});
    }
  }
  return bank;
}

// [K_1, ..., K_N]: per tap, the 1-based global rank of the nearest reference
// sharing the predicted class. In k-NN mode knn_ranks[l] holds the ranks of
// the k nearest same-class references.
struct RankSequence {
  std::uint64_t sample_id = 0;
  Label predicted_label = 0;
  std::vector<int> ranks;
  std::vector<std::vector<int>> knn_ranks;

  bool is_knn() const { return !knn_ranks.empty(); }

  // Detector feature vector: ranks in nearest mode, concatenated k-NN ranks
  // (tap-major) otherwise.
  std::vector<double> features() const {
    std::vector<double> out;
    if (is_knn()) {
      for (const auto& per_tap : knn_ranks) out.insert(out.end(), per_tap.begin(), per_tap.end());
    } else {
      out.assign(ranks.begin(), ranks.end());
    }
    return out;
  }

  friend bool operator==(const RankSequence&, const RankSequence&) = default;
};

}  // namespace toporank
