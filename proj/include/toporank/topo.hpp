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

// Rank features over a reference bank.
//
// For a sample with predicted class j and each tapped layer l, every bank
// entry is ordered by (distance to the sample at layer l, ref_index). K_l is
// the 1-based position in that order of the nearest class-j entry. In k-NN
// mode the positions of the k nearest class-j entries are kept instead.
// An excluded entry (the sample itself, when featurizing the bank) is removed
// from the ordering altogether.

#pragma once

#include <algorithm>
#include <cmath>
#include <exception>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <thread>
#include <utility>
#include <vector>

#include "toporank/core_types.hpp"
#include "toporank/error.hpp"

namespace toporank::topo {

enum class Metric { kEuclidean, kCosine };

inline std::string_view to_string(Metric m) {
  return m == Metric::kEuclidean ? "euclidean" : "cosine";
}

inline Metric parse_metric(std::string_view s) {
  if (s == "euclidean") return Metric::kEuclidean;
  if (s == "cosine") return Metric::kCosine;
  fail(ErrorCode::kInvalidArgument, "unknown metric '" + std::string(s) + "'");
}

// Accumulates in binary64.
inline double distance(std::span<const float> a, std::span<const float> b, Metric metric) {
  if (metric == Metric::kEuclidean) {
    double sum = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
      sum += d * d;
    }
    return std::sqrt(sum);
  }
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double x = a[i], y = b[i];
    dot += x * y;
    na += x * x;
    nb += y * y;
  }
  if (na == 0.0 || nb == 0.0) return 1.0;
  return 1.0 - dot / (std::sqrt(na) * std::sqrt(nb));
}

struct RadiusConfig {
  enum class Mode { kNearestOnly, kKnn };
  Mode mode = Mode::kNearestOnly;
  std::size_t k = 1;

  static RadiusConfig nearest() { return {}; }
  static RadiusConfig knn(std::size_t k) {
    require(k >= 1, ErrorCode::kInvalidArgument, "k must be positive");
    return {Mode::kKnn, k};
  }
  // Inverse of radius_percent: k = round(r * c * m / 100), at least 1.
  static RadiusConfig from_percent(double percent, int num_classes, std::size_t m) {
    const double k = std::round(percent * num_classes * static_cast<double>(m) / 100.0);
    return knn(static_cast<std::size_t>(std::max(1.0, k)));
  }

  std::size_t effective_k() const { return mode == Mode::kNearestOnly ? 1 : k; }
  bool is_knn() const { return mode == Mode::kKnn; }

  // r = k / (c * m) * 100%.
  double radius_percent(int num_classes, std::size_t m) const {
    return static_cast<double>(effective_k()) / (num_classes * static_cast<double>(m)) * 100.0;
  }

  void validate(std::size_t per_class_count) const {
    require(effective_k() >= 1, ErrorCode::kInvalidArgument, "k must be positive");
    require(effective_k() <= per_class_count, ErrorCode::kInvalidArgument,
            "k = " + std::to_string(effective_k()) + " exceeds per-class count m = " +
                std::to_string(per_class_count));
  }
};

inline void check_taps(std::span<const LayerTap> sample_taps, const ReferenceBank& bank) {
  require(sample_taps.size() == bank.taps.size(), ErrorCode::kTapMismatch,
          "sample has " + std::to_string(sample_taps.size()) + " taps, bank has " +
              std::to_string(bank.taps.size()));
  for (std::size_t t = 0; t < sample_taps.size(); ++t) {
    require(sample_taps[t].dim == bank.taps[t].dim && sample_taps[t].name == bank.taps[t].name,
            ErrorCode::kTapMismatch,
            "tap " + std::to_string(t + 1) + " ('" + sample_taps[t].name + "', dim " +
                std::to_string(sample_taps[t].dim) + ") differs from bank tap ('" +
                bank.taps[t].name + "', dim " + std::to_string(bank.taps[t].dim) + ")");
  }
}

// Ranks for one sample. `activations` has one vector per bank tap.
inline RankSequence rank_sequence(std::span<const std::vector<float>> activations,
                                  Label predicted, const ReferenceBank& bank, Metric metric,
                                  const RadiusConfig& radius,
                                  std::optional<std::size_t> exclude = std::nullopt,
                                  std::uint64_t sample_id = 0) {
  require(activations.size() == bank.taps.size(), ErrorCode::kTapMismatch,
          "sample tap count differs from bank");
  require(bank.label_space.contains(predicted), ErrorCode::kOutOfRange,
          "predicted label outside the bank's label space");
  const std::size_t k = radius.effective_k();
  const std::size_t n = bank.entries.size();

  std::vector<std::size_t> same_class;
  for (const BankEntry& e : bank.entries) {
    if (e.class_label == predicted && (!exclude || e.ref_index != *exclude)) {
      same_class.push_back(e.ref_index);
    }
  }
  require(same_class.size() >= k, ErrorCode::kInsufficientReferences,
          "class " + std::to_string(predicted) + " has " + std::to_string(same_class.size()) +
              " usable references, need " + std::to_string(k) +
              (exclude ? " (featurizing a bank needs m >= 2)" : ""));

  RankSequence out;
  out.sample_id = sample_id;
  out.predicted_label = predicted;
  out.ranks.resize(bank.taps.size());
  if (radius.is_knn()) out.knn_ranks.resize(bank.taps.size());

  std::vector<double> dist(n);
  std::vector<std::pair<double, std::size_t>> candidates(same_class.size());
  for (std::size_t t = 0; t < bank.taps.size(); ++t) {
    require(activations[t].size() == bank.taps[t].dim, ErrorCode::kDimMismatch,
            "activation dim mismatch at tap '" + bank.taps[t].name + "'");
    for (std::size_t i = 0; i < n; ++i) {
      dist[i] = distance(activations[t], bank.entries[i].activations[t], metric);
    }
    for (std::size_t c = 0; c < same_class.size(); ++c) {
      candidates[c] = {dist[same_class[c]], same_class[c]};
    }
    std::partial_sort(candidates.begin(), candidates.begin() + static_cast<long>(k),
                      candidates.end());

    std::vector<int> positions(k);
    for (std::size_t q = 0; q < k; ++q) {
      const auto [d_star, i_star] = candidates[q];
      std::size_t ahead = 0;
      for (std::size_t i = 0; i < n; ++i) {
        if (exclude && i == *exclude) continue;
        if (dist[i] < d_star || (dist[i] == d_star && i < i_star)) ++ahead;
      }
      positions[q] = static_cast<int>(ahead + 1);
    }
    out.ranks[t] = positions[0];
    if (radius.is_knn()) out.knn_ranks[t] = std::move(positions);
  }
  return out;
}

// Detector-training features: every bank entry ranked against the rest of
// the bank, using the network's prediction for that entry.
inline std::vector<RankSequence> featurize_bank(const ReferenceBank& bank, Metric metric,
                                                const RadiusConfig& radius) {
  check_bank(bank);
  require(bank.per_class_count >= 2, ErrorCode::kInsufficientReferences,
          "featurizing a bank excludes each entry from its own class; need m >= 2");
  radius.validate(bank.per_class_count);
  std::vector<RankSequence> out;
  out.reserve(bank.entries.size());
  for (const BankEntry& e : bank.entries) {
    out.push_back(rank_sequence(e.activations, e.predicted_label, bank, metric, radius,
                                e.ref_index, e.source_sample_id));
  }
  return out;
}

// Features for test samples, in trace order. Work is split into contiguous
// chunks across `threads` workers; results do not depend on the split.
inline std::vector<RankSequence> featurize_batch(const ActivationTrace& trace,
                                                 const ReferenceBank& bank, Metric metric,
                                                 const RadiusConfig& radius,
                                                 unsigned threads = 1) {
  check_taps(trace.taps, bank);
  radius.validate(bank.per_class_count);
  const std::size_t n = trace.samples.size();
  std::vector<RankSequence> out(n);
  auto work = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const TraceSample& s = trace.samples[i];
      out[i] = rank_sequence(s.activations, s.predicted_label, bank, metric, radius,
                             std::nullopt, s.sample_id);
    }
  };
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(n, 1))));
  if (threads == 1) {
    work(0, n);
    return out;
  }
  std::vector<std::exception_ptr> errors(threads);
  {
    std::vector<std::jthread> pool;
    const std::size_t chunk = (n + threads - 1) / threads;
    for (unsigned w = 0; w < threads; ++w) {
      const std::size_t begin = std::min(n, w * chunk), end = std::min(n, begin + chunk);
      pool.emplace_back([&, w, begin, end] {
        try {
          work(begin, end);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

// sample_id,predicted_label,K_1..K_N (k-NN: K_<tap>_<j>).
inline std::string format_rank_csv(const std::vector<RankSequence>& seqs, std::size_t num_taps,
                                   std::size_t k = 1) {
  std::ostringstream out;
  out << "sample_id,predicted_label";
  for (std::size_t l = 1; l <= num_taps; ++l) {
    if (k == 1) {
      out << ",K_" << l;
    } else {
      for (std::size_t j = 1; j <= k; ++j) out << ",K_" << l << '_' << j;
    }
  }
  out << '\n';
  for (const RankSequence& s : seqs) {
    out << s.sample_id << ',' << s.predicted_label;
    for (double f : s.features()) out << ',' << static_cast<long long>(f);
    out << '\n';
  }
  return out.str();
}

}  // namespace toporank::topo
