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

// Attack and detection metrics.
//
// Accuracy per sample kind: VT counts predictions equal to the target label,
// every other kind counts predictions equal to the true label. Detection
// treats VT as positive and NoT/NVT as negative; CT and unknown samples are
// ignored. Metrics over an empty bucket are left unset rather than zeroed.

#pragma once

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "toporank/container.hpp"
#include "toporank/core_types.hpp"
#include "toporank/error.hpp"

namespace toporank {

struct KindCount {
  std::size_t total = 0;
  std::size_t hits = 0;

  std::optional<double> rate() const {
    if (total == 0) return std::nullopt;
    return static_cast<double>(hits) / static_cast<double>(total);
  }
};

struct ClassificationMetrics {
  KindCount no_trigger, victim_triggered, non_victim_triggered, cross_triggered;

  std::optional<double> acc_not() const { return no_trigger.rate(); }
  std::optional<double> acc_vt() const { return victim_triggered.rate(); }
  std::optional<double> acc_nvt() const { return non_victim_triggered.rate(); }
  std::optional<double> acc_ct() const { return cross_triggered.rate(); }
};

inline ClassificationMetrics classification_metrics(std::span<const SampleKind> kinds,
                                                    std::span<const Label> true_labels,
                                                    std::span<const Label> predicted,
                                                    Label target) {
  require(kinds.size() == true_labels.size() && kinds.size() == predicted.size(),
          ErrorCode::kDimMismatch, "kinds, labels and predictions differ in length");
  ClassificationMetrics m;
  for (std::size_t i = 0; i < kinds.size(); ++i) {
    KindCount* bucket = nullptr;
    Label expected = true_labels[i];
    switch (kinds[i]) {
      case SampleKind::kNoT: bucket = &m.no_trigger; break;
      case SampleKind::kVT: bucket = &m.victim_triggered; expected = target; break;
      case SampleKind::kNVT: bucket = &m.non_victim_triggered; break;
      case SampleKind::kCT: bucket = &m.cross_triggered; break;
      case SampleKind::kUnknown: break;
    }
    if (!bucket) continue;
    ++bucket->total;
    if (predicted[i] == expected) ++bucket->hits;
  }
  return m;
}

// Area under the ROC curve as the Mann-Whitney statistic: the probability
// that a random positive outscores a random negative, ties counted half.
inline double roc_auc(std::span<const double> positive, std::span<const double> negative) {
  require(!positive.empty() && !negative.empty(), ErrorCode::kUndefinedMetric,
          "AUC needs both positive and negative scores");
  struct Item {
    double score;
    bool positive;
  };
  std::vector<Item> all;
  all.reserve(positive.size() + negative.size());
  for (double s : positive) all.push_back({s, true});
  for (double s : negative) all.push_back({s, false});
  for (const Item& it : all) {
    require(!std::isnan(it.score), ErrorCode::kNonFinite, "NaN score");
  }
  std::sort(all.begin(), all.end(), [](const Item& a, const Item& b) { return a.score < b.score; });
  // Sum of midranks of the positives.
  double rank_sum = 0.0;
  for (std::size_t i = 0; i < all.size();) {
    std::size_t j = i;
    std::size_t pos_in_group = 0;
    while (j < all.size() && all[j].score == all[i].score) pos_in_group += all[j++].positive;
    const double midrank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    rank_sum += midrank * static_cast<double>(pos_in_group);
    i = j;
  }
  const double np = static_cast<double>(positive.size());
  const double nn = static_cast<double>(negative.size());
  return (rank_sum - np * (np + 1.0) / 2.0) / (np * nn);
}

struct RocPoint {
  double threshold;  // flag when score >= threshold
  double fpr;
  double tpr;
};

// One point per distinct score, thresholds descending, starting at (0, 0).
inline std::vector<RocPoint> roc_curve(std::span<const double> positive,
                                       std::span<const double> negative) {
  require(!positive.empty() && !negative.empty(), ErrorCode::kUndefinedMetric,
          "ROC needs both positive and negative scores");
  std::vector<std::pair<double, bool>> all;
  for (double s : positive) all.emplace_back(s, true);
  for (double s : negative) all.emplace_back(s, false);
  std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  std::vector<RocPoint> out{{std::numeric_limits<double>::infinity(), 0.0, 0.0}};
  std::size_t tp = 0, fp = 0;
  for (std::size_t i = 0; i < all.size();) {
    const double t = all[i].first;
    while (i < all.size() && all[i].first == t) (all[i++].second ? tp : fp)++;
    out.push_back({t, static_cast<double>(fp) / static_cast<double>(negative.size()),
                   static_cast<double>(tp) / static_cast<double>(positive.size())});
  }
  return out;
}

inline std::string format_roc_csv(std::span<const RocPoint> points) {
  std::ostringstream out;
  out << "threshold,fpr,tpr\n" << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (const RocPoint& p : points) out << p.threshold << ',' << p.fpr << ',' << p.tpr << '\n';
  return out.str();
}

struct DetectionMetrics {
  std::size_t positives = 0;  // VT
  std::size_t negatives_not = 0;
  std::size_t negatives_nvt = 0;
  std::size_t true_positives = 0;
  std::size_t false_positives_not = 0;
  std::size_t false_positives_nvt = 0;
  std::optional<double> auc;
  std::vector<RocPoint> roc;

  std::size_t negatives() const { return negatives_not + negatives_nvt; }
  std::size_t false_positives() const { return false_positives_not + false_positives_nvt; }

  std::optional<double> tpr() const { return ratio(true_positives, positives); }
  std::optional<double> fpr() const { return ratio(false_positives(), negatives()); }
  std::optional<double> fpr_not() const { return ratio(false_positives_not, negatives_not); }
  std::optional<double> fpr_nvt() const { return ratio(false_positives_nvt, negatives_nvt); }
  std::optional<double> precision() const {
    return ratio(true_positives, true_positives + false_positives());
  }
  std::optional<double> accuracy() const {
    return ratio(true_positives + negatives() - false_positives(), positives + negatives());
  }

 private:
  static std::optional<double> ratio(std::size_t a, std::size_t b) {
    if (b == 0) return std::nullopt;
    return static_cast<double>(a) / static_cast<double>(b);
  }
};

// A sample is flagged when score > tau. AUC and ROC are filled only when
// both positives and negatives are present.
inline DetectionMetrics detection_metrics(std::span<const double> scores,
                                          std::span<const SampleKind> kinds, double tau) {
  require(scores.size() == kinds.size(), ErrorCode::kDimMismatch,
          "scores and kinds differ in length");
  DetectionMetrics m;
  std::vector<double> pos, neg;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const bool flagged = scores[i] > tau;
    switch (kinds[i]) {
      case SampleKind::kVT:
        ++m.positives;
        m.true_positives += flagged;
        pos.push_back(scores[i]);
        break;
      case SampleKind::kNoT:
        ++m.negatives_not;
        m.false_positives_not += flagged;
        neg.push_back(scores[i]);
        break;
      case SampleKind::kNVT:
        ++m.negatives_nvt;
        m.false_positives_nvt += flagged;
        neg.push_back(scores[i]);
        break;
      default: break;
    }
  }
  if (!pos.empty() && !neg.empty()) {
    m.auc = roc_auc(pos, neg);
    m.roc = roc_curve(pos, neg);
  }
  return m;
}

namespace detail {
inline io::Json opt(const std::optional<double>& v) { return v ? io::Json(*v) : io::Json(nullptr); }
}  // namespace detail

inline io::Json to_json(const ClassificationMetrics& m) {
  auto bucket = [](const KindCount& k) {
    return io::Json{{"total", k.total}, {"hits", k.hits}, {"rate", detail::opt(k.rate())}};
  };
  return {{"acc_not", detail::opt(m.acc_not())}, {"acc_vt", detail::opt(m.acc_vt())},
          {"acc_nvt", detail::opt(m.acc_nvt())}, {"acc_ct", detail::opt(m.acc_ct())},
          {"counts",
           {{"NoT", bucket(m.no_trigger)},
            {"VT", bucket(m.victim_triggered)},
            {"NVT", bucket(m.non_victim_triggered)},
            {"CT", bucket(m.cross_triggered)}}}};
}

inline io::Json to_json(const DetectionMetrics& m) {
  return {{"tpr", detail::opt(m.tpr())},
          {"fpr", detail::opt(m.fpr())},
          {"fpr_not", detail::opt(m.fpr_not())},
          {"fpr_nvt", detail::opt(m.fpr_nvt())},
          {"precision", detail::opt(m.precision())},
          {"accuracy", detail::opt(m.accuracy())},
          {"auc", detail::opt(m.auc)},
          {"counts",
           {{"positives", m.positives},
            {"negatives_not", m.negatives_not},
            {"negatives_nvt", m.negatives_nvt},
            {"true_positives", m.true_positives},
            {"false_positives_not", m.false_positives_not},
            {"false_positives_nvt", m.false_positives_nvt}}}};
}

}  // namespace toporank
