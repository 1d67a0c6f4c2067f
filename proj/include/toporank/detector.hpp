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

// PCA outlier model over rank features.
//
// Features are standardized per dimension, the sample covariance of the
// standardized training set is eigendecomposed, and a vector z scores
//
//   s(z) = sum_i <w_i, z>^2 / lambda_i
//
// over components with lambda_i > kEigenFloor. A feature is malicious when
// s > tau. tau is either the training-score quantile at reject rate alpha or
// mean + multiplier * stddev of the training scores.
//
// Checkpoint ("TEDD"): JSON header, then binary64 LE payload
//   mu[d] sigma[d] W[p x d] lambda[p] tau score_mean score_std

#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "toporank/container.hpp"
#include "toporank/core_types.hpp"
#include "toporank/error.hpp"

namespace toporank {

enum class ThresholdMode { kQuantile, kZScore };

inline std::string_view to_string(ThresholdMode m) {
  return m == ThresholdMode::kQuantile ? "quantile" : "zscore";
}

inline ThresholdMode parse_threshold_mode(std::string_view s) {
  if (s == "quantile") return ThresholdMode::kQuantile;
  if (s == "zscore") return ThresholdMode::kZScore;
  fail(ErrorCode::kInvalidArgument, "unknown threshold mode '" + std::string(s) + "'");
}

struct DetectorOptions {
  double alpha = 0.05;
  ThresholdMode mode = ThresholdMode::kQuantile;
  double zscore_multiplier = 4.0;

  void validate() const {
    require(alpha > 0.0 && alpha < 0.5, ErrorCode::kInvalidArgument,
            "alpha must be in (0, 0.5), got " + std::to_string(alpha));
    require(std::isfinite(zscore_multiplier) && zscore_multiplier > 0.0,
            ErrorCode::kInvalidArgument, "z-score multiplier must be positive");
  }
};

struct Verdict {
  double score = 0.0;
  bool malicious = false;
};

// Smallest training score s such that the fraction of scores strictly above
// s is at most alpha.
inline double quantile_threshold(std::vector<double> scores, double alpha) {
  require(!scores.empty(), ErrorCode::kInvalidArgument, "no scores");
  std::sort(scores.begin(), scores.end());
  const double n = static_cast<double>(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const auto above = static_cast<double>(
        scores.end() - std::upper_bound(scores.begin(), scores.end(), scores[i]));
    if (above / n <= alpha) return scores[i];
  }
  return scores.back();
}

class PcaDetector {
 public:
  static constexpr double kEigenFloor = 1e-10;

  PcaDetector() = default;

  static PcaDetector fit(std::span<const std::vector<double>> features,
                         const DetectorOptions& opts = {}) {
    opts.validate();
    require(features.size() >= 2, ErrorCode::kInvalidArgument,
            "need at least 2 training features, got " + std::to_string(features.size()));
    const std::size_t d = features.front().size();
    require(d > 0, ErrorCode::kInvalidArgument, "features are empty");
    const auto n = static_cast<Eigen::Index>(features.size());
    Eigen::MatrixXd x(n, static_cast<Eigen::Index>(d));
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto& f = features[static_cast<std::size_t>(i)];
      require(f.size() == d, ErrorCode::kDimMismatch, "training features differ in length");
      for (std::size_t j = 0; j < d; ++j) {
        require(std::isfinite(f[j]), ErrorCode::kNonFinite, "non-finite training feature");
        x(i, static_cast<Eigen::Index>(j)) = f[j];
      }
    }
    bool degenerate = true;
    for (Eigen::Index i = 1; i < n && degenerate; ++i) degenerate = x.row(i) == x.row(0);
    require(!degenerate, ErrorCode::kDegenerateInput, "all training features are identical");

    PcaDetector det;
    det.opts_ = opts;
    det.mean_ = x.colwise().mean().transpose();
    const Eigen::MatrixXd centered = x.rowwise() - det.mean_.transpose();
    det.stddev_ = (centered.colwise().squaredNorm() / static_cast<double>(n - 1)).cwiseSqrt().transpose();
    for (Eigen::Index j = 0; j < det.stddev_.size(); ++j) {
      if (det.stddev_(j) == 0.0) det.stddev_(j) = 1.0;
    }
    const Eigen::MatrixXd z = centered.array().rowwise() / det.stddev_.transpose().array();
    const Eigen::MatrixXd cov = (z.transpose() * z) / static_cast<double>(n - 1);

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
    require(eig.info() == Eigen::Success, ErrorCode::kDegenerateInput,
            "covariance eigendecomposition failed");
    // Eigen returns ascending eigenvalues; keep the large ones, descending.
    std::vector<Eigen::Index> keep;
    for (Eigen::Index i = eig.eigenvalues().size() - 1; i >= 0; --i) {
      if (eig.eigenvalues()(i) > kEigenFloor) keep.push_back(i);
    }
    require(!keep.empty(), ErrorCode::kDegenerateInput, "no component above the eigenvalue floor");
    const auto p = static_cast<Eigen::Index>(keep.size());
    det.axes_.resize(p, static_cast<Eigen::Index>(d));
    det.eigenvalues_.resize(p);
    for (Eigen::Index r = 0; r < p; ++r) {
      det.axes_.row(r) = eig.eigenvectors().col(keep[static_cast<std::size_t>(r)]).transpose();
      det.eigenvalues_(r) = eig.eigenvalues()(keep[static_cast<std::size_t>(r)]);
    }

    std::vector<double> scores(features.size());
    for (std::size_t i = 0; i < features.size(); ++i) scores[i] = det.score(features[i]);
    double mean = 0.0;
    for (double s : scores) mean += s;
    mean /= static_cast<double>(scores.size());
    double var = 0.0;
    for (double s : scores) var += (s - mean) * (s - mean);
    det.score_mean_ = mean;
    det.score_std_ = std::sqrt(var / static_cast<double>(scores.size() - 1));
    det.tau_ = opts.mode == ThresholdMode::kQuantile
                   ? quantile_threshold(std::move(scores), opts.alpha)
                   : det.score_mean_ + opts.zscore_multiplier * det.score_std_;
    require(std::isfinite(det.tau_), ErrorCode::kNonFinite, "threshold is not finite");
    return det;
  }

  static PcaDetector fit(std::span<const RankSequence> seqs, const DetectorOptions& opts = {}) {
    std::vector<std::vector<double>> f;
    f.reserve(seqs.size());
    for (const auto& s : seqs) f.push_back(s.features());
    return fit(f, opts);
  }

  double score(std::span<const double> feature) const {
    require(feature.size() == dim(), ErrorCode::kDimMismatch,
            "feature has dim " + std::to_string(feature.size()) + ", detector expects " +
                std::to_string(dim()));
    Eigen::VectorXd z(mean_.size());
    for (Eigen::Index j = 0; j < z.size(); ++j) {
      z(j) = (feature[static_cast<std::size_t>(j)] - mean_(j)) / stddev_(j);
    }
    const Eigen::VectorXd proj = axes_ * z;
    return (proj.array().square() / eigenvalues_.array()).sum();
  }

  double score(const RankSequence& seq) const {
    const auto f = seq.features();
    return score(std::span<const double>(f));
  }

  Verdict classify(const RankSequence& seq) const {
    const double s = score(seq);
    return {s, s > tau_};
  }

  std::vector<Verdict> detect(std::span<const RankSequence> seqs) const {
    std::vector<Verdict> out;
    out.reserve(seqs.size());
    for (const auto& s : seqs) out.push_back(classify(s));
    return out;
  }

  std::size_t dim() const { return static_cast<std::size_t>(mean_.size()); }
  std::size_t components() const { return static_cast<std::size_t>(eigenvalues_.size()); }
  double threshold() const { return tau_; }
  const DetectorOptions& options() const { return opts_; }
  const Eigen::VectorXd& mean() const { return mean_; }
  const Eigen::VectorXd& stddev() const { return stddev_; }
  const Eigen::MatrixXd& axes() const { return axes_; }  // one component per row
  const Eigen::VectorXd& eigenvalues() const { return eigenvalues_; }
  double training_score_mean() const { return score_mean_; }
  double training_score_std() const { return score_std_; }

  // Replaces tau while keeping the fitted model (e.g. to sweep thresholds).
  void set_threshold(double tau) {
    require(std::isfinite(tau), ErrorCode::kNonFinite, "threshold is not finite");
    tau_ = tau;
  }

  std::vector<std::uint8_t> encode() const;
  static PcaDetector decode(std::span<const std::uint8_t> bytes);

  void save(const std::string& path) const { io::write_file(path, encode()); }
  static PcaDetector load(const std::string& path) { return decode(io::read_file(path)); }

  friend bool operator==(const PcaDetector& a, const PcaDetector& b) {
    return a.opts_.alpha == b.opts_.alpha && a.opts_.mode == b.opts_.mode &&
           a.opts_.zscore_multiplier == b.opts_.zscore_multiplier && a.mean_ == b.mean_ &&
           a.stddev_ == b.stddev_ && a.axes_ == b.axes_ && a.eigenvalues_ == b.eigenvalues_ &&
           a.tau_ == b.tau_ && a.score_mean_ == b.score_mean_ && a.score_std_ == b.score_std_;
  }

 private:
  DetectorOptions opts_;
  Eigen::VectorXd mean_;
  Eigen::VectorXd stddev_;
  Eigen::MatrixXd axes_;
  Eigen::VectorXd eigenvalues_;
  double tau_ = 0.0;
  double score_mean_ = 0.0;
  double score_std_ = 0.0;
};

inline constexpr std::string_view kDetectorMagic = "TEDD";
inline constexpr std::uint32_t kDetectorVersion = 1;

inline std::vector<std::uint8_t> PcaDetector::encode() const {
  io::Json header = {{"dim", dim()},
                     {"components", components()},
                     {"alpha", opts_.alpha},
                     {"threshold_mode", to_string(opts_.mode)},
                     {"zscore_multiplier", opts_.zscore_multiplier}};
  std::vector<std::uint8_t> payload;
  auto put = [&](const auto& m) {
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index c = 0; c < m.cols(); ++c) io::put_le<double>(payload, m(r, c));
    }
  };
  put(mean_);
  put(stddev_);
  put(axes_);
  put(eigenvalues_);
  io::put_le<double>(payload, tau_);
  io::put_le<double>(payload, score_mean_);
  io::put_le<double>(payload, score_std_);
  return io::frame(kDetectorMagic, kDetectorVersion, header, payload);
}

inline PcaDetector PcaDetector::decode(std::span<const std::uint8_t> bytes) {
  const auto file = io::unframe(bytes, kDetectorMagic, kDetectorVersion);
  PcaDetector det;
  std::uint64_t d = 0, p = 0;
  io::with_header_errors([&] {
    d = file.header.at("dim").get<std::uint64_t>();
    p = file.header.at("components").get<std::uint64_t>();
    det.opts_.alpha = file.header.at("alpha").get<double>();
    det.opts_.zscore_multiplier = file.header.at("zscore_multiplier").get<double>();
    try {
      det.opts_.mode = parse_threshold_mode(file.header.at("threshold_mode").get<std::string>());
      det.opts_.validate();
    } catch (const Error& e) {
      fail(ErrorCode::kMalformedHeader, e.what());
    }
  });
  require(d > 0 && p > 0 && p <= d, ErrorCode::kMalformedHeader, "bad detector dimensions");
  const std::uint64_t count =
      io::checked_add(io::checked_mul(d, io::checked_add(p, 2)), io::checked_add(p, 3));
  io::require_payload_size(file.payload, io::checked_mul(count, 8));
  const std::uint8_t* cursor = file.payload.data();
  auto get = [&](auto& m) {
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index c = 0; c < m.cols(); ++c, cursor += 8) m(r, c) = io::get_le<double>(cursor);
    }
  };
  const auto di = static_cast<Eigen::Index>(d), pi = static_cast<Eigen::Index>(p);
  det.mean_.resize(di);
  det.stddev_.resize(di);
  det.axes_.resize(pi, di);
  det.eigenvalues_.resize(pi);
  get(det.mean_);
  get(det.stddev_);
  get(det.axes_);
  get(det.eigenvalues_);
  det.tau_ = io::get_le<double>(cursor);
  det.score_mean_ = io::get_le<double>(cursor + 8);
  det.score_std_ = io::get_le<double>(cursor + 16);
  return det;
}

}  // namespace toporank
