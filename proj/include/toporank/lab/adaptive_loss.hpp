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

// Auxiliary losses an adaptive attacker adds to the backdoor objective so that
// poisoned activations look like clean target-class activations. Each takes
// activation matrices (rows = samples) and returns the loss together with its
// gradient w.r.t. every input matrix. Euclidean norms use a zero subgradient
// at the origin.

#pragma once

#include <cmath>
#include <limits>
#include <string>
#include <string_view>

#include "toporank/nn/network.hpp"

namespace toporank::lab {

enum class AdaptiveLossKind { kL1, kL2, kL3 };

inline std::string_view to_string(AdaptiveLossKind k) {
  switch (k) {
    case AdaptiveLossKind::kL1: return "L1";
    case AdaptiveLossKind::kL2: return "L2";
    case AdaptiveLossKind::kL3: return "L3";
  }
  return "L1";
}

inline AdaptiveLossKind parse_adaptive_loss(std::string_view s) {
  if (s == "L1") return AdaptiveLossKind::kL1;
  if (s == "L2") return AdaptiveLossKind::kL2;
  if (s == "L3") return AdaptiveLossKind::kL3;
  fail(ErrorCode::kInvalidArgument, "unknown adaptive loss '" + std::string(s) + "'");
}

template <typename T>
struct AuxLoss {
  T value = 0;
  nn::Matrix<T> grad_poisoned;
  nn::Matrix<T> grad_target;
  nn::Matrix<T> grad_other;  // L1 only
};

namespace detail {

// Adds d||a - b|| / da to ga and its negation to gb, scaled by `scale`.
template <typename T, typename RowA, typename RowB, typename GA, typename GB>
T norm_with_grad(const RowA& a, const RowB& b, T scale, GA&& ga, GB&& gb) {
  const auto diff = (a - b).eval();
  const T n = diff.norm();
  if (n > T(0)) {
    ga += (scale / n) * diff;
    gb -= (scale / n) * diff;
  }
  return n;
}

}  // namespace detail

// Large-margin term: mean over poisoned rows of
//   max(0, min_j ||p_i - t_j|| - min_k ||p_i - o_k||).
template <typename T>
AuxLoss<T> large_margin_loss(const nn::Matrix<T>& poisoned, const nn::Matrix<T>& target,
                             const nn::Matrix<T>& other) {
  require(poisoned.rows() > 0 && target.rows() > 0 && other.rows() > 0,
          ErrorCode::kInvalidArgument, "L1 needs poisoned, target and other activations");
  AuxLoss<T> out;
  out.grad_poisoned = nn::Matrix<T>::Zero(poisoned.rows(), poisoned.cols());
  out.grad_target = nn::Matrix<T>::Zero(target.rows(), target.cols());
  out.grad_other = nn::Matrix<T>::Zero(other.rows(), other.cols());
  const T inv = T(1) / static_cast<T>(poisoned.rows());
  for (Eigen::Index i = 0; i < poisoned.rows(); ++i) {
    Eigen::Index jt = 0, jo = 0;
    const T dt = (target.rowwise() - poisoned.row(i)).rowwise().norm().minCoeff(&jt);
    const T dn = (other.rowwise() - poisoned.row(i)).rowwise().norm().minCoeff(&jo);
    if (dt - dn <= T(0)) continue;
    out.value += inv * (dt - dn);
    detail::norm_with_grad(poisoned.row(i), target.row(jt), inv, out.grad_poisoned.row(i),
                           out.grad_target.row(jt));
    detail::norm_with_grad(poisoned.row(i), other.row(jo), -inv, out.grad_poisoned.row(i),
                           out.grad_other.row(jo));
  }
  return out;
}

// Centroid term: mean over poisoned rows of ||p_i - mean(target)||.
template <typename T>
AuxLoss<T> centroid_loss(const nn::Matrix<T>& poisoned, const nn::Matrix<T>& target) {
  require(poisoned.rows() > 0 && target.rows() > 0, ErrorCode::kInvalidArgument,
          "L2 needs poisoned and target activations");
  AuxLoss<T> out;
  out.grad_poisoned = nn::Matrix<T>::Zero(poisoned.rows(), poisoned.cols());
  const nn::RowVector<T> centroid = target.colwise().mean();
  nn::RowVector<T> grad_centroid = nn::RowVector<T>::Zero(target.cols());
  const T inv = T(1) / static_cast<T>(poisoned.rows());
  for (Eigen::Index i = 0; i < poisoned.rows(); ++i) {
    out.value += inv * detail::norm_with_grad(poisoned.row(i), centroid, inv,
                                              out.grad_poisoned.row(i), grad_centroid);
  }
  out.grad_target = grad_centroid.replicate(target.rows(), 1) / static_cast<T>(target.rows());
  return out;
}

// Shallow-layer matching term: mean over all (poisoned, target) pairs of
// ||p_i - t_j||, evaluated on the first k layers' output.
template <typename T>
AuxLoss<T> shallow_match_loss(const nn::Matrix<T>& poisoned, const nn::Matrix<T>& target) {
  require(poisoned.rows() > 0 && target.rows() > 0, ErrorCode::kInvalidArgument,
          "L3 needs poisoned and target activations");
  AuxLoss<T> out;
  out.grad_poisoned = nn::Matrix<T>::Zero(poisoned.rows(), poisoned.cols());
  out.grad_target = nn::Matrix<T>::Zero(target.rows(), target.cols());
  const T inv = T(1) / static_cast<T>(poisoned.rows() * target.rows());
  for (Eigen::Index i = 0; i < poisoned.rows(); ++i) {
    for (Eigen::Index j = 0; j < target.rows(); ++j) {
      out.value += inv * detail::norm_with_grad(poisoned.row(i), target.row(j), inv,
                                                out.grad_poisoned.row(i), out.grad_target.row(j));
    }
  }
  return out;
}

}  // namespace toporank::lab
