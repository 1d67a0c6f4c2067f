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
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "toporank/nn/network.hpp"

namespace toporank::lab {

using nn::Matrix;

// Overwrites the masked coordinates of an input with fixed values.
struct StaticPatch {
  std::vector<std::size_t> indices;
  std::vector<float> values;

  // A size x size square of `value` with its top-left corner at (row, col)
  // of a single-channel height x width image.
  static StaticPatch square(std::size_t height, std::size_t width, std::size_t row,
                            std::size_t col, std::size_t size, float value) {
    require(row + size <= height && col + size <= width, ErrorCode::kInvalidArgument,
            "patch does not fit inside the image");
    StaticPatch p;
    for (std::size_t r = row; r < row + size; ++r) {
      for (std::size_t c = col; c < col + size; ++c) {
        p.indices.push_back(r * width + c);
        p.values.push_back(value);
      }
    }
    return p;
  }

  void check_fits(std::size_t dim) const {
    require(indices.size() == values.size(), ErrorCode::kInvalidArgument,
            "patch indices and values differ in length");
    for (std::size_t i : indices) {
      require(i < dim, ErrorCode::kDimMismatch, "patch index outside the input");
    }
  }

  template <typename T>
  void apply(std::span<T> x) const {
    for (std::size_t i = 0; i < indices.size(); ++i) x[indices[i]] = static_cast<T>(values[i]);
  }

  friend bool operator==(const StaticPatch&, const StaticPatch&) = default;
};

// Dense encoder-decoder g(x) = epsilon * tanh(decoder(relu(encoder(x)))),
// so every output coordinate lies in [-epsilon, epsilon].
template <typename T>
struct GeneratorNet {
  nn::Network<T> net;
  T epsilon = T(0.2);

  static GeneratorNet make(std::size_t input_dim, std::size_t hidden, T epsilon,
                           std::uint64_t seed) {
    require(epsilon > 0, ErrorCode::kInvalidArgument, "perturbation budget must be positive");
    GeneratorNet g;
    g.net = nn::Network<T>::initialized(
        {nn::LayerSpec::dense(input_dim, hidden, true), nn::LayerSpec::dense(hidden, input_dim, false)},
        seed);
    g.epsilon = epsilon;
    return g;
  }

  template <typename U>
  GeneratorNet<U> cast() const {
    return {net.template cast<U>(), static_cast<U>(epsilon)};
  }

  struct Pass {
    nn::ForwardCache<T> cache;
    Matrix<T> squashed;      // tanh(pre), needed for backward
    Matrix<T> perturbation;  // epsilon * squashed
  };

  Pass forward(const Matrix<T>& source) const {
    Pass p;
    p.cache = net.forward(source);
    p.squashed = p.cache.logits().array().tanh().matrix();
    p.perturbation = p.squashed * epsilon;
    return p;
  }

  Matrix<T> perturb(const Matrix<T>& source) const { return forward(source).perturbation; }

  nn::Gradients<T> backward(const Pass& pass, const Matrix<T>& grad_perturbation) const {
    const Matrix<T> grad_pre =
        (grad_perturbation.array() * epsilon * (T(1) - pass.squashed.array().square())).matrix();
    return net.backward(pass.cache, grad_pre);
  }
};

// x (+) g: clip(x + perturbation, lo, hi), with the pass-through mask for
// backpropagation (1 where the sum was strictly inside the range).
template <typename T>
struct Composite {
  Matrix<T> output;
  Matrix<T> pass_mask;
};

template <typename T>
Composite<T> compose(const Matrix<T>& x, const Matrix<T>& perturbation, T lo, T hi) {
  require(x.rows() == perturbation.rows() && x.cols() == perturbation.cols(),
          ErrorCode::kDimMismatch, "perturbation shape differs from input");
  Composite<T> c;
  const Matrix<T> sum = x + perturbation;
  c.output = sum.cwiseMax(lo).cwiseMin(hi);
  c.pass_mask = ((sum.array() > lo) && (sum.array() < hi)).template cast<T>().matrix();
  return c;
}

enum class TriggerKind { kStaticPatch, kDynamicGenerator };

struct TriggerSpec {
  TriggerKind kind = TriggerKind::kStaticPatch;
  StaticPatch patch;
  std::shared_ptr<const GeneratorNet<float>> generator;
  float lo = 0.0f;  // valid input range for clipping
  float hi = 1.0f;

  static TriggerSpec static_patch(StaticPatch p) {
    TriggerSpec s;
    s.kind = TriggerKind::kStaticPatch;
    s.patch = std::move(p);
    return s;
  }

  static TriggerSpec dynamic(std::shared_ptr<const GeneratorNet<float>> g) {
    require(g != nullptr, ErrorCode::kInvalidArgument, "dynamic trigger needs a generator");
    TriggerSpec s;
    s.kind = TriggerKind::kDynamicGenerator;
    s.generator = std::move(g);
    return s;
  }

  float epsilon() const { return generator ? generator->epsilon : 0.0f; }
};

// Static: overwrite the masked region with the patch. Dynamic: clip(x + g(src))
// where src is the donor when given (cross trigger) and x otherwise.
inline std::vector<float> apply_trigger(std::span<const float> x, const TriggerSpec& spec,
                                        std::optional<std::span<const float>> donor = std::nullopt) {
  std::vector<float> out(x.begin(), x.end());
  if (spec.kind == TriggerKind::kStaticPatch) {
    spec.patch.check_fits(x.size());
    spec.patch.apply(std::span<float>(out));
    return out;
  }
  require(spec.generator != nullptr, ErrorCode::kInvalidArgument, "dynamic trigger lacks generator");
  require(spec.generator->net.input_dim() == x.size(), ErrorCode::kDimMismatch,
          "generator input dim differs from sample dim");
  const std::span<const float> src = donor ? *donor : x;
  require(src.size() == x.size(), ErrorCode::kDimMismatch, "donor dim differs from sample dim");
  Matrix<float> in(1, static_cast<Eigen::Index>(src.size()));
  for (std::size_t j = 0; j < src.size(); ++j) in(0, static_cast<Eigen::Index>(j)) = src[j];
  const Matrix<float> p = spec.generator->perturb(in);
  for (std::size_t j = 0; j < out.size(); ++j) {
    out[j] = std::clamp(out[j] + p(0, static_cast<Eigen::Index>(j)), spec.lo, spec.hi);
  }
  return out;
}

// Batched form over row-major inputs; `donors` (same shape) selects cross triggers.
inline Matrix<float> apply_trigger_batch(const Matrix<float>& x, const TriggerSpec& spec,
                                         const Matrix<float>* donors = nullptr) {
  if (spec.kind == TriggerKind::kStaticPatch) {
    spec.patch.check_fits(static_cast<std::size_t>(x.cols()));
    Matrix<float> out = x;
    for (Eigen::Index i = 0; i < out.rows(); ++i) {
      spec.patch.apply(std::span<float>(out.row(i).data(), static_cast<std::size_t>(out.cols())));
    }
    return out;
  }
  require(spec.generator != nullptr, ErrorCode::kInvalidArgument, "dynamic trigger lacks generator");
  const Matrix<float>& src = donors ? *donors : x;
  return compose<float>(x, spec.generator->perturb(src), spec.lo, spec.hi).output;
}

}  // namespace toporank::lab
