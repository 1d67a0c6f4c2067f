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
#include <span>
#include <vector>

#include "toporank/core_types.hpp"
#include "toporank/dataset.hpp"
#include "toporank/nn/network.hpp"

namespace toporank::lab {

inline constexpr std::size_t kEmitChunk = 256;

// Runs every input through `net` and records each layer's output as a tap.
// predicted_label is the argmax of the final layer.
inline ActivationTrace emit_trace(const nn::Network<float>& net, const Dataset& inputs,
                                  std::span<const SampleKind> kinds) {
  require(inputs.dim == net.input_dim(), ErrorCode::kDimMismatch,
          "inputs have dim " + std::to_string(inputs.dim) + ", network expects " +
              std::to_string(net.input_dim()));
  require(kinds.size() == inputs.size() || kinds.size() == 1, ErrorCode::kDimMismatch,
          "need one sample kind per input (or a single kind for all)");
  ActivationTrace trace;
  trace.label_space = LabelSpace(static_cast<int>(net.output_dim()));
  trace.taps = net.taps();
  trace.samples.reserve(inputs.size());
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < inputs.size(); start += kEmitChunk) {
    const std::size_t end = std::min(inputs.size(), start + kEmitChunk);
    idx.resize(end - start);
    for (std::size_t i = start; i < end; ++i) idx[i - start] = i;
    const auto x = nn::gather_rows<float>(inputs.dim, idx, [&](std::size_t i) { return inputs.row(i); });
    const auto cache = net.forward(x);
    for (std::size_t i = start; i < end; ++i) {
      const auto r = static_cast<Eigen::Index>(i - start);
      TraceSample s;
      s.sample_id = inputs.ids[i];
      s.true_label = inputs.labels[i];
      s.kind = kinds.size() == 1 ? kinds[0] : kinds[i];
      Eigen::Index arg;
      cache.logits().row(r).maxCoeff(&arg);
      s.predicted_label = static_cast<Label>(arg);
      s.activations.reserve(net.num_layers());
      for (std::size_t l = 1; l < cache.outputs.size(); ++l) {
        const auto row = cache.outputs[l].row(r);
        s.activations.emplace_back(row.data(), row.data() + row.size());
      }
      trace.samples.push_back(std::move(s));
    }
  }
  return trace;
}

inline std::vector<Label> predict(const nn::Network<float>& net, const Dataset& inputs) {
  std::vector<Label> out;
  out.reserve(inputs.size());
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < inputs.size(); start += kEmitChunk) {
    const std::size_t end = std::min(inputs.size(), start + kEmitChunk);
    idx.resize(end - start);
    for (std::size_t i = start; i < end; ++i) idx[i - start] = i;
    const auto p = net.predict(
        nn::gather_rows<float>(inputs.dim, idx, [&](std::size_t i) { return inputs.row(i); }));
    out.insert(out.end(), p.begin(), p.end());
  }
  return out;
}

}  // namespace toporank::lab
