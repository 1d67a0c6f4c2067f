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
#include <optional>
#include <string>
#include <vector>

#include "toporank/core_types.hpp"
#include "toporank/lab/adaptive_loss.hpp"
#include "toporank/lab/trigger.hpp"
#include "toporank/nn/network.hpp"

namespace toporank::lab {

// Probabilities of the clean, backdoor, laundry and cross tasks.
struct TaskRates {
  double clean = 0.0;
  double backdoor = 0.0;
  double laundry = 0.0;
  double cross = 0.0;

  // c/(c+2), 1/(c+2), and an even split of the last 1/(c+2).
  static TaskRates defaults(int num_classes) {
    const double d = num_classes + 2.0;
    return {num_classes / d, 1.0 / d, 0.5 / d, 0.5 / d};
  }

  void validate() const {
    require(clean >= 0 && backdoor >= 0 && laundry >= 0 && cross >= 0,
            ErrorCode::kInvalidArgument, "task rates must be nonnegative");
    const double sum = clean + backdoor + laundry + cross;
    require(std::abs(sum - 1.0) <= 1e-9, ErrorCode::kInvalidArgument,
            "task rates must sum to 1, got " + std::to_string(sum));
  }

  friend bool operator==(const TaskRates&, const TaskRates&) = default;
};

struct AdaptiveConfig {
  AdaptiveLossKind kind = AdaptiveLossKind::kL1;
  double weight = 1.0;          // lambda
  std::size_t k_shallow = 1;    // L3: match the output of the first k layers
  std::size_t exemplars = 16;   // clean target-class samples per iteration
};

struct GeneratorConfig {
  std::size_t hidden = 64;
  float epsilon = 0.2f;
};

struct BackdoorSpec {
  Label target = 0;
  std::optional<std::vector<Label>> victims;  // nullopt: source-agnostic (all classes)
  TriggerKind trigger = TriggerKind::kStaticPatch;
  StaticPatch patch;            // static trigger
  GeneratorConfig generator;    // dynamic trigger
  TaskRates rates;
  double poison_rate = 0.1;     // static recipes: |D_b| = |D_l| = round(rate * |D|)
  std::optional<AdaptiveConfig> adaptive;
  double substitution_ratio = 0.0;

  bool is_victim(Label y) const {
    if (!victims) return y != target;
    return std::find(victims->begin(), victims->end(), y) != victims->end();
  }

  void validate(int num_classes) const {
    require(target >= 0 && target < num_classes, ErrorCode::kOutOfRange, "target label out of range");
    if (victims) {
      require(!victims->empty(), ErrorCode::kInvalidArgument, "victim set must not be empty");
      for (Label v : *victims) {
        require(v >= 0 && v < num_classes, ErrorCode::kOutOfRange, "victim label out of range");
        require(v != target, ErrorCode::kInvalidArgument, "target must not be a victim class");
      }
    }
    require(poison_rate >= 0.0 && poison_rate <= 1.0, ErrorCode::kInvalidArgument,
            "poison rate must be in [0, 1]");
    require(substitution_ratio >= 0.0 && substitution_ratio <= 0.5, ErrorCode::kInvalidArgument,
            "substitution ratio must be in [0, 0.5]");
    if (trigger == TriggerKind::kDynamicGenerator) {
      rates.validate();  // task rates drive only the dynamic-trigger schedule
      require(generator.epsilon > 0.0f, ErrorCode::kInvalidArgument, "epsilon must be positive");
    }
    if (adaptive) {
      require(adaptive->weight >= 0.0, ErrorCode::kInvalidArgument, "lambda must be nonnegative");
      require(adaptive->exemplars >= 1, ErrorCode::kInvalidArgument, "need at least one exemplar");
    }
  }
};

struct TrainConfig {
  std::vector<nn::LayerSpec> architecture;
  std::size_t iterations = 1000;
  std::size_t batch_size = 32;
  float learning_rate = 0.01f;
  float momentum = 0.9f;
  std::uint64_t seed = 0;

  void validate() const {
    require(!architecture.empty(), ErrorCode::kInvalidArgument, "architecture is empty");
    require(batch_size > 0, ErrorCode::kInvalidArgument, "batch size must be positive");
    require(learning_rate > 0.0f, ErrorCode::kInvalidArgument, "learning rate must be positive");
  }
};

// Independent RNG streams derived from one seed (splitmix64 finalizer).
inline std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

namespace streams {
inline constexpr std::uint64_t kInit = 0;
inline constexpr std::uint64_t kBatches = 1;
inline constexpr std::uint64_t kGeneratorInit = 2;
inline constexpr std::uint64_t kPoison = 3;
inline constexpr std::uint64_t kExemplars = 4;
inline constexpr std::uint64_t kTasks = 5;
}  // namespace streams

}  // namespace toporank::lab
