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
#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "toporank/dataset.hpp"
#include "toporank/lab/adaptive_loss.hpp"
#include "toporank/lab/backdoor.hpp"
#include "toporank/lab/trigger.hpp"
#include "toporank/nn/network.hpp"

namespace toporank::lab {

using Net = nn::Network<float>;

struct TrainResult {
  Net net;
  std::vector<float> loss_history;
};

struct SsdtResult {
  Net net;
  GeneratorNet<float> generator;
  std::vector<float> loss_history;
  std::array<std::size_t, 4> task_counts{};  // clean, backdoor, laundry, cross
};

namespace detail {

inline nn::Matrix<float> batch_of(const Dataset& data, std::span<const std::size_t> idx) {
  return nn::gather_rows<float>(data.dim, idx, [&](std::size_t i) { return data.row(i); });
}

inline std::vector<Label> labels_of(const Dataset& data, std::span<const std::size_t> idx) {
  std::vector<Label> out;
  out.reserve(idx.size());
  for (std::size_t i : idx) out.push_back(data.labels[i]);
  return out;
}

inline std::vector<std::size_t> draw(std::mt19937_64& rng, std::span<const std::size_t> pool,
                                     std::size_t n) {
  std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
  std::vector<std::size_t> out(n);
  for (auto& i : out) i = pool[pick(rng)];
  return out;
}

inline std::vector<std::size_t> iota(std::size_t n) {
  std::vector<std::size_t> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = i;
  return v;
}

inline void check_progress(float loss, const Net& net, std::size_t iteration) {
  require(std::isfinite(loss), ErrorCode::kDivergence,
          "non-finite loss at iteration " + std::to_string(iteration));
  require(net.parameters_finite(), ErrorCode::kDivergence,
          "non-finite parameters after iteration " + std::to_string(iteration));
}

inline void check_dataset(const Dataset& data, const TrainConfig& cfg) {
  cfg.validate();
  require(data.size() > 0, ErrorCode::kInvalidArgument, "training set is empty");
  require(data.dim == cfg.architecture.front().in_dim(), ErrorCode::kDimMismatch,
          "dataset dim differs from network input");
  require(static_cast<std::size_t>(data.num_classes) == cfg.architecture.back().out_dim(),
          ErrorCode::kDimMismatch, "network output count differs from class count");
}

// Triggered victim samples relabeled as the target (D_b) and triggered
// non-victim samples keeping their labels (D_l), each round(rate * |D|) long.
// D_b cycles through the victim pool when it is smaller than requested.
struct PoisonSets {
  Dataset backdoor;
  Dataset laundry;
};

inline PoisonSets build_poison_sets(const Dataset& data, const BackdoorSpec& bd,
                                    std::uint64_t seed) {
  PoisonSets out{data.empty_like(), data.empty_like()};
  const auto n = static_cast<std::size_t>(std::llround(bd.poison_rate * static_cast<double>(data.size())));
  if (n == 0) return out;
  std::vector<std::size_t> victims, others;
  for (std::size_t i = 0; i < data.size(); ++i) {
    (bd.is_victim(data.labels[i]) ? victims : others).push_back(i);
  }
  require(!victims.empty(), ErrorCode::kEmptyPartition, "no victim-class samples in training set");
  require(!others.empty(), ErrorCode::kEmptyPartition, "no non-victim samples in training set");
  std::mt19937_64 rng(stream_seed(seed, streams::kPoison));
  std::shuffle(victims.begin(), victims.end(), rng);
  std::shuffle(others.begin(), others.end(), rng);
  std::vector<float> x(data.dim);
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t i = victims[k % victims.size()];
    std::copy(data.row(i).begin(), data.row(i).end(), x.begin());
    bd.patch.apply(std::span<float>(x));
    out.backdoor.push_back(x, bd.target, data.ids[i]);
  }
  for (std::size_t k = 0; k < std::min(n, others.size()); ++k) {
    const std::size_t i = others[k];
    std::copy(data.row(i).begin(), data.row(i).end(), x.begin());
    bd.patch.apply(std::span<float>(x));
    out.laundry.push_back(x, data.labels[i], data.ids[i]);
  }
  return out;
}

inline Dataset concat(const Dataset& a, const Dataset& b) {
  Dataset out = a;
  out.features.insert(out.features.end(), b.features.begin(), b.features.end());
  out.labels.insert(out.labels.end(), b.labels.begin(), b.labels.end());
  out.ids.insert(out.ids.end(), b.ids.begin(), b.ids.end());
  return out;
}

// Core supervised loop over `data`. When `adaptive` is set, the auxiliary
// loss is added for rows in [poison_begin, poison_end) against clean
// exemplars of the target class drawn from `clean`.
inline TrainResult supervised_loop(const Dataset& data, const TrainConfig& cfg,
                                   const BackdoorSpec* bd = nullptr, const Dataset* clean = nullptr,
                                   std::size_t poison_begin = 0, std::size_t poison_end = 0) {
  TrainResult result{Net::initialized(cfg.architecture, stream_seed(cfg.seed, streams::kInit)), {}};
  Net& net = result.net;
  nn::SgdMomentum<float> opt(net.parameter_blocks(), cfg.learning_rate, cfg.momentum);
  std::mt19937_64 rng(stream_seed(cfg.seed, streams::kBatches));
  std::mt19937_64 exemplar_rng(stream_seed(cfg.seed, streams::kExemplars));
  const std::vector<std::size_t> all = iota(data.size());

  const bool use_aux = bd && bd->adaptive && bd->adaptive->weight != 0.0;
  std::vector<std::size_t> target_pool;
  if (use_aux) {
    target_pool = clean->indices_of(bd->target);
    require(!target_pool.empty(), ErrorCode::kEmptyPartition, "no clean target-class samples");
    const std::size_t depth = bd->adaptive->kind == AdaptiveLossKind::kL3
                                  ? bd->adaptive->k_shallow
                                  : net.num_layers() - 1;
    require(depth >= 1 && depth < net.num_layers(), ErrorCode::kInvalidArgument,
            "adaptive loss layer must lie strictly inside the network");
  }

  result.loss_history.reserve(cfg.iterations);
  for (std::size_t it = 0; it < cfg.iterations; ++it) {
    const auto idx = draw(rng, all, cfg.batch_size);
    const auto y = labels_of(data, idx);
    if (!use_aux) {
      const auto cache = net.forward(batch_of(data, idx));
      const auto ce = nn::softmax_cross_entropy<float>(cache.logits(), y);
      opt.step(net.backward(cache, ce.grad).blocks());
      result.loss_history.push_back(ce.loss);
      check_progress(ce.loss, net, it);
      continue;
    }

    // Batch rows first, then target-class exemplars; exemplars carry no CE.
    const AdaptiveConfig& ad = *bd->adaptive;
    const auto ex_idx = draw(exemplar_rng, target_pool, ad.exemplars);
    nn::Matrix<float> x(static_cast<Eigen::Index>(idx.size() + ex_idx.size()),
                        static_cast<Eigen::Index>(data.dim));
    x.topRows(static_cast<Eigen::Index>(idx.size())) = batch_of(data, idx);
    x.bottomRows(static_cast<Eigen::Index>(ex_idx.size())) = batch_of(*clean, ex_idx);
    const auto cache = net.forward(x);
    const auto nb = static_cast<Eigen::Index>(idx.size());
    const auto ce = nn::softmax_cross_entropy<float>(cache.logits().topRows(nb), y);
    nn::Matrix<float> grad = nn::Matrix<float>::Zero(x.rows(), cache.logits().cols());
    grad.topRows(nb) = ce.grad;

    std::vector<Eigen::Index> poisoned_rows, other_rows;
    for (std::size_t r = 0; r < idx.size(); ++r) {
      if (idx[r] >= poison_begin && idx[r] < poison_end) {
        poisoned_rows.push_back(static_cast<Eigen::Index>(r));
      } else if (data.labels[idx[r]] != bd->target) {
        other_rows.push_back(static_cast<Eigen::Index>(r));
      }
    }

    float total = ce.loss;
    std::vector<nn::Matrix<float>> injected(net.num_layers());
    const bool need_other = ad.kind == AdaptiveLossKind::kL1;
    if (!poisoned_rows.empty() && (!need_other || !other_rows.empty())) {
      const std::size_t layer = ad.kind == AdaptiveLossKind::kL3 ? ad.k_shallow - 1
                                                                  : net.num_layers() - 2;
      const nn::Matrix<float>& act = cache.outputs[layer + 1];
      const nn::Matrix<float> p = act(poisoned_rows, Eigen::all);
      const nn::Matrix<float> t = act.bottomRows(static_cast<Eigen::Index>(ex_idx.size()));
      AuxLoss<float> aux;
      switch (ad.kind) {
        case AdaptiveLossKind::kL1:
          aux = large_margin_loss<float>(p, t, act(other_rows, Eigen::all));
          break;
        case AdaptiveLossKind::kL2: aux = centroid_loss<float>(p, t); break;
        case AdaptiveLossKind::kL3: aux = shallow_match_loss<float>(p, t); break;
      }
      const auto lambda = static_cast<float>(ad.weight);
      nn::Matrix<float> inj = nn::Matrix<float>::Zero(act.rows(), act.cols());
      for (std::size_t r = 0; r < poisoned_rows.size(); ++r) {
        inj.row(poisoned_rows[r]) += lambda * aux.grad_poisoned.row(static_cast<Eigen::Index>(r));
      }
      inj.bottomRows(static_cast<Eigen::Index>(ex_idx.size())) += lambda * aux.grad_target;
      if (need_other) {
        for (std::size_t r = 0; r < other_rows.size(); ++r) {
          inj.row(other_rows[r]) += lambda * aux.grad_other.row(static_cast<Eigen::Index>(r));
        }
      }
      injected[layer] = std::move(inj);
      total += lambda * aux.value;
    }
    opt.step(net.backward(cache, grad, &injected).blocks());
    result.loss_history.push_back(total);
    check_progress(total, net, it);
  }
  return result;
}

}  // namespace detail

// Minimizes mean cross-entropy with SGD + momentum on uniformly drawn batches.
inline TrainResult train_clean(const Dataset& data, const TrainConfig& cfg) {
  detail::check_dataset(data, cfg);
  return detail::supervised_loop(data, cfg);
}

// Static source-specific implant: trains on D with D_b (triggered victims as
// target) and D_l (triggered non-victims with their own labels) appended.
inline TrainResult train_tact(const Dataset& data, const BackdoorSpec& bd, const TrainConfig& cfg) {
  detail::check_dataset(data, cfg);
  bd.validate(data.num_classes);
  require(bd.trigger == TriggerKind::kStaticPatch, ErrorCode::kInvalidArgument,
          "static recipe needs a static patch trigger");
  bd.patch.check_fits(data.dim);
  const auto sets = detail::build_poison_sets(data, bd, cfg.seed);
  const Dataset all = detail::concat(detail::concat(data, sets.backdoor), sets.laundry);
  return detail::supervised_loop(all, cfg);
}

// Static source-specific implant plus lambda * auxiliary loss on the
// poisoned (D_b) rows of each batch.
inline TrainResult train_adaptive(const Dataset& data, const BackdoorSpec& bd,
                                  const TrainConfig& cfg) {
  detail::check_dataset(data, cfg);
  bd.validate(data.num_classes);
  require(bd.adaptive.has_value(), ErrorCode::kInvalidArgument, "adaptive config missing");
  require(bd.trigger == TriggerKind::kStaticPatch, ErrorCode::kInvalidArgument,
          "adaptive recipe builds on the static source-specific implant");
  if (bd.adaptive->kind == AdaptiveLossKind::kL3) {
    require(bd.adaptive->k_shallow >= 1 && bd.adaptive->k_shallow < cfg.architecture.size(),
            ErrorCode::kInvalidArgument, "L3 needs 1 <= k_shallow < number of layers");
  } else {
    require(cfg.architecture.size() >= 2, ErrorCode::kInvalidArgument,
            "L1/L2 need a penultimate layer");
  }
  bd.patch.check_fits(data.dim);
  const auto sets = detail::build_poison_sets(data, bd, cfg.seed);
  const Dataset all = detail::concat(detail::concat(data, sets.backdoor), sets.laundry);
  return detail::supervised_loop(all, cfg, &bd, &data, data.size(),
                                 data.size() + sets.backdoor.size());
}

// Co-trains the classifier f and the trigger generator g. Each iteration
// picks one task by drawing u in [0, 1):
//   clean    (u < rho):                     L(y, f(x))
//   backdoor (u < rho + rho_b):             L(t, f(x (+) g(x))),  x from victim classes
//   laundry  (u < rho + rho_b + rho_l):     L(y, f(x (+) g(x))),  x from other classes
//   cross    (otherwise):                   L(y, f(x (+) g(x'))), x, x' drawn independently
// Both networks share one SGD state; g only moves on trigger tasks.
inline SsdtResult train_ssdt(const Dataset& data, const BackdoorSpec& bd, const TrainConfig& cfg) {
  detail::check_dataset(data, cfg);
  bd.validate(data.num_classes);
  require(bd.trigger == TriggerKind::kDynamicGenerator, ErrorCode::kInvalidArgument,
          "dynamic recipe needs a generator trigger");

  std::vector<std::size_t> victims, non_victims;
  for (std::size_t i = 0; i < data.size(); ++i) {
    (bd.is_victim(data.labels[i]) ? victims : non_victims).push_back(i);
  }
  require(!victims.empty(), ErrorCode::kEmptyPartition, "no victim-class samples in training set");
  require(!non_victims.empty() || bd.rates.laundry == 0.0, ErrorCode::kEmptyPartition,
          "no non-victim samples for the laundry task");

  SsdtResult result{Net::initialized(cfg.architecture, stream_seed(cfg.seed, streams::kInit)),
                    GeneratorNet<float>::make(data.dim, bd.generator.hidden, bd.generator.epsilon,
                                              stream_seed(cfg.seed, streams::kGeneratorInit)),
                    {},
                    {}};
  Net& f = result.net;
  GeneratorNet<float>& g = result.generator;
  auto blocks = f.parameter_blocks();
  for (auto b : g.net.parameter_blocks()) blocks.push_back(b);
  nn::SgdMomentum<float> opt(blocks, cfg.learning_rate, cfg.momentum);

  std::mt19937_64 rng(stream_seed(cfg.seed, streams::kBatches));
  std::mt19937_64 task_rng(stream_seed(cfg.seed, streams::kTasks));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const std::vector<std::size_t> all = detail::iota(data.size());
  const auto target = bd.target;
  const TaskRates& r = bd.rates;

  result.loss_history.reserve(cfg.iterations);
  for (std::size_t it = 0; it < cfg.iterations; ++it) {
    const double u = unit(task_rng);
    int task;
    if (u < r.clean) {
      task = 0;
    } else if (u < r.clean + r.backdoor) {
      task = 1;
    } else if (u < r.clean + r.backdoor + r.laundry) {
      task = 2;
    } else {
      task = 3;
    }
    ++result.task_counts[static_cast<std::size_t>(task)];

    float loss;
    if (task == 0) {
      const auto idx = detail::draw(rng, all, cfg.batch_size);
      const auto cache = f.forward(detail::batch_of(data, idx));
      const auto ce = nn::softmax_cross_entropy<float>(cache.logits(), detail::labels_of(data, idx));
      const auto fg = f.backward(cache, ce.grad);
      auto grads = fg.blocks();
      grads.resize(blocks.size());  // generator blocks stay empty
      opt.step(grads);
      loss = ce.loss;
    } else {
      std::vector<std::size_t> idx, donor_idx;
      std::vector<Label> y;
      if (task == 1) {
        idx = detail::draw(rng, victims, cfg.batch_size);
        y.assign(idx.size(), target);
      } else if (task == 2) {
        idx = detail::draw(rng, non_victims, cfg.batch_size);
        y = detail::labels_of(data, idx);
      } else {
        idx = detail::draw(rng, all, cfg.batch_size);
        donor_idx = detail::draw(rng, all, cfg.batch_size);
        y = detail::labels_of(data, idx);
      }
      const nn::Matrix<float> x = detail::batch_of(data, idx);
      const auto pass = g.forward(task == 3 ? detail::batch_of(data, donor_idx) : x);
      const auto mixed = compose<float>(x, pass.perturbation, 0.0f, 1.0f);
      const auto cache = f.forward(mixed.output);
      const auto ce = nn::softmax_cross_entropy<float>(cache.logits(), y);
      const auto fg = f.backward(cache, ce.grad);
      const nn::Matrix<float> grad_perturbation = fg.input.cwiseProduct(mixed.pass_mask);
      const auto gg = g.backward(pass, grad_perturbation);
      auto grads = fg.blocks();
      for (auto b : gg.blocks()) grads.push_back(b);
      opt.step(grads);
      loss = ce.loss;
    }
    result.loss_history.push_back(loss);
    detail::check_progress(loss, f, it);
    require(g.net.parameters_finite(), ErrorCode::kDivergence, "generator diverged");
  }
  return result;
}

// Relabels exactly floor(ratio * |victim samples|) victim samples as the
// target; which ones is decided by a seeded shuffle.
inline Dataset substitute_labels(const Dataset& data, Label victim, Label target, double ratio,
                                 std::uint64_t seed) {
  require(ratio >= 0.0 && ratio <= 0.5, ErrorCode::kInvalidArgument,
          "substitution ratio must be in [0, 0.5]");
  Dataset out = data;
  std::vector<std::size_t> pool = data.indices_of(victim);
  const auto n = static_cast<std::size_t>(std::floor(ratio * static_cast<double>(pool.size()) + 1e-9));
  std::mt19937_64 rng(seed);
  std::shuffle(pool.begin(), pool.end(), rng);
  for (std::size_t k = 0; k < n; ++k) out.labels[pool[k]] = target;
  return out;
}

}  // namespace toporank::lab
