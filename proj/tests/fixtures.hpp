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

// Random fixtures and independent oracles shared by the unit tests and the
// acceptance runner. Nothing here depends on gtest.

#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "toporank/toporank.hpp"

namespace toporank::testing {

inline std::string source_path(const std::string& rel) {
  return std::string(TOPORANK_SOURCE_DIR) + "/" + rel;
}

// Random trace with `samples` rows over taps of the given dims.
inline ActivationTrace random_trace(std::mt19937_64& rng, int classes,
                                    const std::vector<std::size_t>& dims, std::size_t samples) {
  ActivationTrace t;
  t.label_space = LabelSpace(classes);
  for (std::size_t i = 0; i < dims.size(); ++i) {
    t.taps.push_back({static_cast<int>(i + 1), "tap" + std::to_string(i + 1), dims[i],
                      static_cast<TapKind>(i % 6)});
  }
  std::uniform_int_distribution<int> label(0, classes - 1);
  std::uniform_int_distribution<int> kind(0, 4);
  std::normal_distribution<float> value(0.0f, 3.0f);
  for (std::size_t s = 0; s < samples; ++s) {
    TraceSample ts;
    ts.sample_id = rng();
    if (rng() % 4 != 0) ts.true_label = label(rng);
    ts.predicted_label = label(rng);
    ts.kind = static_cast<SampleKind>(kind(rng));
    for (std::size_t d : dims) {
      std::vector<float> v(d);
      for (float& x : v) x = value(rng);
      ts.activations.push_back(std::move(v));
    }
    t.samples.push_back(std::move(ts));
  }
  return t;
}

// Bank with c classes x m entries of random activations.
inline ReferenceBank random_bank(std::mt19937_64& rng, int classes, std::size_t m,
                                 const std::vector<std::size_t>& dims, float spread = 1.0f) {
  ReferenceBank bank;
  bank.label_space = LabelSpace(classes);
  bank.per_class_count = m;
  for (std::size_t i = 0; i < dims.size(); ++i) {
    bank.taps.push_back({static_cast<int>(i + 1), "tap" + std::to_string(i + 1), dims[i],
                         TapKind::kLinear});
  }
  std::normal_distribution<float> value(0.0f, spread);
  std::uniform_int_distribution<int> label(0, classes - 1);
  for (int k = 0; k < classes; ++k) {
    for (std::size_t j = 0; j < m; ++j) {
      BankEntry e;
      e.ref_index = bank.entries.size();
      e.class_label = k;
      e.predicted_label = rng() % 5 == 0 ? label(rng) : k;
      e.source_sample_id = 1000 + e.ref_index;
      for (std::size_t d : dims) {
        std::vector<float> v(d);
        for (float& x : v) x = value(rng);
        e.activations.push_back(std::move(v));
      }
      bank.entries.push_back(std::move(e));
    }
  }
  return bank;
}

// Rank oracle: distances accumulated in long double, a full sort by
// (distance, index), and the 1-based positions of the first k entries of the
// predicted class.
inline std::vector<int> oracle_ranks(const std::vector<float>& x, Label predicted,
                                     const ReferenceBank& b, std::size_t tap, topo::Metric metric,
                                     std::size_t k, std::optional<std::size_t> exclude) {
  struct Ref {
    long double d;
    std::size_t i;
  };
  std::vector<Ref> refs;
  for (const auto& e : b.entries) {
    if (exclude && e.ref_index == *exclude) continue;
    const auto& y = e.activations[tap];
    long double d;
    if (metric == topo::Metric::kEuclidean) {
      long double s = 0;
      for (std::size_t j = 0; j < x.size(); ++j) s += std::pow(static_cast<long double>(x[j]) - y[j], 2);
      d = std::sqrt(s);
    } else {
      long double dot = 0, nx = 0, ny = 0;
      for (std::size_t j = 0; j < x.size(); ++j) {
        dot += static_cast<long double>(x[j]) * y[j];
        nx += static_cast<long double>(x[j]) * x[j];
        ny += static_cast<long double>(y[j]) * y[j];
      }
      d = (nx == 0 || ny == 0) ? 1 : 1 - dot / std::sqrt(nx * ny);
    }
    // Rounded to binary64 so exact ties break by index as in the library.
    refs.push_back({static_cast<double>(d), e.ref_index});
  }
  std::sort(refs.begin(), refs.end(), [](const Ref& a, const Ref& c) {
    return a.d != c.d ? a.d < c.d : a.i < c.i;
  });
  std::vector<int> out;
  for (std::size_t p = 0; p < refs.size() && out.size() < k; ++p) {
    if (b.entries[refs[p].i].class_label == predicted) out.push_back(static_cast<int>(p + 1));
  }
  return out;
}

// False when two reference distances from x differ by less than rounding
// error without being equal; the oracle runs at higher precision, so such
// near-ties are not comparable. Exact ties are fine.
inline bool well_separated(const std::vector<float>& x, const ReferenceBank& b, std::size_t tap,
                           topo::Metric metric) {
  std::vector<double> d;
  for (const auto& e : b.entries) d.push_back(topo::distance(x, e.activations[tap], metric));
  std::sort(d.begin(), d.end());
  for (std::size_t i = 1; i < d.size(); ++i) {
    const double gap = d[i] - d[i - 1];
    if (gap > 0 && gap < 1e-9 * std::max(1.0, d[i])) return false;
  }
  return true;
}

using Rows = std::vector<std::vector<double>>;

// Correlated, scaled and shifted Gaussian rows.
inline Rows gaussian(std::mt19937_64& rng, std::size_t n, std::size_t d, bool correlated = true) {
  std::normal_distribution<double> g(0.0, 1.0);
  Rows out(n, std::vector<double>(d));
  for (auto& r : out) {
    for (std::size_t j = 0; j < d; ++j) {
      r[j] = g(rng) * (1.0 + j);
      if (correlated && j > 0) r[j] += 0.7 * r[j - 1];
      r[j] += 3.0 * j;
    }
  }
  return out;
}

// Mahalanobis distance in standardized coordinates, computed with plain
// loops and Gauss-Jordan inversion (no Eigen).
struct MahalanobisOracle {
  std::vector<double> mean, sd;
  std::vector<std::vector<double>> inv;

  explicit MahalanobisOracle(const Rows& x) {
    const std::size_t n = x.size(), d = x[0].size();
    mean.assign(d, 0);
    sd.assign(d, 0);
    for (const auto& r : x) {
      for (std::size_t j = 0; j < d; ++j) mean[j] += r[j] / n;
    }
    for (const auto& r : x) {
      for (std::size_t j = 0; j < d; ++j) sd[j] += (r[j] - mean[j]) * (r[j] - mean[j]) / (n - 1);
    }
    for (auto& s : sd) s = std::sqrt(s);
    std::vector<std::vector<double>> a(d, std::vector<double>(2 * d, 0));
    for (const auto& r : x) {
      for (std::size_t i = 0; i < d; ++i) {
        for (std::size_t j = 0; j < d; ++j) {
          a[i][j] += (r[i] - mean[i]) / sd[i] * (r[j] - mean[j]) / sd[j] / (n - 1);
        }
      }
    }
    for (std::size_t i = 0; i < d; ++i) a[i][d + i] = 1;
    for (std::size_t c = 0; c < d; ++c) {
      std::size_t piv = c;
      for (std::size_t r = c + 1; r < d; ++r) {
        if (std::abs(a[r][c]) > std::abs(a[piv][c])) piv = r;
      }
      std::swap(a[c], a[piv]);
      const double p = a[c][c];
      for (auto& v : a[c]) v /= p;
      for (std::size_t r = 0; r < d; ++r) {
        if (r == c) continue;
        const double f = a[r][c];
        for (std::size_t k = 0; k < 2 * d; ++k) a[r][k] -= f * a[c][k];
      }
    }
    inv.assign(d, std::vector<double>(d));
    for (std::size_t i = 0; i < d; ++i) {
      for (std::size_t j = 0; j < d; ++j) inv[i][j] = a[i][d + j];
    }
  }

  double operator()(const std::vector<double>& f) const {
    const std::size_t d = mean.size();
    std::vector<double> z(d);
    for (std::size_t j = 0; j < d; ++j) z[j] = (f[j] - mean[j]) / sd[j];
    double s = 0;
    for (std::size_t i = 0; i < d; ++i) {
      for (std::size_t j = 0; j < d; ++j) s += z[i] * inv[i][j] * z[j];
    }
    return s;
  }
};

// O(n^2) pair count: P(pos > neg) + P(pos == neg) / 2.
inline double pair_auc(const std::vector<double>& pos, const std::vector<double>& neg) {
  double wins = 0;
  for (double p : pos) {
    for (double n : neg) wins += p > n ? 1.0 : p == n ? 0.5 : 0.0;
  }
  return wins / (static_cast<double>(pos.size()) * static_cast<double>(neg.size()));
}

// Central-difference gradient checks on binary64 copies of the networks.
// Steps are small enough that crossing a ReLU or clip kink is rare; each
// check returns a norm-relative error over every coordinate.
namespace gradcheck {

using M = nn::Matrix<double>;

constexpr double kStep = 1e-6;
constexpr double kTolerance = 1e-4;

inline M random_matrix(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols, double lo = -1,
                       double hi = 1) {
  std::uniform_real_distribution<double> u(lo, hi);
  M m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
  return m;
}

inline std::vector<Label> random_labels(std::mt19937_64& rng, std::size_t n, int classes) {
  std::vector<Label> y(n);
  for (auto& v : y) v = static_cast<Label>(rng() % static_cast<unsigned>(classes));
  return y;
}

struct Comparison {
  double diff2 = 0;
  double scale2 = 0;
  void add(double analytic, double numeric) {
    diff2 += (analytic - numeric) * (analytic - numeric);
    scale2 += analytic * analytic + numeric * numeric;
  }
  double relative() const { return scale2 == 0 ? std::sqrt(diff2) : std::sqrt(diff2 / scale2); }
};

// Perturbs each coordinate of `values` in place and compares with `analytic`.
inline void check_block(std::span<double> values, std::span<const double> analytic,
                        const std::function<double()>& loss, Comparison& cmp) {
  require(values.size() == analytic.size(), ErrorCode::kDimMismatch, "gradient block size differs");
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double keep = values[i];
    values[i] = keep + kStep;
    const double up = loss();
    values[i] = keep - kStep;
    const double down = loss();
    values[i] = keep;
    cmp.add(analytic[i], (up - down) / (2 * kStep));
  }
}

inline std::span<double> span_of(M& m) { return {m.data(), static_cast<std::size_t>(m.size())}; }
inline std::span<const double> span_of(const M& m) {
  return {m.data(), static_cast<std::size_t>(m.size())};
}

// Cross-entropy on the logits plus a random linear probe on every hidden tap,
// so the injected-gradient path is exercised too.
inline double network_error(const std::vector<nn::LayerSpec>& specs, std::size_t batch,
                            std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  auto net = nn::Network<float>::initialized(specs, seed).cast<double>();
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    auto& b = net.layer(l).bias;
    for (Eigen::Index i = 0; i < b.size(); ++i) b(i) = 0.1 * (static_cast<double>(rng() % 21) - 10) / 10;
  }
  M x = random_matrix(rng, static_cast<Eigen::Index>(batch), static_cast<Eigen::Index>(net.input_dim()));
  const auto labels = random_labels(rng, batch, static_cast<int>(net.output_dim()));
  std::vector<M> probes(net.num_layers());
  for (std::size_t l = 0; l + 1 < net.num_layers(); ++l) {
    probes[l] = random_matrix(rng, x.rows(), static_cast<Eigen::Index>(specs[l].out_dim()));
  }

  auto loss = [&] {
    const auto cache = net.forward(x);
    double v = nn::softmax_cross_entropy<double>(cache.logits(), labels).loss;
    for (std::size_t l = 0; l + 1 < net.num_layers(); ++l) {
      v += (cache.outputs[l + 1].array() * probes[l].array()).sum();
    }
    return v;
  };
  const auto cache = net.forward(x);
  const auto ce = nn::softmax_cross_entropy<double>(cache.logits(), labels);
  const auto grads = net.backward(cache, ce.grad, &probes);

  Comparison cmp;
  const auto analytic = grads.blocks();
  auto params = net.parameter_blocks();
  for (std::size_t b = 0; b < params.size(); ++b) check_block(params[b], analytic[b], loss, cmp);
  check_block(span_of(x), span_of(grads.input), loss, cmp);
  return cmp.relative();
}

// Architectures covering every layer kind: dense with and without ReLU,
// conv into dense, and stacked conv without ReLU.
inline std::vector<std::pair<std::string, std::vector<nn::LayerSpec>>> architectures() {
  using nn::LayerSpec;
  return {
      {"dense", {LayerSpec::dense(6, 8, true), LayerSpec::dense(8, 5, true), LayerSpec::dense(5, 3, false)}},
      {"conv_dense",
       {LayerSpec::conv2d(2, 6, 5, 3, 3, true), LayerSpec::dense(3 * 4 * 3, 7, true),
        LayerSpec::dense(7, 4, false)}},
      {"conv_conv",
       {LayerSpec::conv2d(1, 5, 5, 2, 2, false), LayerSpec::conv2d(2, 4, 4, 2, 3, true),
        LayerSpec::dense(2 * 2 * 2, 3, false)}},
  };
}

// Loss on f(clip(x + g(src))) differentiated w.r.t. the generator weights, the
// path a dynamic-trigger attacker trains through.
inline double generator_error(std::uint64_t seed) {
  using nn::LayerSpec;
  std::mt19937_64 rng(seed);
  const std::size_t dim = 9;
  auto f = nn::Network<float>::initialized({LayerSpec::dense(dim, 6, true), LayerSpec::dense(6, 3, false)},
                                           seed)
               .cast<double>();
  auto g = lab::GeneratorNet<float>::make(dim, 5, 0.2f, seed + 100).cast<double>();
  const M x = random_matrix(rng, 4, dim, 0, 1);
  const M src = random_matrix(rng, 4, dim, 0, 1);
  const auto labels = random_labels(rng, 4, 3);

  auto loss = [&] {
    const auto comp = lab::compose<double>(x, g.perturb(src), 0.0, 1.0);
    return nn::softmax_cross_entropy<double>(f.forward(comp.output).logits(), labels).loss;
  };
  const auto pass = g.forward(src);
  const auto comp = lab::compose<double>(x, pass.perturbation, 0.0, 1.0);
  const auto fc = f.forward(comp.output);
  const auto ce = nn::softmax_cross_entropy<double>(fc.logits(), labels);
  const auto fg = f.backward(fc, ce.grad);
  const M grad_perturbation = fg.input.cwiseProduct(comp.pass_mask);
  const auto gg = g.backward(pass, grad_perturbation);

  Comparison cmp;
  const auto analytic = gg.blocks();
  auto params = g.net.parameter_blocks();
  for (std::size_t b = 0; b < params.size(); ++b) check_block(params[b], analytic[b], loss, cmp);
  return cmp.relative();
}

// `fn` maps operand matrices to an AuxLoss; operands are poisoned, target and
// (for the margin loss) other.
template <typename LossFn>
double aux_error(LossFn&& fn, std::size_t operands, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<M> in;
  for (std::size_t i = 0; i < operands; ++i) {
    in.push_back(random_matrix(rng, static_cast<Eigen::Index>(3 + i), 4, -2, 2));
  }
  const lab::AuxLoss<double> at = fn(in);
  const M* grads[] = {&at.grad_poisoned, &at.grad_target, &at.grad_other};
  auto value = [&] { return fn(in).value; };
  Comparison cmp;
  for (std::size_t i = 0; i < operands; ++i) check_block(span_of(in[i]), span_of(*grads[i]), value, cmp);
  return cmp.relative();
}

inline double margin_error(std::uint64_t seed) {
  return aux_error([](const std::vector<M>& m) { return lab::large_margin_loss(m[0], m[1], m[2]); }, 3,
                   seed);
}
inline double centroid_error(std::uint64_t seed) {
  return aux_error([](const std::vector<M>& m) { return lab::centroid_loss(m[0], m[1]); }, 2, seed);
}
inline double shallow_error(std::uint64_t seed) {
  return aux_error([](const std::vector<M>& m) { return lab::shallow_match_loss(m[0], m[1]); }, 2, seed);
}

}  // namespace gradcheck
}  // namespace toporank::testing
