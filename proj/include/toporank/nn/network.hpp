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

#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "toporank/core_types.hpp"
#include "toporank/error.hpp"

namespace toporank::nn {

template <typename T>
using Matrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename T>
using RowVector = Eigen::Matrix<T, 1, Eigen::Dynamic>;

enum class LayerType { kDense, kConv2d };

// Dense: in -> out. Conv2d: (in_channels, height, width) -> (out_channels,
// height - kernel + 1, width - kernel + 1), stride 1, no padding.
struct LayerSpec {
  LayerType type = LayerType::kDense;
  bool relu = true;
  std::size_t in = 0;
  std::size_t out = 0;
  std::size_t in_channels = 0;
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t out_channels = 0;
  std::size_t kernel = 0;

  static LayerSpec dense(std::size_t in, std::size_t out, bool relu) {
    LayerSpec s;
    s.type = LayerType::kDense;
    s.in = in;
    s.out = out;
    s.relu = relu;
    return s;
  }

  static LayerSpec conv2d(std::size_t in_channels, std::size_t height, std::size_t width,
                          std::size_t out_channels, std::size_t kernel, bool relu) {
    LayerSpec s;
    s.type = LayerType::kConv2d;
    s.in_channels = in_channels;
    s.height = height;
    s.width = width;
    s.out_channels = out_channels;
    s.kernel = kernel;
    s.relu = relu;
    return s;
  }

  std::size_t out_height() const { return height - kernel + 1; }
  std::size_t out_width() const { return width - kernel + 1; }

  std::size_t in_dim() const {
    return type == LayerType::kDense ? in : in_channels * height * width;
  }
  std::size_t out_dim() const {
    return type == LayerType::kDense ? out : out_channels * out_height() * out_width();
  }
  std::size_t weight_count() const {
    return type == LayerType::kDense ? in * out : out_channels * in_channels * kernel * kernel;
  }
  std::size_t bias_count() const { return type == LayerType::kDense ? out : out_channels; }
  std::size_t fan_in() const {
    return type == LayerType::kDense ? in : in_channels * kernel * kernel;
  }

  void validate() const {
    if (type == LayerType::kDense) {
      require(in > 0 && out > 0, ErrorCode::kInvalidArgument, "dense layer dims must be positive");
    } else {
      require(in_channels > 0 && out_channels > 0 && kernel > 0, ErrorCode::kInvalidArgument,
              "conv layer sizes must be positive");
      require(kernel <= height && kernel <= width, ErrorCode::kInvalidArgument,
              "conv kernel larger than input");
    }
  }

  nlohmann::json to_json() const {
    if (type == LayerType::kDense) {
      return {{"type", "dense"}, {"in", in}, {"out", out}, {"relu", relu}};
    }
    return {{"type", "conv2d"},          {"in_channels", in_channels}, {"height", height},
            {"width", width},            {"out_channels", out_channels},
            {"kernel", kernel},          {"relu", relu}};
  }

  static LayerSpec from_json(const nlohmann::json& j) {
    const std::string type = j.at("type").get<std::string>();
    LayerSpec s;
    if (type == "dense") {
      s = dense(j.at("in").get<std::size_t>(), j.at("out").get<std::size_t>(),
                j.at("relu").get<bool>());
    } else if (type == "conv2d") {
      s = conv2d(j.at("in_channels").get<std::size_t>(), j.at("height").get<std::size_t>(),
                 j.at("width").get<std::size_t>(), j.at("out_channels").get<std::size_t>(),
                 j.at("kernel").get<std::size_t>(), j.at("relu").get<bool>());
    } else {
      fail(ErrorCode::kInvalidArgument, "unknown layer type '" + type + "'");
    }
    s.validate();
    return s;
  }

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

// Dense weights are stored (in x out) so the forward pass is X * W.
// Conv weights are stored (out_channels, in_channels, kernel, kernel).
template <typename T>
struct Layer {
  LayerSpec spec;
  Matrix<T> weights;
  RowVector<T> bias;
};

template <typename T>
struct ForwardCache {
  // outputs[0] is the input batch; outputs[l + 1] is layer l's output after
  // its nonlinearity. Rows are samples.
  std::vector<Matrix<T>> outputs;

  const Matrix<T>& logits() const { return outputs.back(); }
};

template <typename T>
struct Gradients {
  std::vector<Matrix<T>> weights;
  std::vector<RowVector<T>> bias;
  Matrix<T> input;  // d loss / d input batch

  std::vector<std::span<const T>> blocks() const {
    std::vector<std::span<const T>> out;
    for (std::size_t l = 0; l < weights.size(); ++l) {
      out.emplace_back(weights[l].data(), static_cast<std::size_t>(weights[l].size()));
      out.emplace_back(bias[l].data(), static_cast<std::size_t>(bias[l].size()));
    }
    return out;
  }
};

namespace detail {

template <typename T>
void conv_forward(const LayerSpec& s, const Matrix<T>& w, const RowVector<T>& b,
                  const Matrix<T>& in, Matrix<T>& out) {
  const std::size_t oh = s.out_height(), ow = s.out_width(), k = s.kernel;
  out.resize(in.rows(), static_cast<Eigen::Index>(s.out_dim()));
  for (Eigen::Index n = 0; n < in.rows(); ++n) {
    const T* x = in.row(n).data();
    T* y = out.row(n).data();
    for (std::size_t f = 0; f < s.out_channels; ++f) {
      T* yf = y + f * oh * ow;
      for (std::size_t p = 0; p < oh * ow; ++p) yf[p] = b(static_cast<Eigen::Index>(f));
      for (std::size_t c = 0; c < s.in_channels; ++c) {
        const T* xc = x + c * s.height * s.width;
        const T* wk = w.data() + ((f * s.in_channels + c) * k * k);
        for (std::size_t ky = 0; ky < k; ++ky) {
          for (std::size_t kx = 0; kx < k; ++kx) {
            const T wv = wk[ky * k + kx];
            for (std::size_t oy = 0; oy < oh; ++oy) {
              const T* xr = xc + (oy + ky) * s.width + kx;
              T* yr = yf + oy * ow;
              for (std::size_t ox = 0; ox < ow; ++ox) yr[ox] += wv * xr[ox];
            }
          }
        }
      }
    }
  }
}

template <typename T>
void conv_backward(const LayerSpec& s, const Matrix<T>& w, const Matrix<T>& in,
                   const Matrix<T>& grad_out, Matrix<T>& grad_w, RowVector<T>& grad_b,
                   Matrix<T>& grad_in) {
  const std::size_t oh = s.out_height(), ow = s.out_width(), k = s.kernel;
  grad_w = Matrix<T>::Zero(w.rows(), w.cols());
  grad_b = RowVector<T>::Zero(static_cast<Eigen::Index>(s.out_channels));
  grad_in = Matrix<T>::Zero(in.rows(), in.cols());
  for (Eigen::Index n = 0; n < in.rows(); ++n) {
    const T* x = in.row(n).data();
    const T* g = grad_out.row(n).data();
    T* dx = grad_in.row(n).data();
    for (std::size_t f = 0; f < s.out_channels; ++f) {
      const T* gf = g + f * oh * ow;
      T bsum = 0;
      for (std::size_t p = 0; p < oh * ow; ++p) bsum += gf[p];
      grad_b(static_cast<Eigen::Index>(f)) += bsum;
      for (std::size_t c = 0; c < s.in_channels; ++c) {
        const T* xc = x + c * s.height * s.width;
        T* dxc = dx + c * s.height * s.width;
        const std::size_t base = (f * s.in_channels + c) * k * k;
        for (std::size_t ky = 0; ky < k; ++ky) {
          for (std::size_t kx = 0; kx < k; ++kx) {
            const T wv = w.data()[base + ky * k + kx];
            T acc = 0;
            for (std::size_t oy = 0; oy < oh; ++oy) {
              const T* xr = xc + (oy + ky) * s.width + kx;
              T* dxr = dxc + (oy + ky) * s.width + kx;
              const T* gr = gf + oy * ow;
              for (std::size_t ox = 0; ox < ow; ++ox) {
                acc += gr[ox] * xr[ox];
                dxr[ox] += gr[ox] * wv;
              }
            }
            grad_w.data()[base + ky * k + kx] += acc;
          }
        }
      }
    }
  }
}

}  // namespace detail

// A feed-forward stack of dense / conv layers. Every layer output is a tap.
template <typename T>
class Network {
 public:
  Network() = default;

  explicit Network(std::vector<LayerSpec> specs) {
    require(!specs.empty(), ErrorCode::kInvalidArgument, "network needs at least one layer");
    for (std::size_t l = 0; l < specs.size(); ++l) {
      specs[l].validate();
      if (l > 0) {
        require(specs[l].in_dim() == specs[l - 1].out_dim(), ErrorCode::kDimMismatch,
                "layer " + std::to_string(l + 1) + " expects " +
                    std::to_string(specs[l].in_dim()) + " inputs but previous layer emits " +
                    std::to_string(specs[l - 1].out_dim()));
      }
      Layer<T> layer;
      layer.spec = specs[l];
      const auto rows = static_cast<Eigen::Index>(
          specs[l].type == LayerType::kDense ? specs[l].in : specs[l].out_channels);
      const auto cols = static_cast<Eigen::Index>(
          specs[l].type == LayerType::kDense ? specs[l].out
                                             : specs[l].in_channels * specs[l].kernel *
                                                   specs[l].kernel);
      layer.weights = Matrix<T>::Zero(rows, cols);
      layer.bias = RowVector<T>::Zero(static_cast<Eigen::Index>(specs[l].bias_count()));
      layers_.push_back(std::move(layer));
    }
  }

  // He-normal weights for ReLU layers, Glorot-normal otherwise; zero bias.
  // Draws are made in binary64 and rounded, so float and double networks
  // built from the same seed agree up to rounding.
  static Network initialized(std::vector<LayerSpec> specs, std::uint64_t seed) {
    Network net(std::move(specs));
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (Layer<T>& layer : net.layers_) {
      const double fan_in = static_cast<double>(layer.spec.fan_in());
      const double fan_out = static_cast<double>(
          layer.spec.type == LayerType::kDense ? layer.spec.out
                                               : layer.spec.out_channels * layer.spec.kernel *
                                                     layer.spec.kernel);
      const double scale =
          layer.spec.relu ? std::sqrt(2.0 / fan_in) : std::sqrt(2.0 / (fan_in + fan_out));
      for (Eigen::Index i = 0; i < layer.weights.size(); ++i) {
        layer.weights.data()[i] = static_cast<T>(scale * normal(rng));
      }
    }
    return net;
  }

  template <typename U>
  Network<U> cast() const {
    Network<U> out(specs());
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      out.layer(l).weights = layers_[l].weights.template cast<U>();
      out.layer(l).bias = layers_[l].bias.template cast<U>();
    }
    return out;
  }

  std::size_t num_layers() const { return layers_.size(); }
  std::size_t input_dim() const { return layers_.front().spec.in_dim(); }
  std::size_t output_dim() const { return layers_.back().spec.out_dim(); }
  Layer<T>& layer(std::size_t l) { return layers_[l]; }
  const Layer<T>& layer(std::size_t l) const { return layers_[l]; }

  std::vector<LayerSpec> specs() const {
    std::vector<LayerSpec> out;
    for (const auto& l : layers_) out.push_back(l.spec);
    return out;
  }

  std::vector<LayerTap> taps() const {
    std::vector<LayerTap> out;
    std::size_t dense = 0, conv = 0;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      const LayerSpec& s = layers_[l].spec;
      const bool is_dense = s.type == LayerType::kDense;
      const std::string name = is_dense ? "dense" + std::to_string(++dense)
                                        : "conv" + std::to_string(++conv);
      out.push_back({static_cast<int>(l + 1), name, s.out_dim(),
                     is_dense ? TapKind::kLinear : TapKind::kConv});
    }
    return out;
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers_) n += l.spec.weight_count() + l.spec.bias_count();
    return n;
  }

  // Weight and bias blocks in layer order; matches Gradients::blocks().
  std::vector<std::span<T>> parameter_blocks() {
    std::vector<std::span<T>> out;
    for (auto& l : layers_) {
      out.emplace_back(l.weights.data(), static_cast<std::size_t>(l.weights.size()));
      out.emplace_back(l.bias.data(), static_cast<std::size_t>(l.bias.size()));
    }
    return out;
  }

  bool parameters_finite() const {
    for (const auto& l : layers_) {
      if (!l.weights.allFinite() || !l.bias.allFinite()) return false;
    }
    return true;
  }

  ForwardCache<T> forward(const Matrix<T>& input) const {
    require(static_cast<std::size_t>(input.cols()) == input_dim(), ErrorCode::kDimMismatch,
            "network expects " + std::to_string(input_dim()) + " inputs, got " +
                std::to_string(input.cols()));
    ForwardCache<T> cache;
    cache.outputs.reserve(layers_.size() + 1);
    cache.outputs.push_back(input);
    for (const Layer<T>& layer : layers_) {
      const Matrix<T>& x = cache.outputs.back();
      Matrix<T> y;
      if (layer.spec.type == LayerType::kDense) {
        y.noalias() = x * layer.weights;
        y.rowwise() += layer.bias;
      } else {
        detail::conv_forward(layer.spec, layer.weights, layer.bias, x, y);
      }
      if (layer.spec.relu) y = y.cwiseMax(T(0));
      cache.outputs.push_back(std::move(y));
    }
    return cache;
  }

  // Backpropagates `grad_logits` (d loss / d final output). `injected`, when
  // given, holds extra d loss / d output terms per layer (index l is layer
  // l's output; empty matrices are skipped). Gradients are taken w.r.t.
  // post-nonlinearity outputs.
  Gradients<T> backward(const ForwardCache<T>& cache, const Matrix<T>& grad_logits,
                        const std::vector<Matrix<T>>* injected = nullptr) const {
    Gradients<T> grads;
    grads.weights.resize(layers_.size());
    grads.bias.resize(layers_.size());
    Matrix<T> g = grad_logits;
    for (std::size_t li = layers_.size(); li-- > 0;) {
      const Layer<T>& layer = layers_[li];
      if (injected && li < injected->size() && (*injected)[li].size() > 0) g += (*injected)[li];
      const Matrix<T>& y = cache.outputs[li + 1];
      const Matrix<T>& x = cache.outputs[li];
      if (layer.spec.relu) g = (y.array() > T(0)).select(g, T(0));
      Matrix<T> gx;
      if (layer.spec.type == LayerType::kDense) {
        grads.weights[li].noalias() = x.transpose() * g;
        grads.bias[li] = g.colwise().sum();
        gx.noalias() = g * layer.weights.transpose();
      } else {
        detail::conv_backward(layer.spec, layer.weights, x, g, grads.weights[li], grads.bias[li],
                              gx);
      }
      g = std::move(gx);
    }
    grads.input = std::move(g);
    return grads;
  }

  std::vector<Label> predict(const Matrix<T>& input) const {
    const ForwardCache<T> cache = forward(input);
    std::vector<Label> out(static_cast<std::size_t>(input.rows()));
    for (Eigen::Index i = 0; i < input.rows(); ++i) {
      Eigen::Index arg;
      cache.logits().row(i).maxCoeff(&arg);
      out[static_cast<std::size_t>(i)] = static_cast<Label>(arg);
    }
    return out;
  }

 private:
  std::vector<Layer<T>> layers_;
};

// Mean softmax cross-entropy over the batch and its gradient w.r.t. logits.
template <typename T>
struct CrossEntropy {
  T loss = 0;
  Matrix<T> grad;
};

template <typename T>
CrossEntropy<T> softmax_cross_entropy(const Matrix<T>& logits, std::span<const Label> labels) {
  require(static_cast<std::size_t>(logits.rows()) == labels.size(), ErrorCode::kDimMismatch,
          "label count must equal batch size");
  CrossEntropy<T> out;
  out.grad.resize(logits.rows(), logits.cols());
  const T inv_n = T(1) / static_cast<T>(logits.rows());
  T total = 0;
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const T mx = logits.row(i).maxCoeff();
    auto e = (logits.row(i).array() - mx).exp();
    const T z = e.sum();
    const auto y = static_cast<Eigen::Index>(labels[static_cast<std::size_t>(i)]);
    require(y >= 0 && y < logits.cols(), ErrorCode::kOutOfRange, "label outside logits range");
    total += std::log(z) - (logits(i, y) - mx);
    out.grad.row(i) = (e / z).matrix() * inv_n;
    out.grad(i, y) -= inv_n;
  }
  out.loss = total * inv_n;
  return out;
}

// Plain SGD with (PyTorch-style) momentum: v = mu * v + g; p -= lr * v.
// Blocks whose gradient span is empty are left untouched, momentum included.
template <typename T>
class SgdMomentum {
 public:
  SgdMomentum(std::vector<std::span<T>> params, T learning_rate, T momentum)
      : params_(std::move(params)), lr_(learning_rate), mu_(momentum) {
    require(learning_rate > 0, ErrorCode::kInvalidArgument, "learning rate must be positive");
    require(momentum >= 0 && momentum < 1, ErrorCode::kInvalidArgument,
            "momentum must be in [0, 1)");
    for (const auto& p : params_) velocity_.emplace_back(p.size(), T(0));
  }

  void step(const std::vector<std::span<const T>>& grads) {
    require(grads.size() == params_.size(), ErrorCode::kDimMismatch,
            "gradient block count mismatch");
    for (std::size_t b = 0; b < params_.size(); ++b) {
      if (grads[b].empty()) continue;
      require(grads[b].size() == params_[b].size(), ErrorCode::kDimMismatch,
              "gradient block size mismatch");
      T* p = params_[b].data();
      T* v = velocity_[b].data();
      const T* g = grads[b].data();
      for (std::size_t i = 0; i < params_[b].size(); ++i) {
        v[i] = mu_ * v[i] + g[i];
        p[i] -= lr_ * v[i];
      }
    }
  }

 private:
  std::vector<std::span<T>> params_;
  std::vector<std::vector<T>> velocity_;
  T lr_;
  T mu_;
};

// Copies selected dataset-like rows into a batch matrix.
template <typename T, typename RowFn>
Matrix<T> gather_rows(std::size_t dim, std::span<const std::size_t> indices, RowFn&& row) {
  Matrix<T> out(static_cast<Eigen::Index>(indices.size()), static_cast<Eigen::Index>(dim));
  for (std::size_t i = 0; i < indices.size(); ++i) {
    auto r = row(indices[i]);
    for (std::size_t j = 0; j < dim; ++j) {
      out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = static_cast<T>(r[j]);
    }
  }
  return out;
}

}  // namespace toporank::nn
