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

// Model checkpoints ("TEDM"): JSON header with the layer specs, payload of
// binary32 parameters, layer by layer, weights then bias.
//
//   {"kind":"classifier"|"generator","layers":[...],"epsilon":..,"metadata":{...}}

#pragma once

#include <string>
#include <vector>

#include "toporank/container.hpp"
#include "toporank/lab/trigger.hpp"
#include "toporank/nn/network.hpp"

namespace toporank::lab {

inline constexpr std::string_view kModelMagic = "TEDM";
inline constexpr std::uint32_t kModelVersion = 1;

namespace detail {

inline std::vector<std::uint8_t> encode_model(const nn::Network<float>& net, io::Json header) {
  io::Json layers = io::Json::array();
  for (const auto& s : net.specs()) layers.push_back(s.to_json());
  header["layers"] = std::move(layers);
  std::vector<std::uint8_t> payload;
  payload.reserve(net.parameter_count() * sizeof(float));
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    const auto& layer = net.layer(l);
    for (Eigen::Index i = 0; i < layer.weights.size(); ++i) io::put_le<float>(payload, layer.weights.data()[i]);
    for (Eigen::Index i = 0; i < layer.bias.size(); ++i) io::put_le<float>(payload, layer.bias.data()[i]);
  }
  return io::frame(kModelMagic, kModelVersion, header, payload);
}

inline nn::Network<float> decode_model(const io::Unframed& file) {
  std::vector<nn::LayerSpec> specs = io::with_header_errors([&] {
    std::vector<nn::LayerSpec> out;
    for (const auto& j : file.header.at("layers")) {
      try {
        out.push_back(nn::LayerSpec::from_json(j));
      } catch (const Error& e) {
        fail(ErrorCode::kMalformedHeader, e.what());
      }
    }
    return out;
  });
  nn::Network<float> net;
  try {
    net = nn::Network<float>(specs);
  } catch (const Error& e) {
    fail(ErrorCode::kMalformedHeader, e.what());
  }
  std::uint64_t expected = 0;
  for (const auto& s : specs) {
    expected = io::checked_add(expected, io::checked_mul(s.weight_count() + s.bias_count(), 4));
  }
  io::require_payload_size(file.payload, expected);
  const std::uint8_t* cursor = file.payload.data();
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    auto& layer = net.layer(l);
    for (Eigen::Index i = 0; i < layer.weights.size(); ++i, cursor += 4) layer.weights.data()[i] = io::get_le<float>(cursor);
    for (Eigen::Index i = 0; i < layer.bias.size(); ++i, cursor += 4) layer.bias.data()[i] = io::get_le<float>(cursor);
  }
  return net;
}

}  // namespace detail

struct ModelFile {
  nn::Network<float> net;
  io::Json metadata = io::Json::object();  // recipe echo, trigger, target/victims
};

inline void save_classifier(const std::string& path, const nn::Network<float>& net,
                            const io::Json& metadata = io::Json::object()) {
  io::write_file(path, detail::encode_model(net, {{"kind", "classifier"}, {"metadata", metadata}}));
}

inline ModelFile load_classifier(const std::string& path) {
  const auto bytes = io::read_file(path);
  const auto file = io::unframe(bytes, kModelMagic, kModelVersion);
  io::with_header_errors([&] {
    require(file.header.at("kind").get<std::string>() == "classifier", ErrorCode::kMalformedHeader,
            "checkpoint is not a classifier");
  });
  ModelFile out{detail::decode_model(file), file.header.value("metadata", io::Json::object())};
  return out;
}

inline void save_generator(const std::string& path, const GeneratorNet<float>& g) {
  io::write_file(path,
                 detail::encode_model(g.net, {{"kind", "generator"}, {"epsilon", g.epsilon}}));
}

inline GeneratorNet<float> load_generator(const std::string& path) {
  const auto bytes = io::read_file(path);
  const auto file = io::unframe(bytes, kModelMagic, kModelVersion);
  const float eps = io::with_header_errors([&] {
    require(file.header.at("kind").get<std::string>() == "generator", ErrorCode::kMalformedHeader,
            "checkpoint is not a generator");
    return file.header.at("epsilon").get<float>();
  });
  return {detail::decode_model(file), eps};
}

inline io::Json patch_to_json(const StaticPatch& p) {
  return {{"indices", p.indices}, {"values", p.values}};
}

inline StaticPatch patch_from_json(const io::Json& j) {
  return io::with_header_errors([&] {
    StaticPatch p{j.at("indices").get<std::vector<std::size_t>>(),
                  j.at("values").get<std::vector<float>>()};
    require(p.indices.size() == p.values.size(), ErrorCode::kMalformedHeader,
            "patch indices/values length mismatch");
    return p;
  });
}

}  // namespace toporank::lab
