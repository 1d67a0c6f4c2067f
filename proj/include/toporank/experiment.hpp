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

// Declarative end-to-end runs: load data, train or implant, build the
// reference bank, fit the detector on the bank's rank features, and score a
// test set that is half victim-triggered, a quarter clean, a quarter
// non-victim-triggered.
//
// Recipe (JSON):
//   name, seed
//   data:      {kind: mnist, images, labels, train_per_class}
//            | {kind: blobs, num_classes, input_dim, separation, stddev,
//               per_class, train_per_class}
//   model:     {hidden: [..]} or {layers: [LayerSpec...]}
//   train:     {iterations, batch_size, learning_rate, momentum}
//   attack:    {kind: none|tact|ssdt|adaptive, target, victims, poison_rate,
//               rates: {clean, backdoor, laundry, cross},
//               patch: {height, width, row, col, size, value} | {indices, values},
//               generator: {hidden, epsilon},
//               adaptive: {loss: L1|L2|L3, lambda, k_shallow, exemplars},
//               substitution_ratio}
//   bank:      {per_class}
//   detector:  {alpha, threshold_mode, zscore_multiplier, metric, k}
//   gates:     {min: {metric: bound}, max: {metric: bound}}
// Relative paths are resolved against the recipe file's directory.

#pragma once

#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "toporank/container.hpp"
#include "toporank/core_types.hpp"
#include "toporank/dataset.hpp"
#include "toporank/detector.hpp"
#include "toporank/lab/emit.hpp"
#include "toporank/lab/model_io.hpp"
#include "toporank/lab/train.hpp"
#include "toporank/metrics.hpp"
#include "toporank/topo.hpp"
#include "toporank/trace_io.hpp"

namespace toporank {

enum class AttackKind { kNone, kTact, kSsdt, kAdaptive };

inline std::string_view to_string(AttackKind k) {
  switch (k) {
    case AttackKind::kNone: return "none";
    case AttackKind::kTact: return "tact";
    case AttackKind::kSsdt: return "ssdt";
    case AttackKind::kAdaptive: return "adaptive";
  }
  return "none";
}

inline AttackKind parse_attack_kind(std::string_view s) {
  if (s == "none") return AttackKind::kNone;
  if (s == "tact") return AttackKind::kTact;
  if (s == "ssdt") return AttackKind::kSsdt;
  if (s == "adaptive") return AttackKind::kAdaptive;
  fail(ErrorCode::kInvalidArgument, "unknown attack kind '" + std::string(s) + "'");
}

struct DataSection {
  std::string kind = "mnist";
  std::string images, labels;  // mnist
  int num_classes = 10;        // blobs
  std::size_t input_dim = 16;
  double separation = 10.0;
  double stddev = 1.0;
  std::size_t per_class = 500;
  std::size_t train_per_class = 200;
};

struct Gate {
  std::string metric;
  double bound = 0.0;
  bool is_min = true;  // metric >= bound; otherwise metric <= bound
};

struct Recipe {
  std::string name = "experiment";
  std::uint64_t seed = 0;
  DataSection data;
  std::vector<std::size_t> hidden;                 // used when layers is empty
  std::vector<nn::LayerSpec> layers;
  lab::TrainConfig train;
  AttackKind attack = AttackKind::kNone;
  lab::BackdoorSpec backdoor;
  bool rates_given = false;
  std::size_t bank_per_class = 20;
  DetectorOptions detector;
  topo::Metric metric = topo::Metric::kEuclidean;
  std::size_t k = 1;
  unsigned threads = 1;
  std::vector<Gate> gates;
  io::Json source = io::Json::object();  // the parsed JSON, echoed in outputs

  topo::RadiusConfig radius() const {
    return k == 1 ? topo::RadiusConfig::nearest() : topo::RadiusConfig::knn(k);
  }

  // Victim classes, defaulting to the class after the target.
  std::vector<Label> victims() const {
    if (backdoor.victims) return *backdoor.victims;
    return {(backdoor.target + 1) % num_classes()};
  }

  int num_classes() const { return data.kind == "blobs" ? data.num_classes : 10; }

  std::vector<nn::LayerSpec> architecture(std::size_t input_dim, int classes) const {
    if (!layers.empty()) return layers;
    std::vector<nn::LayerSpec> out;
    std::size_t in = input_dim;
    for (std::size_t h : hidden) {
      out.push_back(nn::LayerSpec::dense(in, h, true));
      in = h;
    }
    out.push_back(nn::LayerSpec::dense(in, static_cast<std::size_t>(classes), false));
    return out;
  }

  // Everything that can be checked without touching data or training.
  void validate() const {
    require(data.kind == "mnist" || data.kind == "blobs", ErrorCode::kInvalidArgument,
            "data.kind must be 'mnist' or 'blobs'");
    require(data.train_per_class > 0, ErrorCode::kInvalidArgument, "train_per_class must be positive");
    require(bank_per_class >= 2, ErrorCode::kInvalidArgument, "bank.per_class must be at least 2");
    detector.validate();
    radius().validate(bank_per_class);
    require(train.batch_size > 0 && train.learning_rate > 0.0f, ErrorCode::kInvalidArgument,
            "train.batch_size and train.learning_rate must be positive");
    if (attack != AttackKind::kNone) {
      lab::BackdoorSpec bd = backdoor;
      bd.victims = victims();
      bd.validate(num_classes());
    } else {
      backdoor.rates.validate();
    }
    for (const Gate& g : gates) {
      static const char* known[] = {"acc_not", "acc_vt", "acc_nvt", "acc_ct", "tpr", "fpr",
                                    "fpr_not", "fpr_nvt", "precision", "detection_accuracy", "auc"};
      require(std::find_if(std::begin(known), std::end(known),
                           [&](const char* k) { return g.metric == k; }) != std::end(known),
              ErrorCode::kInvalidArgument, "unknown gate metric '" + g.metric + "'");
    }
  }

  static Recipe from_json(const io::Json& j, const std::filesystem::path& base_dir = {}) {
    Recipe r;
    io::with_header_errors([&] {
      r.source = j;
      r.name = j.value("name", r.name);
      r.seed = j.value("seed", r.seed);
      const auto& d = j.at("data");
      r.data.kind = d.value("kind", r.data.kind);
      auto resolve = [&](const std::string& p) {
        const std::filesystem::path path(p);
        return (path.is_absolute() || base_dir.empty() ? path : base_dir / path).string();
      };
      if (d.contains("images")) r.data.images = resolve(d.at("images").get<std::string>());
      if (d.contains("labels")) r.data.labels = resolve(d.at("labels").get<std::string>());
      r.data.num_classes = d.value("num_classes", r.data.num_classes);
      r.data.input_dim = d.value("input_dim", r.data.input_dim);
      r.data.separation = d.value("separation", r.data.separation);
      r.data.stddev = d.value("stddev", r.data.stddev);
      r.data.per_class = d.value("per_class", r.data.per_class);
      r.data.train_per_class = d.value("train_per_class", r.data.train_per_class);

      const auto model = j.value("model", io::Json::object());
      r.hidden = model.value("hidden", std::vector<std::size_t>{128});
      if (model.contains("layers")) {
        for (const auto& l : model.at("layers")) r.layers.push_back(nn::LayerSpec::from_json(l));
      }

      const auto t = j.value("train", io::Json::object());
      r.train.iterations = t.value("iterations", r.train.iterations);
      r.train.batch_size = t.value("batch_size", r.train.batch_size);
      r.train.learning_rate = t.value("learning_rate", r.train.learning_rate);
      r.train.momentum = t.value("momentum", r.train.momentum);

      const auto a = j.value("attack", io::Json::object());
      r.attack = parse_attack_kind(a.value("kind", std::string("none")));
      auto& bd = r.backdoor;
      bd.target = a.value("target", 0);
      if (a.contains("victims")) bd.victims = a.at("victims").get<std::vector<Label>>();
      bd.poison_rate = a.value("poison_rate", bd.poison_rate);
      bd.substitution_ratio = a.value("substitution_ratio", 0.0);
      bd.rates = lab::TaskRates::defaults(r.num_classes());
      if (a.contains("rates")) {
        const auto& rt = a.at("rates");
        bd.rates = {rt.at("clean").get<double>(), rt.at("backdoor").get<double>(),
                    rt.at("laundry").get<double>(), rt.at("cross").get<double>()};
        r.rates_given = true;
      }
      bd.trigger = r.attack == AttackKind::kSsdt ? lab::TriggerKind::kDynamicGenerator
                                                 : lab::TriggerKind::kStaticPatch;
      if (a.contains("patch")) {
        const auto& p = a.at("patch");
        if (p.contains("indices")) {
          bd.patch = lab::patch_from_json(p);
        } else {
          bd.patch = lab::StaticPatch::square(p.value("height", 28), p.value("width", 28),
                                              p.at("row").get<std::size_t>(),
                                              p.at("col").get<std::size_t>(),
                                              p.at("size").get<std::size_t>(), p.value("value", 1.0f));
        }
      }
      if (a.contains("generator")) {
        bd.generator.hidden = a.at("generator").value("hidden", bd.generator.hidden);
        bd.generator.epsilon = a.at("generator").value("epsilon", bd.generator.epsilon);
      }
      if (r.attack == AttackKind::kAdaptive) {
        const auto ad = a.value("adaptive", io::Json::object());
        lab::AdaptiveConfig cfg;
        cfg.kind = lab::parse_adaptive_loss(ad.value("loss", std::string("L1")));
        cfg.weight = ad.value("lambda", cfg.weight);
        cfg.k_shallow = ad.value("k_shallow", cfg.k_shallow);
        cfg.exemplars = ad.value("exemplars", cfg.exemplars);
        bd.adaptive = cfg;
      }

      const auto b = j.value("bank", io::Json::object());
      r.bank_per_class = b.value("per_class", r.bank_per_class);
      const auto det = j.value("detector", io::Json::object());
      r.detector.alpha = det.value("alpha", r.detector.alpha);
      r.detector.mode = parse_threshold_mode(det.value("threshold_mode", std::string("quantile")));
      r.detector.zscore_multiplier = det.value("zscore_multiplier", r.detector.zscore_multiplier);
      r.metric = topo::parse_metric(det.value("metric", std::string("euclidean")));
      r.k = det.value("k", r.k);
      r.threads = j.value("threads", r.threads);

      const auto gates = j.value("gates", io::Json::object());
      for (const char* side : {"min", "max"}) {
        if (!gates.contains(side)) continue;
        for (const auto& [metric, bound] : gates.at(side).items()) {
          r.gates.push_back({metric, bound.get<double>(), std::string(side) == "min"});
        }
      }
    });
    return r;
  }

  static Recipe load(const std::string& path) {
    const auto bytes = io::read_file(path);
    const io::Json j = io::Json::parse(bytes.begin(), bytes.end(), nullptr, false);
    require(!j.is_discarded() && j.is_object(), ErrorCode::kMalformedHeader,
            "recipe '" + path + "' is not a JSON object");
    return from_json(j, std::filesystem::path(path).parent_path());
  }
};

struct GateResult {
  Gate gate;
  std::optional<double> value;
  bool passed = false;
};

struct ExperimentResult {
  ClassificationMetrics attack;
  std::optional<double> victim_clean_accuracy;
  DetectionMetrics detection;
  double threshold = 0.0;
  std::vector<GateResult> gates;
  io::Json report;  // everything written to metrics.json

  bool gates_passed() const {
    return std::all_of(gates.begin(), gates.end(), [](const GateResult& g) { return g.passed; });
  }
};

inline std::optional<double> metric_value(const ExperimentResult& r, const std::string& name) {
  if (name == "acc_not") return r.attack.acc_not();
  if (name == "acc_vt") return r.attack.acc_vt();
  if (name == "acc_nvt") return r.attack.acc_nvt();
  if (name == "acc_ct") return r.attack.acc_ct();
  if (name == "tpr") return r.detection.tpr();
  if (name == "fpr") return r.detection.fpr();
  if (name == "fpr_not") return r.detection.fpr_not();
  if (name == "fpr_nvt") return r.detection.fpr_nvt();
  if (name == "precision") return r.detection.precision();
  if (name == "detection_accuracy") return r.detection.accuracy();
  if (name == "auc") return r.detection.auc;
  return std::nullopt;
}

// Runs `body`, prefixing any error with the stage name.
template <typename F>
auto stage(const char* name, F&& body) -> decltype(body()) {
  try {
    return body();
  } catch (const Error& e) {
    throw Error(e.code(), std::string("[") + name + "] " + e.message());
  } catch (const io::Json::exception& e) {
    throw Error(ErrorCode::kMalformedHeader, std::string("[") + name + "] " + e.what());
  }
}

namespace detail {

inline constexpr std::uint64_t kSplitStream = 10;
inline constexpr std::uint64_t kBankStream = 11;
inline constexpr std::uint64_t kTestStream = 12;
inline constexpr std::uint64_t kSubstituteStream = 13;
inline constexpr std::uint64_t kDataStream = 14;

inline Dataset load_data(const Recipe& r) {
  if (r.data.kind == "mnist") return load_mnist_idx(r.data.images, r.data.labels);
  return gen_blobs(SyntheticBlobSpec::axis_aligned(r.data.num_classes, r.data.input_dim,
                                                   r.data.separation, r.data.stddev,
                                                   r.data.per_class,
                                                   lab::stream_seed(r.seed, kDataStream)));
}

inline std::vector<std::size_t> take_random(std::vector<std::size_t> pool, std::size_t n,
                                            std::mt19937_64& rng) {
  std::shuffle(pool.begin(), pool.end(), rng);
  pool.resize(std::min(n, pool.size()));
  std::sort(pool.begin(), pool.end());
  return pool;
}

inline Dataset triggered(const Dataset& data, const lab::TriggerSpec& trigger,
                         const Dataset* donors = nullptr) {
  Dataset out = data;
  for (std::size_t start = 0; start < data.size(); start += lab::kEmitChunk) {
    const std::size_t end = std::min(data.size(), start + lab::kEmitChunk);
    std::vector<std::size_t> idx(end - start);
    for (std::size_t i = start; i < end; ++i) idx[i - start] = i;
    const auto x = lab::detail::batch_of(data, idx);
    nn::Matrix<float> donor_rows;
    if (donors) donor_rows = lab::detail::batch_of(*donors, idx);
    const auto y = lab::apply_trigger_batch(x, trigger, donors ? &donor_rows : nullptr);
    std::copy(y.data(), y.data() + y.size(), out.features.begin() + static_cast<long>(start * data.dim));
  }
  return out;
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  io::write_file(path.string(),
                 std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

}  // namespace detail

// Executes a recipe. When `out_dir` is non-empty, artifacts are written there:
// metrics.json, report.csv, bank_ranks.csv, roc.csv, detector.tedd,
// model.tedm (and generator.tedm), bank.tedt, detection.tedt.
inline ExperimentResult run_experiment(const Recipe& recipe, const std::filesystem::path& out_dir = {},
                                       const std::function<void(const std::string&)>& log = nullptr) {
  auto say = [&](const std::string& msg) {
    if (log) log(msg);
  };
  stage("validate", [&] { recipe.validate(); });
  const std::uint64_t seed = recipe.seed;

  // Data: stratified train split, then the bank, then the test pool.
  Dataset train, bank_pool, test_pool;
  stage("data", [&] {
    const Dataset all = detail::load_data(recipe);
    require(all.num_classes == recipe.num_classes(), ErrorCode::kInvalidArgument,
            "dataset has " + std::to_string(all.num_classes) + " classes");
    auto [tr, rest] = stratified_split(all, recipe.data.train_per_class,
                                       lab::stream_seed(seed, detail::kSplitStream));
    auto [bank, test] = stratified_split(rest, recipe.bank_per_class,
                                         lab::stream_seed(seed, detail::kBankStream));
    train = std::move(tr);
    bank_pool = std::move(bank);
    test_pool = std::move(test);
  });
  say("data: train " + std::to_string(train.size()) + ", bank " + std::to_string(bank_pool.size()) +
      ", test " + std::to_string(test_pool.size()));

  const std::vector<Label> victims = recipe.victims();
  lab::BackdoorSpec bd = recipe.backdoor;
  bd.victims = victims;
  const int c = train.num_classes;

  lab::TrainConfig cfg = recipe.train;
  cfg.seed = seed;
  cfg.architecture = recipe.architecture(train.dim, c);

  // Training / implant.
  lab::Net net;
  std::shared_ptr<const lab::GeneratorNet<float>> generator;
  stage("train", [&] {
    Dataset data = train;
    if (recipe.backdoor.substitution_ratio > 0.0) {
      data = lab::substitute_labels(data, victims.front(), bd.target, bd.substitution_ratio,
                                    lab::stream_seed(seed, detail::kSubstituteStream));
    }
    switch (recipe.attack) {
      case AttackKind::kNone: net = lab::train_clean(data, cfg).net; break;
      case AttackKind::kTact: net = lab::train_tact(data, bd, cfg).net; break;
      case AttackKind::kAdaptive: net = lab::train_adaptive(data, bd, cfg).net; break;
      case AttackKind::kSsdt: {
        auto res = lab::train_ssdt(data, bd, cfg);
        net = std::move(res.net);
        generator = std::make_shared<const lab::GeneratorNet<float>>(std::move(res.generator));
        break;
      }
    }
  });
  say("train: done");

  const bool attacked = recipe.attack != AttackKind::kNone;
  lab::TriggerSpec trigger = generator ? lab::TriggerSpec::dynamic(generator)
                                       : lab::TriggerSpec::static_patch(bd.patch);

  // Evaluation sets over the test pool.
  ExperimentResult result;
  Dataset vt = test_pool.empty_like(), nvt = test_pool.empty_like(), ct = test_pool.empty_like();
  stage("attack-eval", [&] {
    std::vector<std::size_t> victim_idx, other_idx;
    for (std::size_t i = 0; i < test_pool.size(); ++i) {
      (bd.is_victim(test_pool.labels[i]) ? victim_idx : other_idx).push_back(i);
    }
    std::vector<SampleKind> kinds;
    std::vector<Label> truth, pred;
    auto add = [&](const Dataset& d, SampleKind kind) {
      const auto p = lab::predict(net, d);
      kinds.insert(kinds.end(), d.size(), kind);
      truth.insert(truth.end(), d.labels.begin(), d.labels.end());
      pred.insert(pred.end(), p.begin(), p.end());
    };
    add(test_pool, SampleKind::kNoT);
    const auto clean_pred = lab::predict(net, test_pool);
    std::size_t vhits = 0, vtotal = 0;
    for (std::size_t i : victim_idx) {
      ++vtotal;
      vhits += clean_pred[i] == test_pool.labels[i];
    }
    if (vtotal > 0) result.victim_clean_accuracy = static_cast<double>(vhits) / static_cast<double>(vtotal);
    if (attacked) {
      vt = detail::triggered(test_pool.subset(victim_idx), trigger);
      nvt = detail::triggered(test_pool.subset(other_idx), trigger);
      add(vt, SampleKind::kVT);
      add(nvt, SampleKind::kNVT);
      if (generator) {
        std::mt19937_64 rng(lab::stream_seed(seed, detail::kTestStream) + 1);
        std::vector<std::size_t> perm = lab::detail::iota(test_pool.size());
        std::shuffle(perm.begin(), perm.end(), rng);
        const Dataset donors = test_pool.subset(perm);
        ct = detail::triggered(test_pool, trigger, &donors);
        add(ct, SampleKind::kCT);
      }
    }
    result.attack = classification_metrics(kinds, truth, pred, bd.target);
  });

  // Bank and detector.
  ReferenceBank bank;
  std::vector<RankSequence> bank_features;
  PcaDetector det;
  stage("bank", [&] {
    const ActivationTrace bank_trace =
        lab::emit_trace(net, bank_pool, std::vector<SampleKind>{SampleKind::kNoT});
    bank = make_reference_bank(bank_trace, recipe.bank_per_class,
                               lab::stream_seed(seed, detail::kBankStream));
    bank_features = topo::featurize_bank(bank, recipe.metric, recipe.radius());
  });
  stage("fit", [&] { det = PcaDetector::fit(bank_features, recipe.detector); });
  result.threshold = det.threshold();

  // Detection set: all victim-triggered samples, plus as many clean and
  // non-victim-triggered samples split evenly. Benign runs use the whole
  // clean test pool.
  Dataset detect_inputs = test_pool.empty_like();
  std::vector<SampleKind> detect_kinds;
  stage("detect", [&] {
    std::mt19937_64 rng(lab::stream_seed(seed, detail::kTestStream));
    auto append = [&](const Dataset& d, std::span<const std::size_t> idx, SampleKind kind) {
      for (std::size_t i : idx) detect_inputs.push_back(d.row(i), d.labels[i], d.ids[i]);
      detect_kinds.insert(detect_kinds.end(), idx.size(), kind);
    };
    if (attacked) {
      const std::size_t half = vt.size() / 2;
      append(test_pool, detail::take_random(lab::detail::iota(test_pool.size()), half, rng),
             SampleKind::kNoT);
      append(nvt, detail::take_random(lab::detail::iota(nvt.size()), vt.size() - half, rng),
             SampleKind::kNVT);
      append(vt, lab::detail::iota(vt.size()), SampleKind::kVT);
    } else {
      append(test_pool, lab::detail::iota(test_pool.size()), SampleKind::kNoT);
    }
  });
  ActivationTrace detect_trace;
  std::vector<RankSequence> detect_features;
  std::vector<Verdict> verdicts;
  stage("detect", [&] {
    detect_trace = lab::emit_trace(net, detect_inputs, detect_kinds);
    detect_features = topo::featurize_batch(detect_trace, bank, recipe.metric, recipe.radius(),
                                            recipe.threads);
    verdicts = det.detect(detect_features);
    std::vector<double> scores;
    for (const auto& v : verdicts) scores.push_back(v.score);
    result.detection = detection_metrics(scores, detect_kinds, det.threshold());
  });

  for (const Gate& g : recipe.gates) {
    GateResult gr{g, metric_value(result, g.metric), false};
    gr.passed = gr.value && (g.is_min ? *gr.value >= g.bound : *gr.value <= g.bound);
    result.gates.push_back(gr);
  }

  io::Json gates = io::Json::array();
  for (const auto& g : result.gates) {
    gates.push_back({{"metric", g.gate.metric},
                     {"bound", g.gate.bound},
                     {"direction", g.gate.is_min ? ">=" : "<="},
                     {"value", detail::opt(g.value)},
                     {"passed", g.passed}});
  }
  result.report = {{"recipe", recipe.source},
                   {"config",
                    {{"seed", seed},
                     {"alpha", recipe.detector.alpha},
                     {"threshold_mode", to_string(recipe.detector.mode)},
                     {"m", recipe.bank_per_class},
                     {"k", recipe.k},
                     {"radius_percent", recipe.radius().radius_percent(c, recipe.bank_per_class)},
                     {"metric", topo::to_string(recipe.metric)},
                     {"victims", victims},
                     {"target", bd.target},
                     {"rates",
                      {{"clean", bd.rates.clean},
                       {"backdoor", bd.rates.backdoor},
                       {"laundry", bd.rates.laundry},
                       {"cross", bd.rates.cross}}}}},
                   {"attack", to_json(result.attack)},
                   {"victim_clean_accuracy", detail::opt(result.victim_clean_accuracy)},
                   {"detection", to_json(result.detection)},
                   {"threshold", result.threshold},
                   {"gates", gates},
                   {"gates_passed", result.gates_passed()}};

  if (!out_dir.empty()) {
    stage("write", [&] {
      std::filesystem::create_directories(out_dir);
      detail::write_text(out_dir / "metrics.json", result.report.dump(2) + "\n");
      std::vector<io::ReportRow> rows;
      for (std::size_t i = 0; i < detect_features.size(); ++i) {
        rows.push_back({detect_trace.samples[i].sample_id, detect_kinds[i],
                        detect_trace.samples[i].predicted_label, verdicts[i].score,
                        verdicts[i].malicious, detect_features[i].features()});
      }
      io::write_report_csv((out_dir / "report.csv").string(), rows, bank.taps.size(), recipe.k);
      detail::write_text(out_dir / "bank_ranks.csv",
                         topo::format_rank_csv(bank_features, bank.taps.size(), recipe.k));
      detail::write_text(out_dir / "roc.csv", format_roc_csv(result.detection.roc));
      det.save((out_dir / "detector.tedd").string());
      lab::save_classifier((out_dir / "model.tedm").string(), net,
                           {{"recipe", recipe.name}, {"target", bd.target}, {"victims", victims}});
      if (generator) lab::save_generator((out_dir / "generator.tedm").string(), *generator);
      io::write_bank(bank, (out_dir / "bank.tedt").string());
      io::write_trace(detect_trace, (out_dir / "detection.tedt").string());
    });
  }
  return result;
}

}  // namespace toporank
