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

// toporank: command-line front end.
//
//   gen-data  write a dataset (MNIST IDX subset or synthetic blobs) as a trace
//   train     train a clean classifier
//   attack    implant a backdoor (tact | ssdt | adaptive)
//   trace     record every layer's activations for a dataset
//   bank      draw an m-per-class reference bank from a trace
//   fit       fit the detector on a bank's rank features
//   detect    score a trace, write the per-sample report
//   eval      detection metrics (and gates) from a report
//   run       execute a JSON recipe end to end
//
// Exit status is 0 only when the command succeeds and every requested gate
// passes.

#include <CLI11.hpp>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <memory>
#include <sstream>

#include "toporank/toporank.hpp"

namespace fs = std::filesystem;
using namespace toporank;

namespace {

constexpr int kGateFailure = 3;

std::vector<std::size_t> parse_sizes(const std::string& csv) {
  std::vector<std::size_t> out;
  std::stringstream ss(csv);
  for (std::string cell; std::getline(ss, cell, ',');) {
    if (!cell.empty()) out.push_back(std::stoul(cell));
  }
  return out;
}

std::vector<Label> parse_labels(const std::string& csv) {
  std::vector<Label> out;
  for (std::size_t v : parse_sizes(csv)) out.push_back(static_cast<Label>(v));
  return out;
}

// "row,col,size[,value]" on a 28x28 image (or --image-size).
lab::StaticPatch parse_patch(const std::string& spec, std::size_t side) {
  std::stringstream ss(spec);
  std::vector<double> v;
  for (std::string cell; std::getline(ss, cell, ',');) v.push_back(std::stod(cell));
  require(v.size() == 3 || v.size() == 4, ErrorCode::kInvalidArgument,
          "--patch expects row,col,size[,value]");
  return lab::StaticPatch::square(side, side, static_cast<std::size_t>(v[0]),
                                  static_cast<std::size_t>(v[1]), static_cast<std::size_t>(v[2]),
                                  v.size() == 4 ? static_cast<float>(v[3]) : 1.0f);
}

std::vector<nn::LayerSpec> mlp(std::size_t in, const std::vector<std::size_t>& hidden, int classes) {
  std::vector<nn::LayerSpec> out;
  for (std::size_t h : hidden) {
    out.push_back(nn::LayerSpec::dense(in, h, true));
    in = h;
  }
  out.push_back(nn::LayerSpec::dense(in, static_cast<std::size_t>(classes), false));
  return out;
}

void print_json(const io::Json& j) { std::cout << j.dump(2) << "\n"; }

struct TrainFlags {
  std::string data, out, hidden = "128";
  std::size_t iterations = 1000, batch = 32;
  float lr = 0.01f, momentum = 0.9f;
  std::uint64_t seed = 0;

  void add(CLI::App* app) {
    app->add_option("--data", data, "dataset trace (gen-data output)")->required();
    app->add_option("--out", out, "model checkpoint to write")->required();
    app->add_option("--hidden", hidden, "comma-separated hidden widths")->capture_default_str();
    app->add_option("--iterations", iterations)->capture_default_str();
    app->add_option("--batch-size", batch)->capture_default_str();
    app->add_option("--learning-rate", lr)->capture_default_str();
    app->add_option("--momentum", momentum)->capture_default_str();
    app->add_option("--seed", seed)->capture_default_str();
  }

  lab::TrainConfig config(const Dataset& d) const {
    lab::TrainConfig cfg;
    cfg.architecture = mlp(d.dim, parse_sizes(hidden), d.num_classes);
    cfg.iterations = iterations;
    cfg.batch_size = batch;
    cfg.learning_rate = lr;
    cfg.momentum = momentum;
    cfg.seed = seed;
    return cfg;
  }
};

// Shared by fit/detect/run.
struct FeatureFlags {
  std::string metric = "euclidean";
  std::size_t k = 1;
  unsigned threads = 1;

  void add(CLI::App* app) {
    app->add_option("--metric", metric, "euclidean | cosine")->capture_default_str();
    app->add_option("--k", k, "k-NN ranks per layer (1 = nearest only)")->capture_default_str();
    app->add_option("--threads", threads)->capture_default_str();
  }
  topo::RadiusConfig radius() const {
    return k == 1 ? topo::RadiusConfig::nearest() : topo::RadiusConfig::knn(k);
  }
};

struct GateFlags {
  std::vector<std::string> min, max;

  void add(CLI::App* app) {
    app->add_option("--min", min, "gate metric=bound (metric >= bound)");
    app->add_option("--max", max, "gate metric=bound (metric <= bound)");
  }

  std::vector<Gate> gates() const {
    std::vector<Gate> out;
    auto parse = [&](const std::string& s, bool is_min) {
      const auto eq = s.find('=');
      require(eq != std::string::npos, ErrorCode::kInvalidArgument, "gate must be metric=bound");
      out.push_back({s.substr(0, eq), std::stod(s.substr(eq + 1)), is_min});
    };
    for (const auto& s : min) parse(s, true);
    for (const auto& s : max) parse(s, false);
    return out;
  }
};

bool report_gates(const std::vector<GateResult>& gates) {
  bool ok = true;
  for (const auto& g : gates) {
    std::cout << (g.passed ? "PASS " : "FAIL ") << g.gate.metric << (g.gate.is_min ? " >= " : " <= ")
              << g.gate.bound << " (value: " << (g.value ? std::to_string(*g.value) : "n/a")
              << ")\n";
    ok = ok && g.passed;
  }
  return ok;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Backdoor-sample detection from layer-wise nearest-neighbor ranks"};
  app.require_subcommand(1);

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "write a dataset as a single-tap trace");
  std::string gen_kind = "blobs", gen_images, gen_labels, gen_out;
  std::size_t gen_take = 0, gen_classes = 4, gen_dim = 16, gen_per_class = 100;
  double gen_sep = 10.0, gen_std = 1.0;
  std::uint64_t gen_seed = 0;
  gen->add_option("--kind", gen_kind, "blobs | mnist")->capture_default_str();
  gen->add_option("--images", gen_images, "MNIST images IDX file");
  gen->add_option("--labels", gen_labels, "MNIST labels IDX file");
  gen->add_option("--take", gen_take, "stratified subsample size (mnist; 0 = all)");
  gen->add_option("--classes", gen_classes)->capture_default_str();
  gen->add_option("--dim", gen_dim)->capture_default_str();
  gen->add_option("--per-class", gen_per_class)->capture_default_str();
  gen->add_option("--separation", gen_sep, "distance between class means in stddevs")->capture_default_str();
  gen->add_option("--stddev", gen_std)->capture_default_str();
  gen->add_option("--seed", gen_seed)->capture_default_str();
  gen->add_option("--out", gen_out)->required();

  // train
  auto* train = app.add_subcommand("train", "train a clean classifier");
  TrainFlags train_flags;
  train_flags.add(train);

  // attack
  auto* attack = app.add_subcommand("attack", "train a backdoored classifier");
  TrainFlags attack_flags;
  attack_flags.add(attack);
  std::string attack_kind = "tact", attack_victims, attack_patch = "23,23,4,1", attack_generator_out,
              attack_loss = "L1";
  int attack_target = 0;
  double attack_poison = 0.1, attack_lambda = 1.0, attack_substitution = 0.0;
  std::size_t attack_side = 28, attack_k_shallow = 1, attack_gen_hidden = 64;
  float attack_eps = 0.2f;
  attack->add_option("--kind", attack_kind, "tact | ssdt | adaptive")->capture_default_str();
  attack->add_option("--target", attack_target)->capture_default_str();
  attack->add_option("--victims", attack_victims, "comma-separated victim classes (default target+1)");
  attack->add_option("--poison-rate", attack_poison)->capture_default_str();
  attack->add_option("--patch", attack_patch, "row,col,size[,value]")->capture_default_str();
  attack->add_option("--image-size", attack_side)->capture_default_str();
  attack->add_option("--epsilon", attack_eps, "dynamic trigger budget")->capture_default_str();
  attack->add_option("--generator-hidden", attack_gen_hidden)->capture_default_str();
  attack->add_option("--generator-out", attack_generator_out, "generator checkpoint (ssdt)");
  attack->add_option("--loss", attack_loss, "adaptive loss: L1 | L2 | L3")->capture_default_str();
  attack->add_option("--lambda", attack_lambda)->capture_default_str();
  attack->add_option("--k-shallow", attack_k_shallow)->capture_default_str();
  attack->add_option("--substitution-ratio", attack_substitution)->capture_default_str();

  // trace
  auto* trace = app.add_subcommand("trace", "record per-layer activations");
  std::string trace_model, trace_data, trace_out, trace_patch, trace_generator, trace_only = "all";
  std::size_t trace_side = 28;
  trace->add_option("--model", trace_model)->required();
  trace->add_option("--data", trace_data)->required();
  trace->add_option("--out", trace_out)->required();
  trace->add_option("--patch", trace_patch, "apply a static trigger row,col,size[,value]");
  trace->add_option("--image-size", trace_side)->capture_default_str();
  trace->add_option("--generator", trace_generator, "apply a dynamic trigger from this checkpoint");
  trace->add_option("--only", trace_only, "all | victims | others (triggered runs)")->capture_default_str();

  // bank
  auto* bank = app.add_subcommand("bank", "draw a reference bank");
  std::string bank_trace, bank_out;
  std::size_t bank_m = 20;
  std::uint64_t bank_seed = 0;
  bank->add_option("--trace", bank_trace, "trace of clean samples")->required();
  bank->add_option("--m", bank_m, "samples per class")->capture_default_str();
  bank->add_option("--seed", bank_seed)->capture_default_str();
  bank->add_option("--out", bank_out)->required();

  // fit
  auto* fit = app.add_subcommand("fit", "fit the detector on bank rank features");
  std::string fit_bank, fit_out, fit_mode = "quantile", fit_ranks;
  double fit_alpha = 0.05, fit_mult = 4.0;
  FeatureFlags fit_features;
  fit->add_option("--bank", fit_bank)->required();
  fit->add_option("--out", fit_out)->required();
  fit->add_option("--alpha", fit_alpha, "reject rate")->capture_default_str();
  fit->add_option("--threshold-mode", fit_mode, "quantile | zscore")->capture_default_str();
  fit->add_option("--zscore-multiplier", fit_mult)->capture_default_str();
  fit->add_option("--ranks-csv", fit_ranks, "also dump the bank's rank features");
  fit_features.add(fit);

  // detect
  auto* detect = app.add_subcommand("detect", "score samples");
  std::string detect_detector, detect_bank, detect_trace, detect_out;
  FeatureFlags detect_features;
  detect->add_option("--detector", detect_detector)->required();
  detect->add_option("--bank", detect_bank)->required();
  detect->add_option("--trace", detect_trace)->required();
  detect->add_option("--out", detect_out, "report CSV")->required();
  detect_features.add(detect);

  // eval
  auto* eval = app.add_subcommand("eval", "detection metrics from a report");
  std::string eval_report, eval_roc;
  GateFlags eval_gates;
  eval->add_option("--report", eval_report)->required();
  eval->add_option("--roc", eval_roc, "write ROC points as CSV");
  eval_gates.add(eval);

  // run
  auto* run = app.add_subcommand("run", "execute a recipe end to end");
  std::string run_recipe, run_out, run_mode;
  std::optional<std::uint64_t> run_seed;
  std::optional<double> run_alpha;
  std::optional<std::size_t> run_m, run_k;
  std::optional<std::string> run_metric;
  std::optional<unsigned> run_threads;
  run->add_option("recipe", run_recipe, "recipe JSON")->required();
  run->add_option("--out", run_out, "artifacts directory (default $TOPORANK_ARTIFACTS/<name>)");
  run->add_option("--seed", run_seed);
  run->add_option("--alpha", run_alpha);
  run->add_option("--m", run_m, "bank samples per class");
  run->add_option("--k", run_k);
  run->add_option("--metric", run_metric);
  run->add_option("--threshold-mode", run_mode);
  run->add_option("--threads", run_threads);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) {
      Dataset d;
      if (gen_kind == "mnist") {
        d = load_mnist_idx(gen_images, gen_labels,
                           gen_take ? std::optional<std::size_t>(gen_take) : std::nullopt, gen_seed);
      } else {
        d = gen_blobs(SyntheticBlobSpec::axis_aligned(static_cast<int>(gen_classes), gen_dim, gen_sep,
                                                      gen_std, gen_per_class, gen_seed));
      }
      io::write_trace(dataset_to_trace(d), gen_out);
      std::cout << "wrote " << d.size() << " samples of dim " << d.dim << " to " << gen_out << "\n";
    } else if (*train) {
      const Dataset d = trace_to_dataset(io::read_trace(train_flags.data));
      const auto res = lab::train_clean(d, train_flags.config(d));
      lab::save_classifier(train_flags.out, res.net, {{"attack", "none"}});
      std::cout << "final loss " << (res.loss_history.empty() ? 0.0f : res.loss_history.back()) << "\n";
    } else if (*attack) {
      const Dataset d = trace_to_dataset(io::read_trace(attack_flags.data));
      lab::BackdoorSpec bd;
      bd.target = attack_target;
      bd.victims = attack_victims.empty()
                       ? std::vector<Label>{(attack_target + 1) % d.num_classes}
                       : parse_labels(attack_victims);
      bd.poison_rate = attack_poison;
      bd.rates = lab::TaskRates::defaults(d.num_classes);
      bd.substitution_ratio = attack_substitution;
      const auto cfg = attack_flags.config(d);
      Dataset data = d;
      if (attack_substitution > 0.0) {
        data = lab::substitute_labels(d, bd.victims->front(), bd.target, attack_substitution,
                                      attack_flags.seed);
      }
      io::Json meta = {{"attack", attack_kind}, {"target", bd.target}, {"victims", *bd.victims}};
      if (attack_kind == "ssdt") {
        bd.trigger = lab::TriggerKind::kDynamicGenerator;
        bd.generator = {attack_gen_hidden, attack_eps};
        const auto res = lab::train_ssdt(data, bd, cfg);
        lab::save_classifier(attack_flags.out, res.net, meta);
        if (!attack_generator_out.empty()) lab::save_generator(attack_generator_out, res.generator);
      } else {
        bd.patch = parse_patch(attack_patch, attack_side);
        meta["patch"] = lab::patch_to_json(bd.patch);
        lab::TrainResult res;
        if (attack_kind == "adaptive") {
          bd.adaptive = lab::AdaptiveConfig{lab::parse_adaptive_loss(attack_loss), attack_lambda,
                                            attack_k_shallow, 16};
          res = lab::train_adaptive(data, bd, cfg);
        } else {
          require(attack_kind == "tact", ErrorCode::kInvalidArgument,
                  "unknown attack kind '" + attack_kind + "'");
          res = lab::train_tact(data, bd, cfg);
        }
        lab::save_classifier(attack_flags.out, res.net, meta);
      }
      std::cout << "wrote " << attack_flags.out << "\n";
    } else if (*trace) {
      const auto model = lab::load_classifier(trace_model);
      Dataset d = trace_to_dataset(io::read_trace(trace_data));
      std::vector<SampleKind> kinds(d.size(), SampleKind::kNoT);
      const bool triggered = !trace_patch.empty() || !trace_generator.empty();
      if (triggered) {
        lab::TriggerSpec trig;
        if (!trace_generator.empty()) {
          trig = lab::TriggerSpec::dynamic(
              std::make_shared<const lab::GeneratorNet<float>>(lab::load_generator(trace_generator)));
        } else {
          trig = lab::TriggerSpec::static_patch(parse_patch(trace_patch, trace_side));
        }
        lab::BackdoorSpec bd;
        bd.target = model.metadata.value("target", 0);
        if (model.metadata.contains("victims")) bd.victims = model.metadata.at("victims").get<std::vector<Label>>();
        std::vector<std::size_t> keep;
        for (std::size_t i = 0; i < d.size(); ++i) {
          const bool v = bd.is_victim(d.labels[i]);
          if (trace_only == "all" || (trace_only == "victims") == v) keep.push_back(i);
        }
        d = d.subset(keep);
        kinds.clear();
        for (Label y : d.labels) kinds.push_back(bd.is_victim(y) ? SampleKind::kVT : SampleKind::kNVT);
        const auto x = lab::detail::batch_of(d, lab::detail::iota(d.size()));
        const auto y = lab::apply_trigger_batch(x, trig);
        std::copy(y.data(), y.data() + y.size(), d.features.begin());
      }
      io::write_trace(lab::emit_trace(model.net, d, kinds), trace_out);
      std::cout << "wrote " << d.size() << " samples to " << trace_out << "\n";
    } else if (*bank) {
      const auto t = io::read_trace(bank_trace);
      io::write_bank(make_reference_bank(t, bank_m, bank_seed), bank_out);
      std::cout << "wrote bank of " << bank_m << " per class to " << bank_out << "\n";
    } else if (*fit) {
      const auto b = io::read_bank(fit_bank);
      const auto feats = topo::featurize_bank(b, topo::parse_metric(fit_features.metric),
                                              fit_features.radius());
      const auto det =
          PcaDetector::fit(feats, {fit_alpha, parse_threshold_mode(fit_mode), fit_mult});
      det.save(fit_out);
      if (!fit_ranks.empty()) {
        const auto text = topo::format_rank_csv(feats, b.taps.size(), fit_features.k);
        io::write_file(fit_ranks, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
      }
      std::cout << "threshold " << det.threshold() << " over " << det.components() << " components\n";
    } else if (*detect) {
      const auto det = PcaDetector::load(detect_detector);
      const auto b = io::read_bank(detect_bank);
      const auto t = io::read_trace(detect_trace);
      const auto feats = topo::featurize_batch(t, b, topo::parse_metric(detect_features.metric),
                                               detect_features.radius(), detect_features.threads);
      std::vector<io::ReportRow> rows;
      std::size_t flagged = 0;
      for (std::size_t i = 0; i < feats.size(); ++i) {
        const auto v = det.classify(feats[i]);
        flagged += v.malicious;
        rows.push_back({t.samples[i].sample_id, t.samples[i].kind, t.samples[i].predicted_label,
                        v.score, v.malicious, feats[i].features()});
      }
      io::write_report_csv(detect_out, rows, t.taps.size(), detect_features.k);
      std::cout << flagged << " of " << rows.size() << " samples flagged\n";
    } else if (*eval) {
      const auto rows = io::read_report_csv(eval_report);
      // Verdicts are already in the report; rebuild the threshold-free parts
      // from scores and the confusion counts from verdicts.
      std::vector<double> scores;
      std::vector<SampleKind> kinds;
      for (const auto& r : rows) {
        scores.push_back(r.malicious ? 1.0 : 0.0);
        kinds.push_back(r.kind);
      }
      DetectionMetrics m = detection_metrics(scores, kinds, 0.5);
      scores.clear();
      for (const auto& r : rows) scores.push_back(r.anomaly_score);
      const DetectionMetrics by_score = detection_metrics(scores, kinds, 0.0);
      m.auc = by_score.auc;
      m.roc = by_score.roc;
      print_json(to_json(m));
      if (!eval_roc.empty()) {
        const auto text = format_roc_csv(m.roc);
        io::write_file(eval_roc, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
      }
      ExperimentResult r;
      r.detection = m;
      std::vector<GateResult> results;
      for (const Gate& g : eval_gates.gates()) {
        GateResult gr{g, metric_value(r, g.metric), false};
        gr.passed = gr.value && (g.is_min ? *gr.value >= g.bound : *gr.value <= g.bound);
        results.push_back(gr);
      }
      if (!report_gates(results)) return kGateFailure;
    } else if (*run) {
      Recipe recipe = Recipe::load(run_recipe);
      if (run_seed) recipe.seed = *run_seed;
      if (run_alpha) recipe.detector.alpha = *run_alpha;
      if (run_m) recipe.bank_per_class = *run_m;
      if (run_k) recipe.k = *run_k;
      if (run_metric) recipe.metric = topo::parse_metric(*run_metric);
      if (!run_mode.empty()) recipe.detector.mode = parse_threshold_mode(run_mode);
      if (run_threads) recipe.threads = *run_threads;
      fs::path out = run_out;
      if (out.empty()) {
        const char* root = std::getenv("TOPORANK_ARTIFACTS");
        out = fs::path(root ? root : "artifacts") / recipe.name;
      }
      const auto t0 = std::chrono::steady_clock::now();
      const auto result = run_experiment(recipe, out, [](const std::string& s) { std::cerr << s << "\n"; });
      const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      print_json({{"attack", result.report.at("attack")}, {"detection", result.report.at("detection")}});
      std::cerr << "artifacts in " << out.string() << " (" << secs << " s)\n";
      if (!report_gates(result.gates)) return kGateFailure;
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
