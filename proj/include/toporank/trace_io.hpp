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

// TEDTRACE files.
//
// Header (compact JSON, keys sorted):
//   {"label_space":{"class_names":[...],"num_classes":c},
//    "sample_count":n,
//    "samples":[{"id":..,"kind":"NoT","predicted_label":..,"true_label":..|null},...],
//    "taps":[{"dim":..,"kind":"linear","name":"..","tap_id":..},...]}
// Payload: for each sample (header order), for each tap (tap order), `dim`
// little-endian binary32 values. No padding.
//
// A reference bank is stored as a trace with an extra "bank" header object
// ({"per_class_count": m}); entries become samples in ref_index order.

#pragma once

#include <cstdint>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "toporank/container.hpp"
#include "toporank/core_types.hpp"

namespace toporank::io {

inline constexpr std::string_view kTraceMagic = "TEDT";
inline constexpr std::uint32_t kTraceVersion = 1;

namespace detail {

inline Json trace_header(const ActivationTrace& trace) {
  Json label_space = {{"num_classes", trace.label_space.num_classes},
                      {"class_names", trace.label_space.class_names}};
  Json taps = Json::array();
  for (const LayerTap& t : trace.taps) {
    taps.push_back(
        {{"tap_id", t.tap_id}, {"name", t.name}, {"dim", t.dim}, {"kind", to_string(t.kind)}});
  }
  Json samples = Json::array();
  for (const TraceSample& s : trace.samples) {
    Json rec = {{"id", s.sample_id},
                {"predicted_label", s.predicted_label},
                {"kind", to_string(s.kind)},
                {"true_label", nullptr}};
    if (s.true_label) rec["true_label"] = *s.true_label;
    samples.push_back(std::move(rec));
  }
  return {{"label_space", std::move(label_space)},
          {"taps", std::move(taps)},
          {"sample_count", trace.samples.size()},
          {"samples", std::move(samples)}};
}

inline ActivationTrace decode_trace(const Unframed& file) {
  ActivationTrace trace = with_header_errors([&] {
    ActivationTrace t;
    const Json& h = file.header;
    const Json& ls = h.at("label_space");
    const int c = ls.at("num_classes").get<int>();
    require(c >= 2, ErrorCode::kMalformedHeader, "num_classes must be >= 2");
    auto names = ls.contains("class_names") ? ls.at("class_names").get<std::vector<std::string>>()
                                            : std::vector<std::string>{};
    require(names.empty() || static_cast<int>(names.size()) == c, ErrorCode::kMalformedHeader,
            "class_names length mismatch");
    t.label_space = LabelSpace(c, std::move(names));

    for (const Json& jt : h.at("taps")) {
      LayerTap tap;
      tap.tap_id = jt.at("tap_id").get<int>();
      tap.name = jt.at("name").get<std::string>();
      tap.dim = jt.at("dim").get<std::size_t>();
      require(tap.dim > 0, ErrorCode::kMalformedHeader, "tap dim must be positive");
      try {
        tap.kind = parse_tap_kind(jt.at("kind").get<std::string>());
      } catch (const Error& e) {
        fail(ErrorCode::kMalformedHeader, e.what());
      }
      t.taps.push_back(std::move(tap));
    }

    const Json& js = h.at("samples");
    require(js.is_array(), ErrorCode::kMalformedHeader, "samples must be an array");
    require(h.at("sample_count").get<std::size_t>() == js.size(), ErrorCode::kMalformedHeader,
            "sample_count disagrees with samples array");
    t.samples.reserve(js.size());
    for (const Json& rec : js) {
      TraceSample s;
      s.sample_id = rec.at("id").get<std::uint64_t>();
      s.predicted_label = rec.at("predicted_label").get<Label>();
      const Json& tl = rec.at("true_label");
      if (!tl.is_null()) s.true_label = tl.get<Label>();
      try {
        s.kind = parse_sample_kind(rec.at("kind").get<std::string>());
      } catch (const Error& e) {
        fail(ErrorCode::kMalformedHeader, e.what());
      }
      t.samples.push_back(std::move(s));
    }
    return t;
  });

  std::uint64_t floats_per_sample = 0;
  for (const LayerTap& tap : trace.taps) floats_per_sample = checked_add(floats_per_sample, tap.dim);
  const std::uint64_t expected =
      checked_mul(checked_mul(floats_per_sample, trace.samples.size()), sizeof(float));
  require_payload_size(file.payload, expected);

  const std::uint8_t* cursor = file.payload.data();
  for (TraceSample& s : trace.samples) {
    s.activations.resize(trace.taps.size());
    for (std::size_t t = 0; t < trace.taps.size(); ++t) {
      auto& v = s.activations[t];
      v.resize(trace.taps[t].dim);
      for (float& x : v) {
        x = get_le<float>(cursor);
        cursor += sizeof(float);
      }
    }
  }
  return trace;
}

inline std::vector<std::uint8_t> trace_payload(const ActivationTrace& trace) {
  std::vector<std::uint8_t> payload;
  std::size_t floats = 0;
  for (const LayerTap& tap : trace.taps) floats += tap.dim;
  payload.reserve(floats * trace.samples.size() * sizeof(float));
  for (const TraceSample& s : trace.samples) {
    require(s.activations.size() == trace.taps.size(), ErrorCode::kTapMismatch,
            "sample " + std::to_string(s.sample_id) + " has wrong tap count");
    for (std::size_t t = 0; t < trace.taps.size(); ++t) {
      require(s.activations[t].size() == trace.taps[t].dim, ErrorCode::kDimMismatch,
              "sample " + std::to_string(s.sample_id) + " tap '" + trace.taps[t].name +
                  "' has wrong dim");
      for (float x : s.activations[t]) put_le<float>(payload, x);
    }
  }
  return payload;
}

}  // namespace detail

inline std::vector<std::uint8_t> encode_trace(const ActivationTrace& trace) {
  return frame(kTraceMagic, kTraceVersion, detail::trace_header(trace),
               detail::trace_payload(trace));
}

inline ActivationTrace decode_trace(std::span<const std::uint8_t> bytes) {
  return detail::decode_trace(unframe(bytes, kTraceMagic, kTraceVersion));
}

inline void write_trace(const ActivationTrace& trace, const std::string& path) {
  write_file(path, encode_trace(trace));
}

inline ActivationTrace read_trace(const std::string& path) {
  return decode_trace(read_file(path));
}

inline std::vector<std::uint8_t> encode_bank(const ReferenceBank& bank) {
  check_bank(bank);
  ActivationTrace trace;
  trace.label_space = bank.label_space;
  trace.taps = bank.taps;
  for (const BankEntry& e : bank.entries) {
    trace.samples.push_back(
        {e.source_sample_id, e.class_label, e.predicted_label, SampleKind::kNoT, e.activations});
  }
  Json header = detail::trace_header(trace);
  header["bank"] = {{"per_class_count", bank.per_class_count}};
  return frame(kTraceMagic, kTraceVersion, header, detail::trace_payload(trace));
}

inline ReferenceBank decode_bank(std::span<const std::uint8_t> bytes) {
  const Unframed file = unframe(bytes, kTraceMagic, kTraceVersion);
  const std::size_t m = with_header_errors(
      [&] { return file.header.at("bank").at("per_class_count").get<std::size_t>(); });
  ActivationTrace trace = detail::decode_trace(file);
  ReferenceBank bank;
  bank.label_space = trace.label_space;
  bank.per_class_count = m;
  bank.taps = trace.taps;
  for (TraceSample& s : trace.samples) {
    require(s.true_label.has_value(), ErrorCode::kMalformedHeader, "bank entry without class");
    bank.entries.push_back({bank.entries.size(), *s.true_label, s.predicted_label, s.sample_id,
                            std::move(s.activations)});
  }
  check_bank(bank);
  return bank;
}

inline void write_bank(const ReferenceBank& bank, const std::string& path) {
  write_file(path, encode_bank(bank));
}

inline ReferenceBank read_bank(const std::string& path) { return decode_bank(read_file(path)); }

// One row of the per-sample detection report.
struct ReportRow {
  std::uint64_t sample_id = 0;
  SampleKind kind = SampleKind::kUnknown;
  Label predicted_label = 0;
  double anomaly_score = 0.0;
  bool malicious = false;
  std::vector<double> features;  // K_1..K_N (or tap-major k-NN ranks)
};

// Columns: sample_id,kind,predicted_label,anomaly_score,verdict,K_1..K_N.
// In k-NN mode (k > 1) feature columns are named K_<tap>_<j>.
inline std::string format_report_csv(const std::vector<ReportRow>& rows, std::size_t num_taps,
                                     std::size_t k = 1) {
  std::ostringstream out;
  out << "sample_id,kind,predicted_label,anomaly_score,verdict";
  for (std::size_t l = 1; l <= num_taps; ++l) {
    if (k == 1) {
      out << ",K_" << l;
    } else {
      for (std::size_t j = 1; j <= k; ++j) out << ",K_" << l << '_' << j;
    }
  }
  out << '\n';
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (const ReportRow& r : rows) {
    out << r.sample_id << ',' << to_string(r.kind) << ',' << r.predicted_label << ','
        << r.anomaly_score << ',' << (r.malicious ? "malicious" : "benign");
    for (double f : r.features) out << ',' << f;
    out << '\n';
  }
  return out.str();
}

inline void write_report_csv(const std::string& path, const std::vector<ReportRow>& rows,
                             std::size_t num_taps, std::size_t k = 1) {
  const std::string text = format_report_csv(rows, num_taps, k);
  write_file(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

// Reads back a report written by write_report_csv (used by `eval`).
inline std::vector<ReportRow> read_report_csv(const std::string& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorCode::kIo, "cannot open '" + path + "'");
  std::string line;
  require(static_cast<bool>(std::getline(in, line)), ErrorCode::kMalformedHeader,
          "empty report file");
  std::vector<ReportRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) cells.push_back(cell);
    require(cells.size() >= 5, ErrorCode::kMalformedHeader, "short report row: " + line);
    ReportRow r;
    try {
      r.sample_id = std::stoull(cells[0]);
      r.kind = parse_sample_kind(cells[1]);
      r.predicted_label = std::stoi(cells[2]);
      r.anomaly_score = std::stod(cells[3]);
      r.malicious = cells[4] == "malicious";
      for (std::size_t i = 5; i < cells.size(); ++i) r.features.push_back(std::stod(cells[i]));
    } catch (const std::logic_error& e) {
      fail(ErrorCode::kMalformedHeader, "bad report row '" + line + "': " + e.what());
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

}  // namespace toporank::io
