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

#include <cstring>
#include <filesystem>
#include <limits>

#include "test_util.hpp"

namespace toporank {
namespace {

using testing::error_of;

// Bit-level equality: NaN-free traces compare with ==, but -0.0 == 0.0, so
// compare the encoded floats too.
bool bit_identical(const ActivationTrace& a, const ActivationTrace& b) {
  if (!(a == b)) return false;
  for (std::size_t s = 0; s < a.samples.size(); ++s) {
    for (std::size_t t = 0; t < a.taps.size(); ++t) {
      const auto& x = a.samples[s].activations[t];
      const auto& y = b.samples[s].activations[t];
      if (std::memcmp(x.data(), y.data(), x.size() * sizeof(float)) != 0) return false;
    }
  }
  return true;
}

std::uint32_t header_length(const std::vector<std::uint8_t>& bytes) {
  return io::get_le<std::uint32_t>(bytes.data() + 8);
}

ActivationTrace golden_trace() {
  ActivationTrace t;
  t.label_space = LabelSpace(3, {"zero", "one", "two"});
  t.taps = {{1, "conv1", 3, TapKind::kConv}, {2, "dense1", 2, TapKind::kLinear}};
  auto f = [](double x) { return static_cast<float>(x); };
  t.samples.push_back({7, 0, 0, SampleKind::kNoT, {{f(0.0), f(-0.0), f(1.5)}, {f(3.1415927), f(-2.25)}}});
  t.samples.push_back({std::numeric_limits<std::uint64_t>::max(), std::nullopt, 2, SampleKind::kVT,
                       {{f(1e-38), f(-1e30), f(0.1)}, {f(65504.0), f(1.0 / 3.0)}}});
  t.samples.push_back({42, 1, 2, SampleKind::kNVT, {{f(1e-45), f(2.0), f(-7.75)}, {f(0.5), f(100.0)}}});
  return t;
}

TEST(TraceFile, EmptyTraceHasPrefixHeaderAndNoPayload) {
  ActivationTrace t;
  t.label_space = LabelSpace(2);
  t.taps = {{1, "dense1", 4, TapKind::kLinear}};
  const auto bytes = io::encode_trace(t);
  ASSERT_GE(bytes.size(), 12u);
  EXPECT_EQ(std::memcmp(bytes.data(), "TEDT", 4), 0);
  EXPECT_EQ(io::get_le<std::uint32_t>(bytes.data() + 4), 1u);
  EXPECT_EQ(bytes.size(), 12u + header_length(bytes));
  EXPECT_TRUE(bit_identical(io::decode_trace(bytes), t));
}

TEST(TraceFile, PayloadLengthIsSumOfDimsTimesFour) {
  ActivationTrace t;
  t.label_space = LabelSpace(2);
  t.taps = {{1, "a", 3, TapKind::kConv}, {2, "b", 2, TapKind::kRelu}};
  t.samples.push_back({1, 0, 1, SampleKind::kNoT, {{1, 2, 3}, {4, 5}}});
  const auto bytes = io::encode_trace(t);
  EXPECT_EQ(bytes.size() - 12 - header_length(bytes), 20u);
  // Sample-major, then tap order, little-endian binary32.
  const std::uint8_t* payload = bytes.data() + 12 + header_length(bytes);
  for (int i = 0; i < 5; ++i) EXPECT_EQ(io::get_le<float>(payload + 4 * i), static_cast<float>(i + 1));
}

TEST(TraceFile, RoundTripIsIdentityOnRandomTraces) {
  std::mt19937_64 rng(11);
  for (int round = 0; round < 200; ++round) {
    std::vector<std::size_t> dims(1 + rng() % 4);
    for (auto& d : dims) d = 1 + rng() % 9;
    const auto t = testing::random_trace(rng, 2 + static_cast<int>(rng() % 6), dims, rng() % 12);
    const auto bytes = io::encode_trace(t);
    const auto back = io::decode_trace(bytes);
    ASSERT_TRUE(bit_identical(back, t)) << "round " << round;
    EXPECT_EQ(io::encode_trace(back), bytes);
  }
}

TEST(TraceFile, WriteReadThroughDisk) {
  std::mt19937_64 rng(12);
  const auto t = testing::random_trace(rng, 4, {5, 3}, 17);
  const auto path = std::filesystem::temp_directory_path() / "toporank_trace_io_test.tedt";
  io::write_trace(t, path.string());
  EXPECT_TRUE(bit_identical(io::read_trace(path.string()), t));
  std::filesystem::remove(path);
  EXPECT_EQ(error_of([&] { io::read_trace(path.string()); }), ErrorCode::kIo);
}

TEST(TraceFile, TruncationAtEveryByteIsATypedError) {
  std::mt19937_64 rng(13);
  const auto t = testing::random_trace(rng, 3, {3, 2}, 4);
  const auto bytes = io::encode_trace(t);
  const std::size_t header_end = 12 + header_length(bytes);
  for (std::size_t n = 0; n < bytes.size(); ++n) {
    const std::span<const std::uint8_t> cut(bytes.data(), n);
    const ErrorCode code = error_of([&] { io::decode_trace(cut); });
    if (n >= header_end) {
      EXPECT_EQ(code, ErrorCode::kTruncated) << "cut at " << n;
    } else {
      EXPECT_TRUE(code == ErrorCode::kTruncated || code == ErrorCode::kMalformedHeader)
          << "cut at " << n << ": " << error_code_name(code);
    }
  }
}

TEST(TraceFile, DistinctErrors) {
  std::mt19937_64 rng(14);
  const auto bytes = io::encode_trace(testing::random_trace(rng, 3, {2}, 2));

  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  EXPECT_EQ(error_of([&] { io::decode_trace(bad_magic); }), ErrorCode::kBadMagic);

  auto bad_version = bytes;
  bad_version[4] = 2;
  EXPECT_EQ(error_of([&] { io::decode_trace(bad_version); }), ErrorCode::kVersionMismatch);

  auto trailing = bytes;
  trailing.push_back(0);
  EXPECT_EQ(error_of([&] { io::decode_trace(trailing); }), ErrorCode::kTrailingBytes);

  auto broken_json = bytes;
  broken_json[12] = '[';
  EXPECT_EQ(error_of([&] { io::decode_trace(broken_json); }), ErrorCode::kMalformedHeader);

  // A well-formed JSON object missing required keys.
  const auto no_taps = io::frame("TEDT", 1, io::Json{{"label_space", {{"num_classes", 2}}}}, {});
  EXPECT_EQ(error_of([&] { io::decode_trace(no_taps); }), ErrorCode::kMalformedHeader);

  // Huge declared dims must not overflow into a small payload size.
  io::Json h = {{"label_space", {{"num_classes", 2}}},
                {"taps", {{{"tap_id", 1}, {"name", "x"}, {"dim", std::numeric_limits<std::uint64_t>::max()}, {"kind", "other"}}}},
                {"sample_count", 1},
                {"samples", {{{"id", 1}, {"predicted_label", 0}, {"kind", "NoT"}, {"true_label", nullptr}}}}};
  EXPECT_EQ(error_of([&] { io::decode_trace(io::frame("TEDT", 1, h, {})); }),
            ErrorCode::kMalformedHeader);
}

TEST(TraceFile, RandomByteCorruptionNeverEscapesAsUntypedError) {
  std::mt19937_64 rng(15);
  const auto bytes = io::encode_trace(testing::random_trace(rng, 3, {3, 2}, 3));
  for (int round = 0; round < 3000; ++round) {
    auto b = bytes;
    for (int k = 0; k < 1 + static_cast<int>(rng() % 4); ++k) b[rng() % b.size()] = static_cast<std::uint8_t>(rng());
    try {
      io::decode_trace(b);
    } catch (const Error&) {
    } catch (const std::exception& e) {
      FAIL() << "untyped exception: " << e.what();
    }
  }
}

TEST(TraceFile, MatchesIndependentlyWrittenGoldenFile) {
  const auto golden = io::read_file(testing::source_path("tests/golden/golden.tedt"));
  const auto ours = io::encode_trace(golden_trace());
  ASSERT_EQ(ours.size(), golden.size());
  EXPECT_EQ(ours, golden);
  EXPECT_TRUE(bit_identical(io::decode_trace(golden), golden_trace()));
}

TEST(BankFile, RoundTrip) {
  std::mt19937_64 rng(16);
  const auto bank = testing::random_bank(rng, 4, 3, {5, 2});
  const auto back = io::decode_bank(io::encode_bank(bank));
  EXPECT_EQ(back, bank);
}

TEST(BankFile, PlainTraceIsNotABank) {
  std::mt19937_64 rng(17);
  const auto bytes = io::encode_trace(testing::random_trace(rng, 3, {2}, 6));
  EXPECT_EQ(error_of([&] { io::decode_bank(bytes); }), ErrorCode::kMalformedHeader);
}

TEST(ReportCsv, HeaderAndRoundTrip) {
  std::vector<io::ReportRow> rows = {
      {5, SampleKind::kVT, 3, 12.5, true, {1, 7, 40}},
      {6, SampleKind::kNoT, 1, 0.1234567890123, false, {1, 1, 2}},
  };
  const std::string text = io::format_report_csv(rows, 3);
  EXPECT_EQ(text.substr(0, text.find('\n')),
            "sample_id,kind,predicted_label,anomaly_score,verdict,K_1,K_2,K_3");
  const auto path = std::filesystem::temp_directory_path() / "toporank_report_test.csv";
  io::write_report_csv(path.string(), rows, 3);
  const auto back = io::read_report_csv(path.string());
  std::filesystem::remove(path);
  ASSERT_EQ(back.size(), 2u);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_EQ(back[i].sample_id, rows[i].sample_id);
    EXPECT_EQ(back[i].kind, rows[i].kind);
    EXPECT_EQ(back[i].anomaly_score, rows[i].anomaly_score);
    EXPECT_EQ(back[i].malicious, rows[i].malicious);
    EXPECT_EQ(back[i].features, rows[i].features);
  }
}

TEST(ReportCsv, KnnColumnNames) {
  const std::string text = io::format_report_csv({}, 2, 2);
  EXPECT_EQ(text, "sample_id,kind,predicted_label,anomaly_score,verdict,K_1_1,K_1_2,K_2_1,K_2_2\n");
}

}  // namespace
}  // namespace toporank
