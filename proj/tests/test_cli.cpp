#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include "kadapt/config.hpp"
#include "kadapt/dispatch.hpp"
#include "kadapt/trace_io.hpp"

using namespace kadapt;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("kadapt_test_" + name);
  fs::remove_all(dir);
  return dir;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

ExperimentTrace sample_trace() {
  ExperimentTrace t;
  t.arm = "kalman";
  t.seed = 42;
  t.config_fingerprint = 0x0123456789abcdefULL;
  t.records.push_back({1, 0.1, 10.0, 0.3, -0.25, 1.0 / 3.0, std::nullopt});
  t.records.push_back({2, 1e-300, std::nullopt, 12345.678901234567, 0.0, 2.5e10, 0.7});
  return t;
}

std::string config_error(std::string_view bytes, const ConfigOverrides& overrides = {}) {
  try {
    parse_config(bytes, overrides);
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kConfigInvalid);
    return e.what();
  }
  ADD_FAILURE() << "config accepted";
  return {};
}

}  // namespace

TEST(Config, MinimalDocumentGetsDefaults) {
  const RunConfig a = parse_config(R"({"experiment": "fewshot"})");
  EXPECT_EQ(a.experiment, ExperimentKind::kFewShot);
  EXPECT_EQ(a.fewshot.dim, 8);
  EXPECT_EQ(a.seeds.size(), 200u);
  EXPECT_EQ(a.fewshot.seeds, a.seeds);
  EXPECT_EQ(a.output_format, OutputFormat::kCsv);
  EXPECT_EQ(a.fingerprint, parse_config(R"({ "experiment" : "fewshot" })").fingerprint);
  EXPECT_EQ(a.fingerprint, config_fingerprint(a.resolved));
}

TEST(Config, EmptyDocumentIsVerify) {
  EXPECT_EQ(parse_config("").experiment, ExperimentKind::kVerify);
}

TEST(Config, SeedOverrideChangesFingerprint) {
  const RunConfig base = parse_config(R"({"experiment": "shift"})");
  ConfigOverrides o;
  o.seeds = {7, 8};
  const RunConfig over = parse_config(R"({"experiment": "shift"})", o);
  EXPECT_EQ(over.shift.seeds, (std::vector<std::uint64_t>{7, 8}));
  EXPECT_NE(base.fingerprint, over.fingerprint);
}

TEST(Config, FingerprintCoversMergedDocument) {
  ConfigOverrides o;
  o.output_path = "/tmp/elsewhere";
  const RunConfig c = parse_config("{}", o);
  EXPECT_EQ(c.resolved.at("output_path").get<std::string>(), "/tmp/elsewhere");
  EXPECT_NE(parse_config("{}").fingerprint, c.fingerprint);
}

TEST(Config, InvalidValueNamesField) {
  EXPECT_NE(config_error(R"({"fewshot": {"noise_var": -1}})").find("fewshot.noise_var"), std::string::npos);
  EXPECT_NE(config_error(R"({"spectral": {"basis": "wavelet"}})").find("spectral.basis"), std::string::npos);
  EXPECT_NE(config_error(R"({"shift": {"horizon": -5}})").find("shift.horizon"), std::string::npos);
}

TEST(Config, RejectsUnknownKeysAndTypes) {
  EXPECT_NE(config_error(R"({"fewshot": {"noise": 1}})").find("noise"), std::string::npos);
  EXPECT_NE(config_error(R"({"bogus": 1})").find("bogus"), std::string::npos);
  config_error(R"({"fewshot": {"dim": "eight"}})");
  config_error(R"({"fewshot": {"dim": 2.5}})");
  config_error(R"({"seeds": []})");
  config_error("{not json");
}

TEST(Config, AssignmentsOverrideFile) {
  ConfigOverrides o;
  o.assignments = {"fewshot.noise_var=1.5", "spectral.basis=laplacian", "output_format=json"};
  const RunConfig c = parse_config(R"({"fewshot": {"noise_var": 0.5}})", o);
  EXPECT_EQ(c.fewshot.noise_var, 1.5);
  EXPECT_EQ(c.spectral.basis, BasisKind::kLaplacian);
  EXPECT_EQ(c.output_format, OutputFormat::kJson);
  o.assignments = {"fewshot.missing=1"};
  config_error("{}", o);
  o.assignments = {"no_equals_sign"};
  config_error("{}", o);
}

TEST(Config, DefaultDocumentRoundTrips) {
  const auto doc = default_config_document();
  const RunConfig c = parse_config(doc.dump());
  EXPECT_EQ(c.fingerprint, parse_config("{}").fingerprint);
}

TEST(Fnv, KnownVectors) {
  EXPECT_EQ(fnv1a64(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(fnv1a64("a"), 0xaf63dc4c8601ec8cULL);
  EXPECT_EQ(hex64(0xabcULL), "0000000000000abc");
}

TEST(TraceIo, GoldenCsv) {
  EXPECT_EQ(csv_header(), "step,trace_P,lambda_min,gain_norm,innovation,sq_error,heldout_metric,seed");
  ExperimentTrace t;
  t.seed = 3;
  t.records.push_back({1, 0.5, std::nullopt, std::nullopt, std::nullopt, 0.25, std::nullopt});
  std::ostringstream out;
  write_trace_csv(t, out);
  EXPECT_EQ(out.str(), csv_header() + "\n1,0.5,,,,0.25,,3\n");
}

TEST(TraceIo, EmptyTraceIsHeaderOnly) {
  std::ostringstream out;
  write_trace_csv(ExperimentTrace{}, out);
  EXPECT_EQ(out.str(), csv_header() + "\n");
  std::istringstream in(out.str());
  EXPECT_TRUE(read_trace_csv(in).records.empty());
}

TEST(TraceIo, CsvRoundTripIsExact) {
  const auto t = sample_trace();
  std::ostringstream out;
  write_trace_csv(t, out);
  std::istringstream in(out.str());
  const auto back = read_trace_csv(in);
  EXPECT_EQ(back.records, t.records);
  EXPECT_EQ(back.seed, t.seed);
}

TEST(TraceIo, JsonRoundTripIsExact) {
  const auto t = sample_trace();
  std::ostringstream out;
  write_trace_jsonl(t, out);
  std::istringstream in(out.str());
  const auto back = read_trace_jsonl(in);
  EXPECT_EQ(back.records, t.records);
  EXPECT_EQ(back.seed, t.seed);
  EXPECT_EQ(back.arm, t.arm);
  EXPECT_EQ(back.config_fingerprint, t.config_fingerprint);
}

TEST(TraceIo, NonFiniteBecomesNull) {
  auto t = sample_trace();
  t.records[0].trace_P = std::numeric_limits<double>::infinity();
  std::ostringstream out;
  write_trace_jsonl(t, out);
  EXPECT_NE(out.str().find("\"trace_P\":null"), std::string::npos);
}

TEST(TraceIo, WritesAreByteIdentical) {
  const fs::path dir = fresh_dir("bytes");
  const auto t = sample_trace();
  for (const auto format : {OutputFormat::kCsv, OutputFormat::kJson}) {
    write_trace(t, dir / "a", format);
    write_trace(t, dir / "b", format);
    EXPECT_EQ(slurp(dir / "a"), slurp(dir / "b"));
    EXPECT_EQ(read_trace(dir / "a", format).records, t.records);
  }
  fs::remove_all(dir);
}

TEST(TraceIo, MissingFileIsIoError) {
  try {
    read_trace("/nonexistent/kadapt/trace.csv", OutputFormat::kCsv);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kIoError);
  }
}

TEST(Dispatch, FewShotWritesTracesAndAggregate) {
  const fs::path dir = fresh_dir("fewshot");
  ConfigOverrides o;
  o.seeds = {0, 1};
  o.output_path = dir.string();
  o.assignments = {"fewshot.num_samples=10", "fewshot.prior_sensitivity=[]", "fewshot.noise_sweep=[]"};
  const RunConfig c = parse_config(R"({"experiment": "fewshot"})", o);
  std::ostringstream log;
  ASSERT_EQ(dispatch(c, 2, log), 0);
  EXPECT_TRUE(fs::exists(dir / "seed_0.csv"));
  EXPECT_TRUE(fs::exists(dir / "seed_1.csv"));
  const auto aggregate = nlohmann::json::parse(slurp(dir / "aggregate.json"));
  EXPECT_EQ(aggregate.at("config_fingerprint").get<std::string>(), hex64(c.fingerprint));
  EXPECT_TRUE(aggregate.at("summary").at("calibration").is_null());
  const auto trace = read_trace(dir / "seed_1.csv", OutputFormat::kCsv);
  EXPECT_EQ(trace.records.size(), 10u);
  EXPECT_EQ(trace.seed, 1u);

  const std::string first = slurp(dir / "seed_0.csv");
  ASSERT_EQ(dispatch(c, 1, log), 0);
  EXPECT_EQ(slurp(dir / "seed_0.csv"), first);
  fs::remove_all(dir);
}

TEST(Dispatch, FrozenShiftRunSucceeds) {
  const fs::path dir = fresh_dir("shift");
  ConfigOverrides o;
  o.seeds = {3};
  o.output_path = dir.string();
  o.output_format = "json";
  o.assignments = {"shift.q_grid=[0]", "shift.horizon=200", "shift.window=20"};
  const RunConfig c = parse_config(R"({"experiment": "shift"})", o);
  std::ostringstream log;
  ASSERT_EQ(dispatch(c, 1, log), 0);
  const auto trace = read_trace(dir / "seed_3.jsonl", OutputFormat::kJson);
  EXPECT_EQ(trace.arm, "kalman_q0");
  EXPECT_EQ(trace.records.size(), 200u);
  fs::remove_all(dir);
}

TEST(Config, ShippedConfigsParse) {
  std::size_t count = 0;
  for (const auto& entry : fs::directory_iterator(KADAPT_CONFIG_DIR)) {
    EXPECT_NO_THROW(load_config(entry.path())) << entry.path();
    ++count;
  }
  EXPECT_EQ(count, 5u);
}
