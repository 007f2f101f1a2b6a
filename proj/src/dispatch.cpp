#include "kadapt/dispatch.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <ostream>

#include "kadapt/trace_io.hpp"
#include "kadapt/verify.hpp"

namespace kadapt {
namespace {

using nlohmann::json;

json curve_json(const Curve& curve) {
  json out = json::array();
  for (double v : curve) {
    if (std::isfinite(v)) {
      out.push_back(v);
    } else {
      out.push_back(nullptr);
    }
  }
  return out;
}

json sweep_json(const std::vector<SweepRow>& rows, const std::vector<double>& sgd_steps) {
  json out = json::array();
  for (const auto& row : rows) {
    json r{{"parameter", row.parameter}, {"kalman_mse", curve_json(row.kalman_mse)}};
    for (std::size_t k = 0; k < row.sgd_mse.size(); ++k) {
      r["sgd_mse"][std::to_string(sgd_steps[k])] = curve_json(row.sgd_mse[k]);
    }
    out.push_back(std::move(r));
  }
  return out;
}

std::string trace_file_name(std::uint64_t seed, OutputFormat format) {
  return "seed_" + std::to_string(seed) + (format == OutputFormat::kCsv ? ".csv" : ".jsonl");
}

// Writes the traces of `arm`, one file per seed.
std::size_t write_arm(const std::vector<ExperimentTrace>& traces, const std::string& arm,
                      const RunConfig& config) {
  std::size_t written = 0;
  for (const auto& t : traces) {
    if (t.arm != arm) continue;
    write_trace(t, config.output_path / trace_file_name(t.seed, config.output_format),
                config.output_format);
    ++written;
  }
  return written;
}

void write_json(const json& document, const std::filesystem::path& path) {
  std::error_code ec;
  std::filesystem::create_directories(path.parent_path(), ec);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIoError, "cannot open " + path.string() + " for writing");
  out << document.dump(2) << '\n';
  if (!out) throw Error(ErrorCode::kIoError, "write failed for " + path.string());
}

json envelope_header(const RunConfig& config) {
  return json{{"experiment", std::string(to_string(config.experiment))},
              {"config_fingerprint", hex64(config.fingerprint)},
              {"config", config.resolved}};
}

json fewshot_summary(const RunConfig& config, const FewShotResult& r) {
  json s;
  s["kalman_mse"] = curve_json(r.kalman_mse);
  s["ridge_mse"] = curve_json(r.ridge_mse);
  for (std::size_t k = 0; k < r.sgd_mse.size(); ++k) {
    s["sgd_mse"][std::to_string(config.fewshot.sgd_steps[k])] = curve_json(r.sgd_mse[k]);
  }
  if (r.calibration) {
    s["calibration"] = {{"nominal_levels", r.calibration->nominal_levels},
                        {"empirical_coverage", r.calibration->empirical_coverage},
                        {"num_trials", r.calibration->num_trials}};
  } else {
    s["calibration"] = nullptr;
  }
  s["mse_envelope"] = {{"mean_sq_error", curve_json(r.envelope.mean_sq_error)},
                       {"mean_trace", curve_json(r.envelope.mean_trace)},
                       {"within_envelope", r.envelope.within_envelope}};
  s["prior_sensitivity"] = sweep_json(r.prior_sensitivity, config.fewshot.sgd_steps);
  s["noise_sweep"] = sweep_json(r.noise_sweep, config.fewshot.sgd_steps);
  return s;
}

json shift_summary(const ShiftResult& r) {
  json s;
  s["best_sgd_arm"] = r.best_sgd_arm;
  for (const auto& a : r.arms) {
    json arm{{"mean_error", curve_json(a.mean_error)},
             {"pre_shift_level", a.pre_shift_level},
             {"post_shift_mean", a.post_shift_mean},
             {"post_shift_min", a.post_shift_min},
             {"recovery_steps", nullptr}};
    if (a.recovery_steps) arm["recovery_steps"] = *a.recovery_steps;
    s["arms"][a.arm] = std::move(arm);
  }
  return s;
}

json toy_summary(const ToyLlmResult& r) {
  json s = json::array();
  for (const auto& seed : r.seeds) {
    s.push_back({{"seed", seed.seed},
                 {"base_heldout_nll", seed.base_heldout_nll},
                 {"final_heldout_nll", seed.final_heldout_nll},
                 {"trace_half_life", seed.trace_half_life},
                 {"error_half_life", seed.error_half_life},
                 {"trace_ratio", seed.trace_ratio},
                 {"gain_norms", seed.gain_norms},
                 {"base_params_unchanged", seed.base_params_unchanged}});
  }
  return json{{"seeds", std::move(s)}};
}

int run_verify(const RunConfig& config, unsigned threads, std::ostream& log) {
  const auto start = std::chrono::steady_clock::now();
  std::vector<CheckResult> checks = run_acceptance(threads);
  for (const auto& c : checks) log << format_check(c) << '\n';
  for (auto& c : run_property_checks(threads)) {
    log << format_check(c) << '\n';
    checks.push_back(std::move(c));
  }
  const double total = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  std::size_t failed = 0;
  json report = envelope_header(config);
  for (const auto& c : checks) {
    failed += c.passed ? 0 : 1;
    report["checks"].push_back(
        {{"id", c.id}, {"title", c.title}, {"passed", c.passed}, {"detail", c.detail}, {"seconds", c.seconds}});
  }
  const bool in_budget = total < 300.0;
  report["total_seconds"] = total;
  report["within_time_budget"] = in_budget;
  report["failed"] = failed + (in_budget ? 0 : 1);
  write_json(report, config.output_path / "verify_report.json");
  log << checks.size() - failed << "/" << checks.size() << " checks passed in " << total << " s"
      << (in_budget ? "" : " (over the 300 s budget)") << '\n';
  return failed == 0 && in_budget ? 0 : 1;
}

}  // namespace

int dispatch(const RunConfig& config, unsigned threads, std::ostream& log) {
  const ExecutionOptions exec{config.fingerprint, threads};
  json aggregate = envelope_header(config);
  aggregate["seeds"] = config.seeds;
  std::size_t files = 0;
  switch (config.experiment) {
    case ExperimentKind::kVerify:
      return run_verify(config, threads, log);
    case ExperimentKind::kFewShot: {
      const auto r = run_fewshot_regression(config.fewshot, exec);
      files = write_arm(r.traces, "kalman", config);
      aggregate["summary"] = fewshot_summary(config, r);
      break;
    }
    case ExperimentKind::kShift: {
      const auto r = run_streaming_shift(config.shift, exec);
      files = write_arm(r.traces, r.arms.front().arm, config);
      aggregate["primary_arm"] = r.arms.front().arm;
      aggregate["summary"] = shift_summary(r);
      break;
    }
    case ExperimentKind::kToyLlm: {
      const auto r = run_toy_llm(config.toy_llm, exec);
      files = write_arm(r.traces, "kalman", config);
      aggregate["summary"] = toy_summary(r);
      break;
    }
    case ExperimentKind::kSpectral: {
      const auto r = run_spectral(config.spectral, exec);
      files = write_arm(r.traces, "kalman", config);
      aggregate["summary"] = {{"mean_sq_error", curve_json(r.mean_error)}, {"final_error", r.final_error}};
      break;
    }
  }
  write_json(aggregate, config.output_path / "aggregate.json");
  log << "wrote " << files << " trace files and aggregate.json to " << config.output_path.string()
      << " (fingerprint " << hex64(config.fingerprint) << ")\n";
  return 0;
}

}  // namespace kadapt
