#pragma once

#include <array>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>

#include "kadapt/config.hpp"
#include "kadapt/experiments.hpp"

namespace kadapt {

/// Fixed column order of every trace file.
inline constexpr std::array<std::string_view, 8> kTraceColumns{
    "step", "trace_P", "lambda_min", "gain_norm", "innovation", "sq_error", "heldout_metric", "seed"};

/// "step,trace_P,...,seed" without a newline.
std::string csv_header();

/// CSV: header line, then one row per record; inapplicable fields are empty.
void write_trace_csv(const ExperimentTrace& trace, std::ostream& out);

/// Line-delimited JSON: a header object {config_fingerprint, seed, arm, columns},
/// then one object per record with exactly the column keys (null when inapplicable).
void write_trace_jsonl(const ExperimentTrace& trace, std::ostream& out);

/// Writes to `path`, creating parent directories. Throws IoError.
void write_trace(const ExperimentTrace& trace, const std::filesystem::path& path,
                 OutputFormat format);

/// Inverse of write_trace_csv. The CSV carries no fingerprint or arm.
ExperimentTrace read_trace_csv(std::istream& in);
ExperimentTrace read_trace_jsonl(std::istream& in);
ExperimentTrace read_trace(const std::filesystem::path& path, OutputFormat format);

}  // namespace kadapt
