#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "kadapt/experiments.hpp"
#include <json.hpp>

namespace kadapt {

enum class ExperimentKind { kFewShot, kShift, kToyLlm, kSpectral, kVerify };
enum class OutputFormat { kCsv, kJson };

std::string_view to_string(ExperimentKind kind);
std::string_view to_string(OutputFormat format);
ExperimentKind parse_experiment(std::string_view name);
OutputFormat parse_format(std::string_view name);

/// Fully resolved run configuration. `resolved` is the merged document the
/// fingerprint is computed over.
struct RunConfig {
  ExperimentKind experiment = ExperimentKind::kVerify;
  FewShotConfig fewshot;
  ShiftConfig shift;
  ToyLlmConfig toy_llm;
  SpectralConfig spectral;
  std::vector<std::uint64_t> seeds;
  std::filesystem::path output_path = "out";
  OutputFormat output_format = OutputFormat::kCsv;
  nlohmann::json resolved;
  std::uint64_t fingerprint = 0;
};

/// Command-line values; each set field wins over the file.
struct ConfigOverrides {
  std::optional<ExperimentKind> experiment;
  std::vector<std::uint64_t> seeds;
  std::optional<std::string> output_path;
  std::optional<std::string> output_format;
  std::vector<std::string> assignments;  // "section.key=<json>"
};

/// The default document: every accepted key with its default value.
nlohmann::json default_config_document();

/// Parses file bytes (empty means "{}") and applies overrides. Unknown keys,
/// wrong types and invalid values raise ConfigInvalid naming the field.
RunConfig parse_config(std::string_view bytes, const ConfigOverrides& overrides = {});

RunConfig load_config(const std::filesystem::path& path, const ConfigOverrides& overrides = {});

/// FNV-1a 64-bit hash.
std::uint64_t fnv1a64(std::string_view bytes);

/// Fingerprint of a resolved document: FNV-1a over its sorted-key compact dump.
std::uint64_t config_fingerprint(const nlohmann::json& resolved);

std::string hex64(std::uint64_t value);

}  // namespace kadapt
