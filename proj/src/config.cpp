#include "kadapt/config.hpp"

#include <array>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace kadapt {
namespace {

using nlohmann::json;

[[noreturn]] void invalid(const std::string& field, const std::string& why) {
  throw Error(ErrorCode::kConfigInvalid, field + ": " + why);
}

constexpr std::array<std::pair<FeatureKind, std::string_view>, 2> kFeatureNames{
    {{FeatureKind::kGaussian, "gaussian"}, {FeatureKind::kEncoder, "encoder"}}};
constexpr std::array<std::pair<BasisKind, std::string_view>, 2> kBasisNames{
    {{BasisKind::kCosine, "cosine"}, {BasisKind::kLaplacian, "laplacian"}}};
constexpr std::array<std::pair<NllLevelRule, std::string_view>, 2> kRuleNames{
    {{NllLevelRule::kSurrogate, "surrogate"}, {NllLevelRule::kFixed, "fixed"}}};
constexpr std::array<std::pair<ExperimentKind, std::string_view>, 5> kExperimentNames{
    {{ExperimentKind::kFewShot, "fewshot"},
     {ExperimentKind::kShift, "shift"},
     {ExperimentKind::kToyLlm, "toy_llm"},
     {ExperimentKind::kSpectral, "spectral"},
     {ExperimentKind::kVerify, "verify"}}};
constexpr std::array<std::pair<OutputFormat, std::string_view>, 2> kFormatNames{
    {{OutputFormat::kCsv, "csv"}, {OutputFormat::kJson, "json"}}};

template <class Enum, std::size_t N>
std::string_view name_of(const std::array<std::pair<Enum, std::string_view>, N>& table, Enum e) {
  for (const auto& [value, name] : table) {
    if (value == e) return name;
  }
  return "?";
}

template <class Enum, std::size_t N>
Enum value_of(const std::array<std::pair<Enum, std::string_view>, N>& table, std::string_view s,
              const std::string& field) {
  for (const auto& [value, name] : table) {
    if (name == s) return value;
  }
  std::string allowed;
  for (const auto& entry : table) allowed += (allowed.empty() ? "" : "|") + std::string(entry.second);
  invalid(field, "expected one of " + allowed + ", got \"" + std::string(s) + "\"");
}

// Binds each config field to its key. The same visitor writes defaults and
// reads resolved values, so the two directions cannot drift apart.
template <class V>
void visit(FewShotConfig& c, V&& v) {
  v("dim", c.dim);
  v("noise_var", c.noise_var);
  v("prior_scale", c.prior_scale);
  v("num_samples", c.num_samples);
  v("sgd_steps", c.sgd_steps);
  v("ridge_lambda", c.ridge_lambda);
  v("prior_sensitivity", c.prior_sensitivity);
  v("noise_sweep", c.noise_sweep);
  v("calibration_levels", c.calibration_levels);
  v("filter_noise_factor", c.filter_noise_factor);
  v.enumeration("features", c.features, kFeatureNames);
  v("encoder_input_dim", c.encoder_input_dim);
}

template <class V>
void visit(ShiftConfig& c, V&& v) {
  v("dim", c.dim);
  v("horizon", c.horizon);
  v("shift_norm", c.shift_norm);
  v("noise_var", c.noise_var);
  v("prior_scale", c.prior_scale);
  v("q_grid", c.q_grid);
  v("sgd_steps", c.sgd_steps);
  v("window", c.window);
  v("recovery_tolerance", c.recovery_tolerance);
}

template <class V>
void visit(ToyLlmConfig& c, V&& v) {
  v("vocab_size", c.task.shape.vocab_size);
  v("feature_dim", c.task.shape.feature_dim);
  v("context_length", c.task.shape.context_length);
  v("embedding_dim", c.task.shape.embedding_dim);
  v("latent_dim", c.task.latent_dim);
  v("shift", c.task.shift);
  v("base_scale", c.task.base_scale);
  v("demo_tokens", c.task.demo_tokens);
  v("heldout_tokens", c.task.heldout_tokens);
  v("orthogonal_subspace", c.task.orthogonal_subspace);
  v("noise_var", c.noise_var);
  v("prior_scale", c.prior_scale);
  v("process_noise", c.process_noise);
  v.enumeration("level_rule", c.linearization.rule, kRuleNames);
  v("fixed_level", c.linearization.fixed_level);
  v("relinearize", c.linearization.relinearize);
}

template <class V>
void visit(SpectralConfig& c, V&& v) {
  v.enumeration("basis", c.basis, kBasisNames);
  v("domain_size", c.domain_size);
  v("components", c.components);
  v("num_obs", c.run.num_obs);
  v("noise_var", c.run.noise_var);
  v("process_noise", c.run.process_noise);
  v("drift", c.run.drift);
  v("prior_scale", c.run.prior_scale);
}

struct Writer {
  json& out;
  template <class T>
  void operator()(const char* key, const T& value) {
    out[key] = value;
  }
  template <class Enum, std::size_t N>
  void enumeration(const char* key, const Enum& value,
                   const std::array<std::pair<Enum, std::string_view>, N>& table) {
    out[key] = std::string(name_of(table, value));
  }
};

struct Reader {
  const json& in;
  std::string section;
  template <class T>
  void operator()(const char* key, T& value) {
    value = in.at(key).get<T>();
  }
  template <class Enum, std::size_t N>
  void enumeration(const char* key, Enum& value,
                   const std::array<std::pair<Enum, std::string_view>, N>& table) {
    value = value_of(table, in.at(key).get<std::string>(), section + "." + key);
  }
};

template <class Config>
json section_document(Config config) {
  json out = json::object();
  visit(config, Writer{out});
  return out;
}

template <class Config>
void read_section(const json& doc, const char* name, Config& config) {
  visit(config, Reader{doc.at(name), name});
}

bool same_kind(const json& expected, const json& given, const std::string& field) {
  if (expected.is_number_unsigned()) {
    if (!given.is_number_unsigned()) invalid(field, "expected a nonnegative integer");
  } else if (expected.is_number_integer()) {
    if (!given.is_number_integer()) invalid(field, "expected an integer");
  } else if (expected.is_number()) {
    if (!given.is_number()) invalid(field, "expected a number");
  } else if (expected.type() != given.type()) {
    invalid(field, std::string("expected ") + expected.type_name() + ", got " + given.type_name());
  }
  return true;
}

// Overlays `given` onto `base`, rejecting unknown keys and type changes.
void merge_strict(json& base, const json& given, const std::string& path) {
  if (!given.is_object()) invalid(path.empty() ? "<root>" : path, "expected an object");
  for (const auto& [key, value] : given.items()) {
    const std::string field = path.empty() ? key : path + "." + key;
    if (!base.contains(key)) invalid(field, "unknown key");
    json& slot = base[key];
    if (field == "seeds") {
      if (value.is_null()) continue;
      if (!value.is_array()) invalid(field, "expected an array of nonnegative integers");
      for (const auto& s : value) {
        if (!s.is_number_unsigned()) invalid(field, "expected an array of nonnegative integers");
      }
      slot = value;
    } else if (slot.is_object()) {
      merge_strict(slot, value, field);
    } else if (slot.is_array()) {
      if (!value.is_array()) invalid(field, "expected an array");
      if (!slot.empty()) {
        for (const auto& element : value) same_kind(slot.front(), element, field + "[]");
      }
      slot = value;
    } else {
      same_kind(slot, value, field);
      slot = value;
    }
  }
}

void assign_path(json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    invalid(assignment, "override must look like section.key=<json>");
  }
  const std::string path = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  json value = json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;  // bare words are strings

  json* node = &doc;
  std::size_t from = 0;
  while (true) {
    const auto dot = path.find('.', from);
    const std::string key = path.substr(from, dot == std::string::npos ? std::string::npos : dot - from);
    if (key.empty()) invalid(path, "empty key in override path");
    if (!node->is_object()) invalid(path, "override path crosses a non-object");
    if (dot == std::string::npos) {
      (*node)[key] = std::move(value);
      return;
    }
    node = &(*node)[key];
    if (node->is_null()) *node = json::object();
    from = dot + 1;
  }
}

std::vector<std::uint64_t> default_seeds(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::kFewShot: return FewShotConfig{}.seeds;
    case ExperimentKind::kShift: return ShiftConfig{}.seeds;
    case ExperimentKind::kToyLlm: return ToyLlmConfig{}.seeds;
    case ExperimentKind::kSpectral: return SpectralConfig{}.seeds;
    case ExperimentKind::kVerify: return {0};
  }
  return {0};
}

}  // namespace

std::string_view to_string(ExperimentKind kind) { return name_of(kExperimentNames, kind); }
std::string_view to_string(OutputFormat format) { return name_of(kFormatNames, format); }

ExperimentKind parse_experiment(std::string_view name) {
  return value_of(kExperimentNames, name, "experiment");
}

OutputFormat parse_format(std::string_view name) {
  return value_of(kFormatNames, name, "output_format");
}

json default_config_document() {
  json doc = json::object();
  doc["experiment"] = "verify";
  doc["seeds"] = nullptr;
  doc["output_path"] = "out";
  doc["output_format"] = "csv";
  doc["fewshot"] = section_document(FewShotConfig{});
  doc["shift"] = section_document(ShiftConfig{});
  doc["toy_llm"] = section_document(ToyLlmConfig{});
  doc["spectral"] = section_document(SpectralConfig{});
  return doc;
}

RunConfig parse_config(std::string_view bytes, const ConfigOverrides& overrides) {
  json given = json::object();
  if (bytes.find_first_not_of(" \t\r\n") != std::string_view::npos) {
    try {
      given = json::parse(bytes);
    } catch (const json::parse_error& e) {
      invalid("<file>", std::string("malformed JSON: ") + e.what());
    }
  }
  if (!given.is_object()) invalid("<root>", "expected an object");
  for (const auto& a : overrides.assignments) assign_path(given, a);
  if (overrides.experiment) given["experiment"] = std::string(to_string(*overrides.experiment));
  if (!overrides.seeds.empty()) given["seeds"] = overrides.seeds;
  if (overrides.output_path) given["output_path"] = *overrides.output_path;
  if (overrides.output_format) given["output_format"] = *overrides.output_format;

  json doc = default_config_document();
  merge_strict(doc, given, "");

  RunConfig config;
  config.experiment = parse_experiment(doc.at("experiment").get<std::string>());
  config.output_format = parse_format(doc.at("output_format").get<std::string>());
  config.output_path = doc.at("output_path").get<std::string>();
  if (doc.at("seeds").is_null()) doc["seeds"] = default_seeds(config.experiment);
  config.seeds = doc.at("seeds").get<std::vector<std::uint64_t>>();
  if (config.seeds.empty()) invalid("seeds", "seed list must be nonempty");

  read_section(doc, "fewshot", config.fewshot);
  read_section(doc, "shift", config.shift);
  read_section(doc, "toy_llm", config.toy_llm);
  read_section(doc, "spectral", config.spectral);
  switch (config.experiment) {
    case ExperimentKind::kFewShot: config.fewshot.seeds = config.seeds; break;
    case ExperimentKind::kShift: config.shift.seeds = config.seeds; break;
    case ExperimentKind::kToyLlm: config.toy_llm.seeds = config.seeds; break;
    case ExperimentKind::kSpectral: config.spectral.seeds = config.seeds; break;
    case ExperimentKind::kVerify: break;
  }
  config.fewshot.validate();
  config.shift.validate();
  config.toy_llm.validate();
  config.spectral.validate();

  config.resolved = std::move(doc);
  config.fingerprint = config_fingerprint(config.resolved);
  return config;
}

RunConfig load_config(const std::filesystem::path& path, const ConfigOverrides& overrides) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot read config " + path.string());
  std::ostringstream bytes;
  bytes << in.rdbuf();
  return parse_config(bytes.str(), overrides);
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  for (const char c : bytes) {
    hash ^= static_cast<unsigned char>(c);
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

std::uint64_t config_fingerprint(const json& resolved) { return fnv1a64(resolved.dump()); }

std::string hex64(std::uint64_t value) {
  char buffer[17];
  std::snprintf(buffer, sizeof buffer, "%016llx", static_cast<unsigned long long>(value));
  return buffer;
}

}  // namespace kadapt
