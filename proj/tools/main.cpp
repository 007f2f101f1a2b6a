#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "kadapt/config.hpp"
#include "kadapt/dispatch.hpp"

namespace {

constexpr const char* kThreadsVariable = "KADAPT_MAX_THREADS";

unsigned thread_cap() {
  const char* raw = std::getenv(kThreadsVariable);
  if (raw == nullptr || *raw == '\0') return 0;
  try {
    const unsigned long value = std::stoul(raw);
    return static_cast<unsigned>(value);
  } catch (const std::exception&) {
    throw kadapt::Error(kadapt::ErrorCode::kConfigInvalid,
                        std::string(kThreadsVariable) + ": expected a nonnegative integer");
  }
}

struct Options {
  std::string config_path;
  std::vector<std::uint64_t> seeds;
  std::string out;
  std::string format;
  std::vector<std::string> assignments;
  bool print_config = false;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Kalman-filter adaptation experiments and property checks"};
  app.require_subcommand(1);
  Options options;
  std::optional<kadapt::ExperimentKind> chosen;

  for (const auto kind : {kadapt::ExperimentKind::kFewShot, kadapt::ExperimentKind::kShift,
                          kadapt::ExperimentKind::kToyLlm, kadapt::ExperimentKind::kSpectral,
                          kadapt::ExperimentKind::kVerify}) {
    const std::string name(kadapt::to_string(kind));
    auto* sub = app.add_subcommand(name, kind == kadapt::ExperimentKind::kVerify
                                             ? "run every acceptance criterion and property check"
                                             : "run the " + name + " experiment");
    sub->add_option("--config", options.config_path, "JSON configuration file")->check(CLI::ExistingFile);
    sub->add_option("--seed", options.seeds, "seed (repeatable; replaces the configured list)");
    sub->add_option("--out", options.out, "output directory");
    sub->add_option("--format", options.format, "trace format")->check(CLI::IsMember({"csv", "json"}));
    sub->add_option("--set", options.assignments, "override, e.g. --set fewshot.noise_var=0.5");
    sub->add_flag("--print-config", options.print_config, "print the resolved configuration and exit");
    sub->callback([&chosen, kind] { chosen = kind; });
  }
  CLI11_PARSE(app, argc, argv);

  try {
    kadapt::ConfigOverrides overrides;
    overrides.experiment = chosen;
    overrides.seeds = options.seeds;
    if (!options.out.empty()) overrides.output_path = options.out;
    if (!options.format.empty()) overrides.output_format = options.format;
    overrides.assignments = options.assignments;
    const kadapt::RunConfig config = options.config_path.empty()
                                         ? kadapt::parse_config("", overrides)
                                         : kadapt::load_config(options.config_path, overrides);
    if (options.print_config) {
      std::cout << config.resolved.dump(2) << "\nfingerprint " << kadapt::hex64(config.fingerprint) << '\n';
      return 0;
    }
    return kadapt::dispatch(config, thread_cap(), std::cout);
  } catch (const kadapt::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
}
