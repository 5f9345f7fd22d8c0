// Command-line driver: desatscan <command> --config <path> [--seed N] [--force]

#include <CLI11.hpp>

#include <iostream>
#include <optional>

#include "desatscan/config.hpp"
#include "desatscan/pipeline.hpp"

namespace {

enum ExitCode { kOk = 0, kConfigError = 2, kMissingInput = 3, kRuntimeFailure = 4 };

}  // namespace

int main(int argc, char** argv) {
  using namespace desatscan;
  CLI::App app{"Sleep EEG desaturation classifier pipeline"};
  app.require_subcommand(1, 1);
  std::string config_path;
  std::optional<std::uint64_t> seed;
  bool force = false;
  const char* commands[] = {"synth", "preprocess", "cohort", "split", "train", "report"};
  const char* help[] = {"generate a synthetic cohort", "filter and featurize EEG epochs",
                        "classify subjects per stage", "build train/test/validation splits",
                        "train and score models", "summarize validation metrics"};
  for (std::size_t i = 0; i < std::size(commands); ++i) {
    auto* sub = app.add_subcommand(commands[i], help[i]);
    sub->add_option("--config", config_path, "config file")->required();
    sub->add_option("--seed", seed, "override the config seed");
    sub->add_flag("--force", force, "overwrite existing synthetic data");
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kConfigError;
  }
  const std::string command = app.get_subcommands().front()->get_name();

  try {
    CommandContext ctx;
    ctx.config = load_config(config_path);
    if (seed) ctx.config.seed = *seed;
    ctx.force = force;
    ctx.log = &std::cerr;
    if (command == "synth") cmd_synth(ctx);
    else if (command == "preprocess") cmd_preprocess(ctx);
    else if (command == "cohort") cmd_cohort(ctx);
    else if (command == "split") cmd_split(ctx);
    else if (command == "train") cmd_train(ctx);
    else std::cout << cmd_report(ctx);
    return kOk;
  } catch (const ConfigError& e) {
    std::cerr << "desatscan " << command << ": config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const MissingInputError& e) {
    std::cerr << "desatscan " << command << ": " << e.what() << '\n';
    return kMissingInput;
  } catch (const std::exception& e) {
    std::cerr << "desatscan " << command << ": " << e.what() << '\n';
    return kRuntimeFailure;
  }
}
